import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sympert.cli import ConfigError, ExperimentConfig, load_config, main, parse_structure
from sympert.matcore import SymplecticContext, read_csv, write_csv

FAST = ["--tol", "1e-8", "--set", "grid=20", "--nmax", "20"]


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_defaults_validate():
    cfg = load_config()
    assert cfg == ExperimentConfig()
    assert cfg.scales == (1.0, 0.1, 0.01, 0.001)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nsystem = example2\na = 18.95  # trailing\nscales = 0.1, 0.01\nlambda = -1\nintegrator_tol = 1e-9\nbasis = A.csv\n")
    cfg = load_config(str(path), [("rank", "3"), ("n_max", "12")])
    assert (cfg.system, cfg.a, cfg.scales, cfg.lam, cfg.tol, cfg.rank, cfg.nmax) == ("example2", 18.95, (0.1, 0.01), -1 + 0j, 1e-9, 3, 12)
    assert cfg.basis == str(tmp_path / "A.csv")


@pytest.mark.parametrize(
    "text",
    ["colour = red\n", "rank = two\n", "scales = -1\n", "tol = 0\n", "system = mystery\n", "no equals sign\n", "conjugate = maybe\n"],
)
def test_bad_config_is_rejected(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(str(path))


@pytest.mark.parametrize(
    "argv",
    [
        ["table", "--set", "colour=red"],
        ["table", "--rank", "4"],
        ["jordan", "--spec", "1:1x3", "--lambda", "1", "--k", "1"],
        ["jordan", "--spec", "2:1x1", "--lambda", "3", "--k", "1"],
        ["psi", "--config", "/nonexistent/file.cfg"],
    ],
)
def test_configuration_errors_exit_with_two(tmp_path, argv, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_parse_structure():
    spec = parse_structure("2:2x1; 1:1x2,1x1")
    assert [(s.lam, s.sizes) for s in spec] == [(2, ((2, 1),)), (1, ((1, 3),))]
    with pytest.raises(ConfigError):
        parse_structure("2-2x1")
    with pytest.raises(ConfigError):
        parse_structure("")


def test_isotropic_command(tmp_path):
    assert main(["isotropic", "--out", str(tmp_path), "--rank", "2", "--seed", "3"]) == 0
    U = read_csv(tmp_path / "isotropic.csv")
    ctx = SymplecticContext(3)
    assert U.shape == (6, 2)
    assert np.linalg.norm(U.T @ ctx.J @ U) < 1e-13
    info = json.loads((tmp_path / "isotropic.json").read_text())
    assert info["k"] == 2 and info["isotropy_defect"] < 1e-13


def test_isotropic_command_with_a_matrix_file(tmp_path):
    A = np.random.default_rng(1).standard_normal((8, 3))
    write_csv(tmp_path / "A.csv", A)
    assert main(["isotropic", "--out", str(tmp_path), "--rank", "3", "--set", f"basis={tmp_path / 'A.csv'}"]) == 0
    assert read_csv(tmp_path / "isotropic.csv").shape == (8, 3)


def test_psi_command(tmp_path):
    assert main(["psi", "--out", str(tmp_path), "--scales", "0,0.1"] + FAST) == 0
    summary = json.loads((tmp_path / "psi_summary.json").read_text())
    assert set(summary["scales"]) == {"0", "0.1"}
    zero = read_rows(tmp_path / "psi_0.csv")
    assert zero[0] == ["t", "psi"] and len(zero) == 21
    assert all(float(v) == 0.0 for _, v in zero[1:])
    assert summary["scales"]["0.1"]["within_bound"]


def test_table_command_and_reruns_are_identical(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["table", "--out", str(out), "--scales", "0.1,0.01"] + FAST) == 0
    for name in ("table.csv", "table.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    rows = read_rows(outs[0] / "table.csv")
    assert [r[1] for r in rows[1:]] == ["0.1", "0.01", "0"]
    header = rows[0]
    verdict = header.index("verdict")
    assert all(r[verdict] == "strongly_stable" for r in rows[1:])
    report = json.loads((outs[0] / "table.json").read_text())
    assert report["scales"]["0"]["verdict"] == "strongly_stable"


def test_table_reports_unstable_systems_with_dashes(tmp_path):
    argv = ["table", "--out", str(tmp_path), "--scales", "0.01", "--set", "eps=15"] + FAST
    assert main(argv) == 0
    rows = read_rows(tmp_path / "table.csv")
    header, data = rows[0], rows[1:]
    for r in data:
        assert r[header.index("verdict")] == "unstable"
        assert r[header.index("s_n_norm")] == "inf"
    json.loads((tmp_path / "table.json").read_text())


def test_jordan_command(tmp_path):
    argv = ["jordan", "--out", str(tmp_path), "--spec=-1:3x2", "--lambda=-1", "--k", "1", "--trials", "20"]
    assert main(argv) == 0
    report = json.loads((tmp_path / "jordan_report.json").read_text())
    for key in ("case", "predicted", "observed_histogram", "match_fraction", "borderline_count", "seed", "trials"):
        assert key in report
    assert report["case"] == "2b"
    assert report["predicted"]["sizes"] == [[4, 1]]
    assert report["match_fraction"] == 1.0


def test_system_file(tmp_path):
    C0 = np.diag([1.0, 1.0])
    C1 = np.diag([0.2, 0.0])
    write_csv(tmp_path / "c0.csv", C0)
    write_csv(tmp_path / "c1.csv", C1)
    (tmp_path / "mathieu.sys").write_text("name = mathieu\nperiod = pi\nterm = c0.csv, 0, cos\nterm = c1.csv, 2, cos\n")
    cfg = tmp_path / "run.cfg"
    cfg.write_text("system = file\nsystem_file = mathieu.sys\nrank = 1\nscales = 0.1\n")
    assert main(["table", "--config", str(cfg), "--out", str(tmp_path / "out")] + FAST) == 0
    rows = read_rows(tmp_path / "out" / "table.csv")
    assert rows[1][0] == "mathieu/rank1"


def test_bad_system_file(tmp_path):
    (tmp_path / "x.sys").write_text("period = 1\nterm = missing.csv, 1\n")
    with pytest.raises(ConfigError):
        from sympert.cli import load_system_file

        load_system_file(str(tmp_path / "x.sys"))


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sympert", "isotropic", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        env={**os.environ},
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "isotropic.csv").exists()


@pytest.mark.slow
def test_example1_command(tmp_path):
    assert main(["example1", "--out", str(tmp_path), "--tol", "1e-10", "--set", "grid=50"]) == 0
    base = tmp_path / "example1"
    for tag in ("eps2_delta4", "eps15_delta4"):
        for rank in (2, 3):
            d = base / tag / f"rank{rank}"
            assert (d / "table.csv").exists() and (d / "psi_summary.json").exists()
    rows = read_rows(base / "eps2_delta4" / "rank2" / "table.csv")
    header = rows[0]
    row = next(r for r in rows[1:] if r[1] == "0")
    assert abs(float(row[header.index("s_n_norm")]) - 7.9852) < 1e-3
