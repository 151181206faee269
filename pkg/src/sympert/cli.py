"""Batch front end: isotropic bases, Psi curves, stability tables and Jordan checks.

Every subcommand reads an optional flat ``key = value`` config file, applies
command-line overrides and writes CSV/JSON data into ``--out``. Exit codes:
0 on success, 1 on a numerical failure, 2 on an invalid config or an
unrealizable Jordan structure.
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import operator
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import jordan, ode, stability
from .isotropic import isotropic_from
from .matcore import SympertError, SymplecticContext, as_mat, is_symplectic, read_csv, symplectic_projection, write_csv
from .perturb import RankKPerturbation, apply

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "REFERENCE_CASES",
    "load_config",
    "parse_structure",
    "load_system_file",
    "build_system",
    "run_isotropic",
    "run_psi",
    "run_table",
    "run_jordan",
    "run_example",
    "main",
]

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2
NUMERIC_CODES = {"stiff", "blowup", "eig_failed", "singular_cayley"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    system: str = "example1"
    eps: float = 2.0
    delta: float = 4.0
    a: float = 2.0
    b: float = 2.0
    system_file: str = ""
    rank: int = 2
    scales: tuple = (1.0, 0.1, 0.01, 0.001)
    seed: int = 0
    tol: float = ode.DEFAULT_TOL
    nmax: int = 30
    grid: int = 400
    out: str = "out"
    basis: str = ""  # CSV of a 2N x k matrix fed to the isotropic reduction; random when empty
    n_half: int = 3
    spec: str = ""
    lam: complex = 1.0
    k: int = 1
    trials: int = 100
    conjugate: bool = True
    workers: int = 1

    def validate(self):
        if self.system not in ("example1", "example2", "file"):
            raise ConfigError(f"system must be example1, example2 or file, got {self.system!r}")
        if self.system == "file" and not self.system_file:
            raise ConfigError("system=file needs system_file")
        if not self.scales:
            raise ConfigError("scales must not be empty")
        if any(not (math.isfinite(s) and s >= 0) for s in self.scales):
            raise ConfigError("scales must be finite and non-negative")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not 0 <= self.nmax <= 60:
            raise ConfigError("nmax must lie in 0..60")
        if self.grid < 2:
            raise ConfigError("grid needs at least two points")
        if self.rank < 1 or self.k < 1 or self.trials < 1 or self.workers < 1 or self.n_half < 1:
            raise ConfigError("rank, k, trials, workers and n_half must be positive")
        return self


_ALIASES = {"lambda": "lam", "integrator_tol": "tol", "n_max": "nmax", "output_dir": "out"}
_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key, raw):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "complex":
            return complex(raw.replace(" ", ""))
        if kind == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "tuple":
            return tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def _apply_pairs(cfg, pairs):
    updates = {}
    for key, raw in pairs:
        key = _ALIASES.get(key.strip(), key.strip())
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        updates[key] = _convert(key, raw)
    return replace(cfg, **updates)


def load_config(path=None, overrides=()):
    """Defaults, then ``key = value`` lines of ``path``, then ``overrides`` pairs."""
    cfg = ExperimentConfig()
    if path:
        pairs = []
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = os.path.dirname(os.path.abspath(path))
        for n, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, raw = line.split("=", 1)
            if key.strip() in ("system_file", "basis") and raw.strip():
                raw = os.path.join(base, raw.strip())
            pairs.append((key, raw))
        cfg = _apply_pairs(cfg, pairs)
    return _apply_pairs(cfg, overrides).validate()


# system files -----------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt}


def _eval_number(text):
    """Evaluate numbers, ``pi``, ``e``, ``sqrt`` and ``+ - * / **``; nothing else."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and len(node.args) == 1:
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {text!r}") from exc


def load_system_file(path):
    """Trigonometric-polynomial system: ``period``, optional ``name`` and ``term`` lines.

    Each ``term = matrix.csv, frequency, cos|sin`` adds ``C cos(frequency t)``
    (or ``sin``) to ``H(t)``; matrix paths are relative to the system file.
    """
    base = os.path.dirname(os.path.abspath(path))
    period, name, terms = None, os.path.basename(path), []
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read system file {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "period":
            period = _eval_number(raw)
        elif key == "name":
            name = raw
        elif key == "term":
            parts = [s.strip() for s in raw.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"{path}:{n}: term needs matrix, frequency, cos|sin")
            C = read_csv(os.path.join(base, parts[0]))
            terms.append(ode.TrigTerm(C, _eval_number(parts[1]), parts[2]))
        else:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
    if period is None:
        raise ConfigError(f"{path}: period is missing")
    return ode.trig_system(terms, period, name)


def build_system(cfg):
    if cfg.system == "example1":
        return ode.example1(cfg.eps, cfg.delta)
    if cfg.system == "example2":
        return ode.example2(cfg.a, cfg.b)
    return load_system_file(cfg.system_file)


def _context(sysm):
    if sysm.dim % 2:
        raise ConfigError(f"system dimension {sysm.dim} is odd")
    ctx = SymplecticContext(sysm.dim // 2)
    sysm.validate(ctx)
    return ctx


def _basis(cfg, ctx, A=None):
    if A is None:
        A = read_csv(cfg.basis) if cfg.basis else np.random.default_rng(cfg.seed).standard_normal((ctx.dim, cfg.rank))
    A = as_mat(A, rows=ctx.dim, name="basis matrix")
    if cfg.rank > A.shape[1] or cfg.rank > ctx.n_half:
        raise ConfigError(f"rank {cfg.rank} exceeds the available columns or N={ctx.n_half}")
    basis, _ = isotropic_from(A[:, : cfg.rank], ctx)
    return basis


# output helpers ---------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(obj), indent=2) + "\n")


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _scale_tag(scale):
    return format(scale, "g")


def _map(cfg, fn, items):
    items = list(items)
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _guard(fn, *args):
    try:
        return fn(*args), None
    except SympertError as exc:
        return None, exc


# subcommands ------------------------------------------------------------------


def run_isotropic(cfg):
    """Isotropic basis of a CSV matrix (``basis``) or of a random ``2 n_half x rank`` one."""
    ctx = SymplecticContext(cfg.n_half)
    if cfg.basis:
        A = read_csv(cfg.basis)
        if A.shape[0] % 2:
            raise ConfigError("basis matrix needs an even number of rows")
        ctx = SymplecticContext(A.shape[0] // 2)
        cfg = replace(cfg, rank=min(cfg.rank, A.shape[1]))
    else:
        A = np.random.default_rng(cfg.seed).standard_normal((ctx.dim, cfg.rank))
    basis = _basis(cfg, ctx, A)
    os.makedirs(cfg.out, exist_ok=True)
    write_csv(os.path.join(cfg.out, "isotropic.csv"), basis.U)
    U = basis.U
    _write_json(
        os.path.join(cfg.out, "isotropic.json"),
        {
            "n_half": ctx.n_half,
            "k": basis.k,
            "seed": None if cfg.basis else cfg.seed,
            "orthonormality_defect": float(np.linalg.norm(U.T @ U - np.eye(basis.k), 2)),
            "isotropy_defect": float(np.linalg.norm(U.T @ ctx.J @ U, 2)),
        },
    )
    return EXIT_OK


def run_psi(cfg, sysm=None, basis=None, out=None):
    """``psi_<scale>.csv`` per scale and ``psi_summary.json``."""
    sysm = build_system(cfg) if sysm is None else sysm
    ctx = _context(sysm)
    basis = _basis(cfg, ctx) if basis is None else basis
    out = cfg.out if out is None else out
    grid = np.linspace(0.0, sysm.period, cfg.grid)

    def one(scale):
        return _guard(ode.psi_run, sysm, RankKPerturbation(basis, scale), grid, ctx, cfg.tol)

    results = _map(cfg, one, cfg.scales)
    os.makedirs(out, exist_ok=True)
    summary, failed = {}, False
    for scale, (res, err) in zip(cfg.scales, results):
        tag = _scale_tag(scale)
        if err is not None:
            failed = True
            summary[tag] = {"error": err.code, "message": str(err)}
            continue
        fname = f"psi_{tag}.csv"
        ode.write_psi_csv(os.path.join(out, fname), res.times, res.psi)
        summary[tag] = {
            "file": fname,
            "max_psi": res.max_psi,
            "bound": res.bound,
            "x_norm_max": res.x_norm_max,
            "within_bound": bool(res.max_psi <= res.bound),
        }
    _write_json(
        os.path.join(out, "psi_summary.json"),
        {"system": sysm.name, "rank": basis.k, "seed": cfg.seed, "tol": cfg.tol, "grid": cfg.grid, "basis": basis.U, "scales": summary},
    )
    return EXIT_NUMERIC if failed else EXIT_OK


def _table_scales(scales):
    return sorted(set(scales) | {0.0}, reverse=True)


def run_table(cfg, sysm=None, basis=None, out=None):
    """``table.csv`` with one stability row per scale (and 0) plus ``table.json``."""
    sysm = build_system(cfg) if sysm is None else sysm
    ctx = _context(sysm)
    basis = _basis(cfg, ctx) if basis is None else basis
    out = cfg.out if out is None else out
    scales = _table_scales(cfg.scales)
    label = f"{sysm.name}/rank{basis.k}"
    W, err = _guard(ode.monodromy, sysm, ctx, cfg.tol)
    mono_defect = None
    if err is None:
        # integration drift grows with tol; perturb the nearest symplectic matrix
        mono_defect = is_symplectic(W, ctx)[1]
        W = symplectic_projection(W, ctx)

    def one(scale):
        if err is not None:
            return None, err
        return _guard(lambda: stability.analyze(apply(RankKPerturbation(basis, scale), W), ctx, cfg.nmax))

    results = _map(cfg, one, scales)
    rows, reports, failed = [], {}, False
    for scale, (rep, e) in zip(scales, results):
        tag = _scale_tag(scale)
        if e is not None:
            failed = True
            rows.append([label, tag] + ["-"] * (len(stability.CSV_FIELDS) - 2))
            reports[tag] = {"error": e.code, "message": str(e)}
        else:
            rows.append(rep.csv_row(label, tag))
            reports[tag] = rep.to_dict()
    os.makedirs(out, exist_ok=True)
    _write_rows(os.path.join(out, "table.csv"), stability.CSV_FIELDS, rows)
    _write_json(
        os.path.join(out, "table.json"),
        {
            "system": sysm.name,
            "rank": basis.k,
            "seed": cfg.seed,
            "tol": cfg.tol,
            "nmax": cfg.nmax,
            "monodromy_defect": mono_defect,
            "basis": basis.U,
            "scales": reports,
        },
    )
    return EXIT_NUMERIC if failed else EXIT_OK


def parse_structure(text):
    """``"lam:size x count, ...; lam:..."`` into a list of Segre characteristics.

    Example: ``"2:2x1"`` is one 2x2 block at 2 (mirrored at 1/2) and
    ``"1:1x2"`` two 1x1 blocks at 1.
    """
    spec = []
    for entry in filter(None, (e.strip() for e in text.split(";"))):
        if ":" not in entry:
            raise ConfigError(f"structure entry {entry!r} needs lambda:sizes")
        lam_text, sizes_text = entry.split(":", 1)
        try:
            lam = complex(lam_text.replace(" ", ""))
            sizes = []
            for item in filter(None, (s.strip() for s in sizes_text.split(","))):
                n, l = item.lower().split("x")
                sizes.append((int(n), int(l)))
        except ValueError as exc:
            raise ConfigError(f"cannot parse structure entry {entry!r}") from exc
        counts = {}
        for n, l in sizes:
            counts[n] = counts.get(n, 0) + l
        spec.append(jordan.SegreCharacteristic(lam, sorted(counts.items(), reverse=True)))
    if not spec:
        raise ConfigError("empty Jordan structure")
    return spec


def run_jordan(cfg):
    """``jordan_report.json`` from :func:`jordan.check_thr` on a generated matrix."""
    spec = parse_structure(cfg.spec)
    ctx = SymplecticContext(jordan.required_half_dimension(spec))
    rng = np.random.default_rng([cfg.seed, 2**31 - 1]) if cfg.conjugate else None
    W = jordan.symplectic_with_structure(spec, ctx, rng)
    report = jordan.check_thr(W, cfg.lam, cfg.k, cfg.trials, ctx, seed=cfg.seed, workers=cfg.workers)
    os.makedirs(cfg.out, exist_ok=True)
    payload = report.to_dict()
    payload["structure"] = cfg.spec
    payload["k"] = cfg.k
    _write_json(os.path.join(cfg.out, "jordan_report.json"), payload)
    return EXIT_OK


# Reference random matrices for the two example systems; entry (4, 2) of the
# first one is the value consistent with its reference isotropic basis.
_A_EX1_STABLE = [
    [0.8147, 0.2785, 0.9572],
    [0.9058, 0.5469, 0.4854],
    [0.1270, 0.9575, 0.8003],
    [0.9134, 0.9649, 0.1419],
    [0.6324, 0.1576, 0.4218],
    [0.0975, 0.9706, 0.9157],
]
_A_EX1_UNSTABLE = [
    [0.7482, 0.8258, 0.9619],
    [0.4505, 0.5383, 0.0046],
    [0.0838, 0.9961, 0.7749],
    [0.2290, 0.0782, 0.8173],
    [0.9133, 0.4427, 0.8687],
    [0.1524, 0.1067, 0.0844],
]
_A_EX2_STABLE = [
    [0.5377, -0.4336, 0.7254],
    [1.8339, 0.3426, -0.0631],
    [-2.2588, 3.5784, 0.7147],
    [0.8622, 2.7694, -0.2050],
    [0.3188, -1.3499, -0.1241],
    [-1.3077, 3.0349, 1.4897],
]
_A_EX2_UNSTABLE = [
    [1.4090, 0.4889, 0.8884],
    [1.4172, 1.0347, -1.1471],
    [0.6715, 0.7269, -1.0689],
    [-1.2075, -0.3034, -0.8095],
    [0.7172, 0.2939, -2.9443],
    [1.6302, -0.7873, 1.4384],
]

REFERENCE_CASES = {
    "example1": [
        ("eps2_delta4", {"system": "example1", "eps": 2.0, "delta": 4.0}, _A_EX1_STABLE),
        ("eps15_delta4", {"system": "example1", "eps": 15.0, "delta": 4.0}, _A_EX1_UNSTABLE),
    ],
    "example2": [
        ("a2_b2", {"system": "example2", "a": 2.0, "b": 2.0}, _A_EX2_STABLE),
        ("a18.95_b2", {"system": "example2", "a": 18.95, "b": 2.0}, _A_EX2_UNSTABLE),
    ],
}


def run_example(cfg, which):
    """Both reference parameter sets of ``which``, ranks 2 and 3, Psi data and tables."""
    status = EXIT_OK
    for tag, params, A in REFERENCE_CASES[which]:
        case_cfg = replace(cfg, **params)
        sysm = build_system(case_cfg)
        ctx = _context(sysm)
        for rank in (2, 3):
            rcfg = replace(case_cfg, rank=rank)
            basis = _basis(rcfg, ctx, np.array(A))
            out = os.path.join(cfg.out, which, tag, f"rank{rank}")
            status = max(status, run_psi(rcfg, sysm, basis, out))
            status = max(status, run_table(rcfg, sysm, basis, out))
    return status


# entry point ------------------------------------------------------------------


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float, help="integrator rtol = atol")
    common.add_argument("--nmax", type=int, help="number of averaging steps for S(n)")
    common.add_argument("--rank", type=int)
    common.add_argument("--scales", help="comma-separated perturbation scales")
    common.add_argument("--workers", type=int)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="any other config key")

    parser = argparse.ArgumentParser(prog="sympert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("isotropic", parents=[common], help="isotropic basis of a matrix")
    sub.add_parser("psi", parents=[common], help="Psi(t) curves of the solution comparison")
    sub.add_parser("table", parents=[common], help="strong-stability table")
    jp = sub.add_parser("jordan", parents=[common], help="Jordan structure predictions under rank-k perturbations")
    jp.add_argument("--spec", help='Jordan structure, e.g. "2:2x1" or "1:1x2"')
    jp.add_argument("--lambda", dest="lam", help="eigenvalue to examine")
    jp.add_argument("--k", type=int)
    jp.add_argument("--trials", type=int)
    sub.add_parser("example1", parents=[common], help="reference parameter sets of the first example")
    sub.add_parser("example2", parents=[common], help="reference parameter sets of the second example")
    return parser


def _overrides(args):
    pairs = []
    for key in ("out", "seed", "tol", "nmax", "rank", "scales", "workers", "spec", "lam", "k", "trials"):
        value = getattr(args, key, None)
        if value is not None:
            pairs.append((key, str(value)))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append(tuple(item.split("=", 1)))
    return pairs


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "isotropic":
            return run_isotropic(cfg)
        if args.command == "psi":
            return run_psi(cfg)
        if args.command == "table":
            return run_table(cfg)
        if args.command == "jordan":
            return run_jordan(cfg)
        return run_example(cfg, args.command)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SympertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if exc.code in NUMERIC_CODES else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
