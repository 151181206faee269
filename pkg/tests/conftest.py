import numpy as np
import pytest
import scipy.linalg as sla

from sympert.matcore import SymplecticContext


def random_symplectic(ctx, rng, scale=0.5, shift=1.0):
    """``shift * expm(J^{-1} S)`` for a random symmetric ``S`` of norm about ``scale``."""
    S = rng.standard_normal((ctx.dim, ctx.dim))
    S = 0.5 * (S + S.T)
    S *= scale / np.linalg.norm(S, 2)
    return shift * sla.expm(ctx.J_inv @ S)


def rotation(ctx, j, theta):
    """Rotation by ``theta`` in the ``(q_j, p_j)`` plane."""
    W = np.eye(ctx.dim)
    c, s = np.cos(theta), np.sin(theta)
    N = ctx.n_half
    W[j, j] = W[N + j, N + j] = c
    W[j, N + j] = -s
    W[N + j, j] = s
    return W


@pytest.fixture
def ctx3():
    return SymplecticContext(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def acceptance(request):
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
