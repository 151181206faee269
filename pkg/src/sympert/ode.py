"""Linear Hamiltonian systems ``J X' = H(t) X`` with periodic coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .matcore import SympertError, as_mat, is_symplectic
from .perturb import RankKPerturbation, perturbator, perturbator_inverse

__all__ = [
    "PeriodicHamiltonian",
    "Trajectory",
    "PsiResult",
    "TrigTerm",
    "integrate_matrizant",
    "monodromy",
    "perturbed_system",
    "psi",
    "psi_run",
    "example1",
    "example2",
    "trig_system",
    "write_trajectory_csv",
    "write_psi_csv",
    "DEFAULT_TOL",
    "RK4_STEPS_PER_PERIOD",
]

DEFAULT_TOL = 1e-12
RK4_STEPS_PER_PERIOD = 2**14


@dataclass(frozen=True)
class PeriodicHamiltonian:
    dim: int
    period: float
    evaluator: Callable[[float], np.ndarray]
    name: str = ""

    def __call__(self, t):
        return self.evaluator(t)

    def validate(self, ctx, samples=32):
        """Check symmetry and periodicity of H at ``samples`` points per period."""
        if self.dim != ctx.dim:
            raise SympertError("dimension", f"system has dim {self.dim}, context {ctx.dim}")
        if not self.period > 0:
            raise SympertError("dimension", "period must be positive")
        for t in np.linspace(0.0, self.period, samples, endpoint=False):
            H = as_mat(self(t), self.dim, self.dim, "H(t)")
            scale = max(1.0, np.linalg.norm(H, 2))
            if np.linalg.norm(H - H.T, 2) > ctx.tol_struct * scale:
                raise SympertError("not_symmetric", f"H({t:g}) is not symmetric")
            if np.linalg.norm(self(t + self.period) - H, 2) > ctx.tol_struct * scale:
                raise SympertError("structure", f"H is not periodic at t={t:g}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), 2N, 2N)
    integrator_tol: float
    drift: float | None  # max ||X^T J X - J|| over the samples, None if X0 not symplectic
    nfev: int = 0

    def at(self, i):
        return self.states[i]

    @property
    def final(self):
        return self.states[-1]


def _rk4(f, X0, times, h_max):
    """Classical RK4; every requested time is hit exactly."""
    out = [X0.copy()]
    X = X0.copy()
    nfev = 0
    for t0, t1 in zip(times[:-1], times[1:]):
        n = max(1, math.ceil((t1 - t0) / h_max - 1e-9))
        h = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = f(t, X)
            k2 = f(t + h / 2, X + h / 2 * k1)
            k3 = f(t + h / 2, X + h / 2 * k2)
            k4 = f(t + h, X + h * k3)
            X = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            nfev += 4
        if not np.all(np.isfinite(X)):
            raise SympertError("blowup", f"non-finite state near t={t1:g}")
        out.append(X.copy())
    return np.array(out), nfev


def integrate_matrizant(sys, X0, t_end, ctx, t_eval=None, tol=DEFAULT_TOL, method="RK45"):
    """Integrate ``X' = J^{-1} H(t) X`` from ``X(0) = X0`` up to ``t_end``.

    ``method="RK45"`` is the adaptive Dormand-Prince 5(4) pair with
    ``rtol = atol = tol``; ``method="RK4"`` is classical RK4 with
    ``RK4_STEPS_PER_PERIOD`` steps per period (``tol`` is then ignored).
    ``t_eval`` defaults to 400 equispaced samples on ``[0, t_end]``.
    """
    X0 = as_mat(X0, ctx.dim, ctx.dim, "X0")
    if not t_end > 0:
        raise SympertError("dimension", "t_end must be positive")
    times = np.linspace(0.0, t_end, 400) if t_eval is None else np.asarray(t_eval, dtype=float)
    if times[0] != 0.0:
        times = np.concatenate([[0.0], times])
        drop_first = True
    else:
        drop_first = False
    if np.any(np.diff(times) < 0) or times[-1] > t_end * (1 + 1e-12):
        raise SympertError("dimension", "t_eval must be ascending within [0, t_end]")
    n2 = ctx.dim
    Jinv = ctx.J_inv

    if method == "RK4":
        with np.errstate(over="ignore", invalid="ignore"):
            states, nfev = _rk4(lambda t, X: Jinv @ sys(t) @ X, X0, times, sys.period / RK4_STEPS_PER_PERIOD)
    elif method == "RK45":
        def rhs(t, y):
            return (Jinv @ (sys(t) @ y.reshape(n2, n2))).ravel()

        sol = solve_ivp(rhs, (0.0, t_end), X0.ravel(), method="RK45", t_eval=times, rtol=tol, atol=tol)
        if sol.status != 0:
            raise SympertError("stiff", sol.message)
        if not np.all(np.isfinite(sol.y)):
            raise SympertError("blowup", "non-finite state")
        states = sol.y.T.reshape(-1, n2, n2)
        nfev = sol.nfev
    else:
        raise ValueError(f"unknown method {method!r}")

    if drop_first:
        times, states = times[1:], states[1:]
    drift = None
    if is_symplectic(X0, ctx)[0]:
        drift = max(float(np.linalg.norm(X.T @ ctx.J @ X - ctx.J, 2)) for X in states)
    return Trajectory(times, states, tol, drift, nfev)


def monodromy(sys, ctx, tol=DEFAULT_TOL, method="RK45"):
    """``X(P)`` of the matrizant started from the identity."""
    traj = integrate_matrizant(sys, np.eye(ctx.dim), sys.period, ctx, [sys.period], tol, method)
    return traj.final


def perturbed_system(sys, p: RankKPerturbation):
    """Coefficient ``(I - UU^T J)^T H(t) (I - UU^T J)`` and initial value ``I + UU^T J``."""
    if sys.dim != p.ctx.dim:
        raise SympertError("dimension", "system and perturbation dimensions differ")
    if p.scale == 0:
        return sys, np.eye(sys.dim)
    L = perturbator_inverse(p)

    def coefficient(t):
        return L.T @ sys(t) @ L

    return PeriodicHamiltonian(sys.dim, sys.period, coefficient, f"{sys.name}~"), perturbator(p)


@dataclass(frozen=True)
class PsiResult:
    times: np.ndarray
    psi: np.ndarray
    x_norm_max: float  # max_t ||X(t)|| of the unperturbed matrizant
    tol: float

    @property
    def max_psi(self):
        return float(self.psi.max()) if len(self.psi) else 0.0

    @property
    def bound(self):
        """Tolerance-relative acceptance bound ``1e3 * tol * max ||X(t)||``."""
        return 1e3 * self.tol * self.x_norm_max


def psi_run(sys, p, grid, ctx, tol=DEFAULT_TOL, method="RK45"):
    """Compare ``X~(t)`` of the perturbed system with ``(I + UU^T J) X(t)`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if grid.min() < 0 or grid.max() > sys.period * (1 + 1e-12):
        raise SympertError("dimension", "grid must lie in [0, P]")
    X = integrate_matrizant(sys, np.eye(ctx.dim), grid[-1], ctx, grid, tol, method).states
    xnorm = float(max(np.linalg.norm(x, 2) for x in X))
    if p.scale == 0:
        return PsiResult(grid, np.zeros(len(grid)), xnorm, tol)
    psys, X0 = perturbed_system(sys, p)
    Xt = integrate_matrizant(psys, X0, grid[-1], ctx, grid, tol, method).states
    X1 = np.einsum("ij,tjk->tik", perturbator(p), X)
    values = np.array([np.linalg.norm(a - b, 2) for a, b in zip(Xt, X1)])
    return PsiResult(grid, values, xnorm, tol)


def psi(sys, p, grid, ctx, tol=DEFAULT_TOL, method="RK45"):
    """``Psi(t_i) = ||X~(t_i) - (I + UU^T J) X(t_i)||_2`` on ``grid``."""
    return psi_run(sys, p, grid, ctx, tol, method).psi


def _lift(P):
    n = P.shape[0]
    H = np.eye(2 * n)
    H[:n, :n] = P
    return H


def example1(eps, delta, c=0.0, g=None, gamma=math.sqrt(7.0), p=(4.0, 3.0, 2.0), q=(1.0, 1.0, 1.0)):
    """Three coupled parametric oscillators, ``H = diag(P(t), I_3)``, period ``2 pi / gamma``.

    ``g`` defaults to ``eps``. Pair with ``J = [[0, -I], [I, 0]]``.
    """
    g = eps if g is None else g
    p1, p2, p3 = p
    q1, q2, q3 = q

    def P(t):
        c13 = (delta * math.cos(2 * gamma * t) + c * math.sin(2 * gamma * t)) / math.sqrt(q1 * q3)
        c23 = g * math.sin(5 * gamma * t) / math.sqrt(q2 * q3)
        return np.array(
            [
                [(p1 + eps * math.cos(gamma * t)) / q1, 0.0, c13],
                [0.0, p2 / q2, c23],
                [c13, c23, p3 / q3],
            ]
        )

    return PeriodicHamiltonian(6, 2 * math.pi / gamma, lambda t: _lift(P(t)), f"example1(eps={eps:g},delta={delta:g})")


def example2(a, b):
    """Second three-oscillator system, ``H = diag(P(t), I_3)``, period ``2 pi / 7``."""

    def P(t):
        c14 = b * math.cos(14 * t)
        s35 = a * math.sin(35 * t)
        return np.array(
            [
                [4 + a * math.cos(7 * t), 0.0, c14],
                [0.0, a + b * math.sin(14 * t), s35],
                [c14, s35, 3.0],
            ]
        )

    return PeriodicHamiltonian(6, 2 * math.pi / 7, lambda t: _lift(P(t)), f"example2(a={a:g},b={b:g})")


@dataclass(frozen=True)
class TrigTerm:
    coefficient: np.ndarray
    frequency: float
    kind: str  # "cos" or "sin"

    def __post_init__(self):
        if self.kind not in ("cos", "sin"):
            raise SympertError("structure", f"term kind must be cos or sin, got {self.kind!r}")


def trig_system(terms, period, name="file"):
    """``H(t) = sum_i C_i cos(w_i t)`` (or ``sin``) from a list of :class:`TrigTerm`."""
    if not terms:
        raise SympertError("structure", "trigonometric system needs at least one term")
    dim = terms[0].coefficient.shape[0]
    for term in terms:
        if term.coefficient.shape != (dim, dim):
            raise SympertError("dimension", "all coefficient matrices must share one shape")

    def H(t):
        out = np.zeros((dim, dim))
        for term in terms:
            f = math.cos if term.kind == "cos" else math.sin
            out += f(term.frequency * t) * term.coefficient
        return out

    return PeriodicHamiltonian(dim, float(period), H, name)


def write_trajectory_csv(path, traj):
    n2 = traj.states.shape[1]
    header = ["t"] + [f"x_{i}_{j}" for i in range(n2) for j in range(n2)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for t, X in zip(traj.times, traj.states):
            fh.write(",".join(repr(float(v)) for v in [t, *X.ravel()]) + "\n")


def write_psi_csv(path, times, values):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,psi\n")
        for t, v in zip(times, values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")
