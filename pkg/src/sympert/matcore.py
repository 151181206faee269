"""Dense matrix helpers, the symplectic form and structured-matrix predicates.

Matrices are plain ``numpy.ndarray`` objects. Everything structured is
measured relative to a :class:`SymplecticContext`, which carries the skew form
``J`` and the tolerances used by the rest of the package.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "SympertError",
    "SymplecticContext",
    "ComplexSpectrum",
    "as_mat",
    "block_j",
    "is_symplectic",
    "is_hamiltonian",
    "symplectic_projection",
    "eig",
    "numerical_rank",
    "solve",
    "cayley_plus",
    "cayley_minus",
    "inverse_cayley_plus",
    "inverse_cayley_minus",
    "read_csv",
    "write_csv",
]

COND_WARN = 1e12


class SympertError(Exception):
    """Error raised by the library; ``code`` names the failure kind.

    Codes in use: ``dimension``, ``singular_cayley``, ``deficient_input``,
    ``structure``, ``not_symplectic``, ``not_symmetric``, ``stiff``,
    ``blowup``, ``eig_failed``, ``structure_unrealizable``.
    """

    def __init__(self, code, message="", partial=None):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.partial = partial


def as_mat(a, rows=None, cols=None, name="matrix"):
    """Return ``a`` as a finite 2-D float array, checking its shape."""
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise SympertError("dimension", f"{name} must be 2-D, got ndim={m.ndim}")
    if rows is not None and m.shape[0] != rows:
        raise SympertError("dimension", f"{name} has {m.shape[0]} rows, expected {rows}")
    if cols is not None and m.shape[1] != cols:
        raise SympertError("dimension", f"{name} has {m.shape[1]} cols, expected {cols}")
    if not np.all(np.isfinite(m)):
        raise SympertError("dimension", f"{name} has non-finite entries")
    return m


def block_j(n_half, sign=-1):
    """Block skew form ``[[0, sign*I], [-sign*I, 0]]``.

    ``sign=-1`` gives ``[[0, -I], [I, 0]]`` (the default convention);
    ``sign=+1`` gives ``[[0, I], [-I, 0]]``.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    eye = np.eye(n_half)
    zero = np.zeros((n_half, n_half))
    return np.block([[zero, sign * eye], [-sign * eye, zero]])


@dataclass(frozen=True)
class SymplecticContext:
    """Dimension, skew form and tolerances shared by structured checks."""

    n_half: int
    J: np.ndarray = field(default=None, repr=False)
    tol_struct: float = 1e-10
    tol_circle: float = 1e-8
    tol_rank: float = 1e-10

    def __post_init__(self):
        if self.n_half < 1:
            raise SympertError("dimension", "n_half must be positive")
        J = block_j(self.n_half) if self.J is None else as_mat(self.J, name="J")
        n2 = 2 * self.n_half
        if J.shape != (n2, n2):
            raise SympertError("dimension", f"J must be {n2}x{n2}")
        if not np.array_equal(J.T, -J):
            raise SympertError("structure", "J must be exactly skew-symmetric")
        if np.linalg.norm(J @ J + np.eye(n2), 2) > self.tol_struct:
            raise SympertError("structure", "J @ J must equal -I")
        J = J.copy()
        J.flags.writeable = False
        object.__setattr__(self, "J", J)

    @classmethod
    def standard(cls, n_half, sign=-1, **tols):
        return cls(n_half, block_j(n_half, sign), **tols)

    @property
    def dim(self):
        return 2 * self.n_half

    @property
    def J_inv(self):
        # J^2 = -I for every admissible J
        return -self.J

    def check_square(self, a, name="matrix"):
        return as_mat(a, self.dim, self.dim, name)


def is_symplectic(W, ctx):
    """Return ``(ok, defect)`` with ``defect = ||W^T J W - J||_2``."""
    W = ctx.check_square(W, "W")
    defect = float(np.linalg.norm(W.T @ ctx.J @ W - ctx.J, 2))
    return defect <= ctx.tol_struct, defect


def is_hamiltonian(A, ctx):
    """Return ``(ok, defect)`` with ``defect = ||JA - (JA)^T||_2``."""
    A = ctx.check_square(A, "A")
    JA = ctx.J @ A
    defect = float(np.linalg.norm(JA - JA.T, 2))
    return defect <= ctx.tol_struct * max(1.0, np.linalg.norm(JA, 2)), defect


def symplectic_projection(W, ctx, max_defect=1e-3):
    """Nearby exactly symplectic matrix ``W M^{-1/2}`` with ``M = J^{-1} W^T J W``.

    ``M`` is self-adjoint for the form ``J``, hence so is ``M^{1/2}``, which
    makes the product symplectic; the correction is of the order of the
    defect. Returns ``W`` unchanged when ``||M - I||`` exceeds ``max_defect``.
    """
    W = np.asarray(W, dtype=float)
    M = ctx.J_inv @ W.T @ ctx.J @ W
    E = M - np.eye(ctx.dim)
    err = np.linalg.norm(E, 2)
    if err == 0.0 or not err <= max_defect:
        return W
    R = sla.sqrtm(M)
    R = R.real if np.iscomplexobj(R) else R
    return sla.solve(R.T, W.T).T


@dataclass(frozen=True)
class ComplexSpectrum:
    """Eigenvalues, unit eigenvectors (columns) and per-pair residuals."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def max_residual(self):
        return float(self.residuals.max()) if len(self.residuals) else 0.0


def _spectral_order(lam):
    # round so that conjugate-symmetric ties sort the same way every time
    return np.lexsort((np.round(np.angle(lam), 12), np.round(np.abs(lam), 12)))


def eig(A):
    """Full eigendecomposition sorted by modulus, then argument."""
    A = as_mat(A, name="A")
    if A.shape[0] != A.shape[1]:
        raise SympertError("dimension", "eig needs a square matrix")
    try:
        lam, X = sla.eig(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SympertError("eig_failed", str(exc)) from exc
    X = X / np.linalg.norm(X, axis=0)
    order = _spectral_order(lam)
    lam, X = lam[order], X[:, order]
    res = np.linalg.norm(A @ X - X * lam, axis=0)
    return ComplexSpectrum(lam, X, res)


def numerical_rank(A, tol_rank=1e-10):
    """Count singular values above ``tol_rank`` times the largest one."""
    A = np.asarray(A)
    if A.size == 0:
        raise SympertError("dimension", "numerical_rank needs a nonempty matrix")
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol_rank * s[0]))


def solve(A, B):
    """LU solve ``A X = B`` warning when ``A`` is badly conditioned."""
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_WARN:
        warnings.warn(f"ill-conditioned solve (cond ~ {cond:.3g})", RuntimeWarning, stacklevel=2)
    return sla.solve(A, B)


def _forbid_eigenvalue(W, point, ctx):
    lam = np.linalg.eigvals(W)
    if np.min(np.abs(lam - point)) <= ctx.tol_circle:
        raise SympertError("singular_cayley", f"{point:+g} is an eigenvalue")


def cayley_plus(W, ctx):
    """``(I - W)^{-1} (I + W)``; symplectic in, Hamiltonian out."""
    W = ctx.check_square(W, "W")
    _forbid_eigenvalue(W, 1.0, ctx)
    eye = np.eye(ctx.dim)
    return solve(eye - W, eye + W)


def cayley_minus(W, ctx):
    """``(I + W)^{-1} (I - W)``; requires -1 outside the spectrum."""
    W = ctx.check_square(W, "W")
    _forbid_eigenvalue(W, -1.0, ctx)
    eye = np.eye(ctx.dim)
    return solve(eye + W, eye - W)


def inverse_cayley_plus(A, ctx):
    """Recover ``W = (A - I)(A + I)^{-1}`` from ``A = cayley_plus(W)``."""
    A = ctx.check_square(A, "A")
    eye = np.eye(ctx.dim)
    # X (A + I) = (A - I)  <=>  (A + I)^T X^T = (A - I)^T
    return solve((A + eye).T, (A - eye).T).T


def inverse_cayley_minus(B, ctx):
    """Recover ``W = (I - B)(B + I)^{-1}`` from ``B = cayley_minus(W)``."""
    B = ctx.check_square(B, "B")
    eye = np.eye(ctx.dim)
    return solve((B + eye).T, (eye - B).T).T


def write_csv(path, A):
    """Write a matrix as ``rows,cols`` header followed by row-major data lines."""
    A = as_mat(A)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{A.shape[0]},{A.shape[1]}\n")
        for row in A:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise SympertError("dimension", f"{path}: empty matrix file")
    try:
        rows, cols = (int(v) for v in lines[0].split(","))
        data = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    except ValueError as exc:
        raise SympertError("dimension", f"{path}: {exc}") from exc
    if len(data) != rows or any(len(r) != cols for r in data):
        raise SympertError("dimension", f"{path}: header says {rows}x{cols}")
    return as_mat(np.array(data).reshape(rows, cols))
