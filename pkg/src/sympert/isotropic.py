"""Orthonormal isotropic bases built from orthogonal symplectic reflections.

The reduction used here is a symplectic QR: for each column ``j`` of the
input, a pair of identical Householder reflectors clears the lower half below
row ``N+j``, a Givens rotation in the ``(j, N+j)`` plane clears entry
``N+j``, and a second reflector pair clears the upper half below row ``j``.
The accumulated orthogonal symplectic factor ``Q`` has isotropic leading
columns, which is what :func:`isotropic_from` returns.

Indices are zero-based throughout: ``j`` runs over ``0 .. N-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .matcore import SympertError, SymplecticContext, as_mat, numerical_rank

__all__ = [
    "IsotropicBasis",
    "ElementarySymplecticOrthogonal",
    "householder_pair",
    "givens_symplectic",
    "symplectic_qr",
    "isotropic_from",
    "extend_to_lagrangian",
    "krylov_basis",
    "krylov_isotropy_check",
    "random_isotropic",
    "random_orthogonal_symplectic",
    "random_skew_hamiltonian",
]

_TINY = 1e-300


@dataclass(frozen=True)
class IsotropicBasis:
    """A ``2N x k`` matrix with orthonormal, mutually J-orthogonal columns."""

    U: np.ndarray
    ctx: SymplecticContext

    def __post_init__(self):
        U = as_mat(self.U, rows=self.ctx.dim, name="U")
        k = U.shape[1]
        if k > self.ctx.n_half:
            raise SympertError("structure", f"isotropic dimension {k} exceeds N={self.ctx.n_half}")
        orth = np.linalg.norm(U.T @ U - np.eye(k), 2)
        iso = np.linalg.norm(U.T @ self.ctx.J @ U, 2)
        if orth > self.ctx.tol_struct or iso > self.ctx.tol_struct:
            raise SympertError(
                "structure", f"not an orthonormal isotropic basis (orth {orth:.2e}, iso {iso:.2e})"
            )
        U = U.copy()
        U.flags.writeable = False
        object.__setattr__(self, "U", U)

    @property
    def k(self):
        return self.U.shape[1]

    @property
    def is_lagrangian(self):
        return self.k == self.ctx.n_half

    def columns(self, idx):
        return IsotropicBasis(self.U[:, list(idx)], self.ctx)


@dataclass(frozen=True)
class ElementarySymplecticOrthogonal:
    """Householder pair ``H_j (+) H_j`` or Givens rotation ``G_{j,N+j}``.

    ``matrix()`` realizes the ``2N x 2N`` transform ``E``; ``apply(x)``
    performs the reduction update ``E^T x`` (identical to ``E x`` for the
    symmetric reflector pair).
    """

    kind: str
    j: int
    n_half: int
    v: np.ndarray | None = None
    beta: float = 0.0
    theta: float = 0.0

    def matrix(self):
        N = self.n_half
        if self.kind == "householder_pair":
            H = np.eye(N) - self.beta * np.outer(self.v, self.v)
            return sla.block_diag(H, H)
        c, s = np.cos(self.theta), np.sin(self.theta)
        G = np.eye(2 * N)
        j = self.j
        G[j, j] = G[N + j, N + j] = c
        G[j, N + j] = s
        G[N + j, j] = -s
        return G

    def apply(self, x):
        x = np.array(x, dtype=float)
        N, j = self.n_half, self.j
        if self.kind == "householder_pair":
            for half in (slice(0, N), slice(N, 2 * N)):
                x[half] -= self.beta * np.multiply.outer(self.v, self.v @ x[half])
            return x
        c, s = np.cos(self.theta), np.sin(self.theta)
        top, bot = x[j].copy(), x[N + j].copy()
        x[j] = c * top - s * bot
        x[N + j] = s * top + c * bot
        return x


def _check_index(j, ctx):
    if not 0 <= j < ctx.n_half:
        raise SympertError("dimension", f"index j={j} outside 0..{ctx.n_half - 1}")


def _reflector(y):
    """(v, beta) with (I - beta v v^T) y = alpha e_0 and alpha = -sign(y_0)||y||."""
    v = np.array(y, dtype=float)
    if v.size <= 1 or not np.any(v[1:]):
        return np.zeros_like(v), 0.0
    alpha = -np.copysign(np.linalg.norm(v), v[0])
    v[0] -= alpha
    return v, 2.0 / (v @ v)


def householder_pair(j, x, ctx, half="upper"):
    """Reflector pair acting on rows ``j..N-1`` of both halves.

    With ``half="upper"`` the reflector clears entries ``j+1..N-1`` of the
    first half of ``x``; ``half="lower"`` clears entries ``N+j+1..2N-1``.
    """
    _check_index(j, ctx)
    x = as_mat(x, rows=ctx.dim, cols=1, name="x").ravel()
    N = ctx.n_half
    if half == "upper":
        seg = x[j:N]
    elif half == "lower":
        seg = x[N + j:]
    else:
        raise ValueError("half must be 'upper' or 'lower'")
    w, beta = _reflector(seg)
    v = np.zeros(N)
    v[j:] = w
    return ElementarySymplecticOrthogonal("householder_pair", j, N, v=v, beta=beta)


def givens_symplectic(j, x, ctx):
    """Rotation in the ``(j, N+j)`` plane whose update clears entry ``N+j``.

    ``theta`` is taken in ``[-pi/2, pi/2)``.
    """
    _check_index(j, ctx)
    x = as_mat(x, rows=ctx.dim, cols=1, name="x").ravel()
    N = ctx.n_half
    a, b = x[j], x[N + j]
    if abs(b) < _TINY:
        theta = 0.0
    elif abs(a) < _TINY:
        theta = -np.pi / 2
    else:
        # sin(theta) a + cos(theta) b = 0
        theta = float(np.arctan(-b / a))
    return ElementarySymplecticOrthogonal("givens", j, N, theta=theta)


def symplectic_qr(A, ctx):
    """Reduce ``A`` (2N x k, k <= N) to ``A = Q R`` with ``Q`` orthogonal symplectic.

    Returns ``(Q, R)``. Column ``j`` of ``R`` vanishes in rows ``j+1..N-1``
    and ``N+j..2N-1``.
    """
    A = as_mat(A, rows=ctx.dim, name="A")
    N, k = ctx.n_half, A.shape[1]
    if k > N:
        raise SympertError("dimension", f"k={k} columns exceeds N={N}")
    R = A.copy()
    Q = np.eye(ctx.dim)
    for j in range(k):
        steps = []
        e = householder_pair(j, R[:, j], ctx, half="lower")
        steps.append(e)
        x = e.apply(R[:, j])
        e = givens_symplectic(j, x, ctx)
        steps.append(e)
        x = e.apply(x)
        steps.append(householder_pair(j, x, ctx, half="upper"))
        for e in steps:
            R = e.apply(R)
            Q = Q @ e.matrix()
        R[j + 1:N, j] = 0.0
        R[N + j:, j] = 0.0
    return Q, R


def isotropic_from(A, ctx):
    """Orthonormal isotropic basis from the leading columns of ``symplectic_qr``.

    Returns ``(basis, Q)``. Raises ``deficient_input`` when ``A`` does not
    have full column rank.
    """
    A = as_mat(A, rows=ctx.dim, name="A")
    if A.shape[1] > ctx.n_half:
        raise SympertError("dimension", f"k={A.shape[1]} columns exceeds N={ctx.n_half}")
    if numerical_rank(A, ctx.tol_rank) < A.shape[1]:
        raise SympertError("deficient_input", "A is rank deficient")
    Q, _ = symplectic_qr(A, ctx)
    return IsotropicBasis(Q[:, : A.shape[1]], ctx), Q


def extend_to_lagrangian(B):
    """Append J-orthogonal directions to ``B`` until it has ``N`` columns.

    The original columns are kept verbatim, so the span of ``B`` is contained
    in the result.
    """
    ctx = B.ctx
    U = B.U.copy()
    while U.shape[1] < ctx.n_half:
        # span{U, JU} is J-invariant, so is its orthogonal complement
        C = sla.null_space(np.hstack([U, ctx.J @ U]).T)
        U = np.hstack([U, C[:, :1]])
    return IsotropicBasis(U, ctx)


def krylov_basis(S, u, j, tol=1e-12):
    """Orthonormal basis of ``span{u, Su, ..., S^{j-1}u}`` (Arnoldi, two-pass MGS)."""
    u = np.asarray(u, dtype=float).ravel()
    nu = np.linalg.norm(u)
    if nu == 0:
        raise SympertError("dimension", "starting vector is zero")
    K = [u / nu]
    for _ in range(j - 1):
        w = S @ K[-1]
        scale = np.linalg.norm(w)
        for _ in range(2):
            for q in K:
                w = w - (q @ w) * q
        nw = np.linalg.norm(w)
        if nw <= tol * max(scale, 1.0):
            break
        K.append(w / nw)
    return np.column_stack(K)


def krylov_isotropy_check(S, u, j, ctx):
    """True when the order-``j`` Krylov space of skew-Hamiltonian ``S`` is isotropic."""
    S = ctx.check_square(S, "S")
    JS = ctx.J @ S
    if np.linalg.norm(JS + JS.T, 2) > ctx.tol_struct * max(1.0, np.linalg.norm(S, 2)):
        raise SympertError("structure", "S is not skew-Hamiltonian")
    K = krylov_basis(S, u, j)
    return bool(np.linalg.norm(K.T @ ctx.J @ K, 2) <= ctx.tol_struct)


def random_isotropic(ctx, k, rng):
    basis, _ = isotropic_from(rng.standard_normal((ctx.dim, k)), ctx)
    return basis


def random_orthogonal_symplectic(ctx, rng):
    _, Q = isotropic_from(rng.standard_normal((ctx.dim, ctx.n_half)), ctx)
    return Q


def random_skew_hamiltonian(ctx, rng):
    K = rng.standard_normal((ctx.dim, ctx.dim))
    return ctx.J_inv @ (K - K.T)
