"""Rank-k structured perturbations ``(I + U U^T J) W`` of symplectic matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .isotropic import IsotropicBasis
from .matcore import SympertError, is_symplectic, numerical_rank

__all__ = [
    "RankKPerturbation",
    "low_rank_term",
    "perturbator",
    "perturbator_inverse",
    "perturbator_kernel_dim",
    "apply",
    "factor_rank_one",
    "product_of_factors",
    "perturbation_term",
    "perturbation_term_expanded",
]


@dataclass(frozen=True)
class RankKPerturbation:
    basis: IsotropicBasis
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale >= 0 and np.isfinite(self.scale)):
            raise SympertError("dimension", "scale must be finite and non-negative")

    @property
    def ctx(self):
        return self.basis.ctx

    @property
    def k(self):
        return self.basis.k

    @property
    def U(self):
        return self.scale * self.basis.U

    def with_scale(self, scale):
        return RankKPerturbation(self.basis, scale)


def low_rank_term(U, J):
    """``U U^T J``; nilpotent of index two whenever ``U^T J U = 0``."""
    return U @ (U.T @ J)


def perturbator(p):
    """``I + U U^T J`` for the scaled basis; symplectic by isotropy."""
    return np.eye(p.ctx.dim) + low_rank_term(p.U, p.ctx.J)


def perturbator_inverse(p):
    return np.eye(p.ctx.dim) - low_rank_term(p.U, p.ctx.J)


def perturbator_kernel_dim(p):
    """``dim ker(I~ - I)``: ``2N - k`` for a nonzero scale, ``2N`` at scale 0."""
    if p.scale == 0:
        return p.ctx.dim
    M = low_rank_term(p.U, p.ctx.J)
    return p.ctx.dim - numerical_rank(M, p.ctx.tol_rank)


def apply(p, W):
    ok, defect = is_symplectic(W, p.ctx)
    if not ok:
        raise SympertError("not_symplectic", f"||W^T J W - J|| = {defect:.3e}")
    return perturbator(p) @ np.asarray(W, dtype=float)


def factor_rank_one(p):
    """Split into ``k`` rank-one perturbations, one per column of the basis."""
    return [RankKPerturbation(p.basis.columns([i]), p.scale) for i in range(p.k)]


def product_of_factors(factors, order=None):
    """Ordered product ``prod_j (I + u_j u_j^T J)`` of rank-one factors."""
    idx = range(len(factors)) if order is None else order
    out = np.eye(factors[0].ctx.dim)
    for i in idx:
        out = out @ perturbator(factors[i])
    return out


def _check_symmetric(H, ctx):
    H = ctx.check_square(H, "H")
    if np.linalg.norm(H - H.T, 2) > ctx.tol_struct * max(1.0, np.linalg.norm(H, 2)):
        raise SympertError("not_symmetric", "H must be symmetric")
    return H


def perturbation_term(p, H):
    """``E = (I - UU^T J)^T H (I - UU^T J) - H`` for symmetric ``H``."""
    H = _check_symmetric(H, p.ctx)
    L = perturbator_inverse(p)
    return L.T @ H @ L - H


def perturbation_term_expanded(p, H):
    """Three-term expansion ``(JUU^T H)^T + JUU^T H + (UU^T J)^T H (UU^T J)``.

    Agrees with :func:`perturbation_term` because ``(UU^T J)^T = -J UU^T``.
    """
    H = _check_symmetric(H, p.ctx)
    J, U = p.ctx.J, p.U
    JUUH = J @ U @ (U.T @ H)
    M = low_rank_term(U, J)
    return JUUH.T + JUUH + M.T @ H @ M
