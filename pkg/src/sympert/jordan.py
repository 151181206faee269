"""Numerical Jordan structure, structured test matrices and rank-k predictions.

Segre characteristics are read off the ranks of ``(A - lambda I)^j``. The
generator builds symplectic matrices with a prescribed Jordan form from
``diag(B, B^{-T})`` blocks and, for single even blocks at ``+-1``, from
``+-expm(K)`` with a nilpotent Hamiltonian ``K``. :func:`check_thr` compares
generic rank-k perturbations ``(I + U U^T J) W`` with the predicted
structure at one eigenvalue.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .isotropic import isotropic_from, random_orthogonal_symplectic
from .matcore import SympertError, block_j, is_symplectic
from .perturb import low_rank_term

__all__ = [
    "SegreCharacteristic",
    "ThrReport",
    "segre_at",
    "jordan_block",
    "symplectic_with_structure",
    "required_half_dimension",
    "predict",
    "perturbed_trial",
    "check_thr",
    "eigen_clusters",
    "total_multiplicity",
]

SEGRE_TOL = 1e-10
CLUSTER_RADIUS = 1e-3
BORDERLINE_FACTOR = 10.0


@dataclass(frozen=True)
class SegreCharacteristic:
    """Jordan block sizes at ``lam`` as descending ``(size, count)`` pairs."""

    lam: complex
    sizes: tuple = ()
    borderline: bool = False

    def __post_init__(self):
        sizes = tuple((int(n), int(l)) for n, l in self.sizes)
        if any(n < 1 or l < 1 for n, l in sizes):
            raise SympertError("structure", "block sizes and counts must be positive")
        if any(a[0] <= b[0] for a, b in zip(sizes, sizes[1:])):
            raise SympertError("structure", "block sizes must be strictly descending")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "lam", complex(self.lam))

    @property
    def multiplicity(self):
        return sum(n * l for n, l in self.sizes)

    @property
    def is_empty(self):
        return not self.sizes

    def label(self):
        return ",".join(f"{n}x{l}" for n, l in self.sizes) or "none"


def _sizes_from_counts(counts):
    return tuple(sorted(((n, l) for n, l in counts.items() if l > 0), reverse=True))


def segre_at(A, lam, tol_rank=SEGRE_TOL):
    """Segre characteristic of ``A`` at ``lam`` from ranks of ``(A - lam I)^j``.

    The rank threshold for the ``j``-th power is ``tol_rank * s^j`` with
    ``s = max(||A||, ||A - lam I||)``, the scale of rounding errors in that
    power. ``lam``
    must be an eigenvalue to that accuracy; otherwise the result is empty.
    The result is flagged ``borderline`` when any singular value falls within
    a factor ten of the rank threshold.
    """
    A = np.asarray(A)
    n = A.shape[0]
    lam = complex(lam)
    dtype = complex if lam.imag != 0 or np.iscomplexobj(A) else float
    B = A.astype(dtype) - (lam if dtype is complex else lam.real) * np.eye(n)
    ranks = [n]
    borderline = False
    bnorm = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2))
    P = np.eye(n, dtype=dtype)
    for j in range(1, n + 1):
        P = P @ B
        s = np.linalg.svd(P, compute_uv=False)
        thr = tol_rank * bnorm**j
        r = int(np.sum(s > thr))
        if thr > 0 and np.any((s > thr / BORDERLINE_FACTOR) & (s <= thr * BORDERLINE_FACTOR)):
            borderline = True
        ranks.append(r)
        if r == ranks[-2] or r == 0:
            break
    weyr = [ranks[j - 1] - ranks[j] for j in range(1, len(ranks))] + [0]
    counts = {}
    for size in range(1, len(weyr)):
        c = weyr[size - 1] - weyr[size]
        if c < 0:
            borderline = True
        elif c:
            counts[size] = c
    return SegreCharacteristic(lam, _sizes_from_counts(counts), borderline)


def jordan_block(n, lam):
    return lam * np.eye(n) + np.eye(n, k=1)


def _real_jordan_block(n, lam):
    """Real ``2n x 2n`` Jordan form for the conjugate pair ``lam, conj(lam)``."""
    a, b = lam.real, lam.imag
    C = np.array([[a, b], [-b, a]])
    return np.kron(np.eye(n), C) + np.kron(np.eye(n, k=1), np.eye(2))


def _nilpotent_hamiltonian(m):
    """``[[N, e e^T], [0, -N^T]]``: a single nilpotent Jordan chain of length ``2m``."""
    N = np.eye(m, k=1)
    G = np.zeros((m, m))
    G[-1, -1] = 1.0
    return np.block([[N, G], [np.zeros((m, m)), -N.T]])


def _same(a, b):
    return abs(a - b) <= 1e-12 * max(1.0, abs(a))


def _components(spec):
    """Split a spec into ``(B, kind)`` symplectic building blocks."""
    items = list(spec)
    used = [False] * len(items)
    blocks = []
    for i, sc in enumerate(items):
        if used[i]:
            continue
        used[i] = True
        lam = sc.lam
        if lam == 0:
            raise SympertError("structure_unrealizable", "0 cannot be an eigenvalue of a symplectic matrix")
        partners = [lam.conjugate(), 1 / lam, 1 / lam.conjugate()]
        for j in range(i + 1, len(items)):
            if not used[j] and any(_same(items[j].lam, p) for p in partners):
                if items[j].sizes != sc.sizes:
                    raise SympertError(
                        "structure_unrealizable",
                        f"blocks at {items[j].lam:g} must mirror those at {lam:g}",
                    )
                used[j] = True
        on_pm1 = lam.imag == 0 and abs(abs(lam.real) - 1) <= 1e-12
        if on_pm1:
            mu = float(np.sign(lam.real))
            for n, l in sc.sizes:
                if n % 2 == 1 and l % 2 == 1:
                    raise SympertError(
                        "structure_unrealizable", f"odd blocks J_{n}({mu:+g}) need even multiplicity, got {l}"
                    )
                for _ in range(l // 2):
                    blocks.append(("pair", jordan_block(n, mu)))
                if l % 2:
                    blocks.append(("single", mu * sla.expm(_nilpotent_hamiltonian(n // 2))))
        elif lam.imag == 0:
            for n, l in sc.sizes:
                for _ in range(l):
                    blocks.append(("pair", jordan_block(n, lam.real)))
        elif abs(abs(lam) - 1) > 1e-12:
            rep = lam if abs(lam) > 1 else 1 / lam.conjugate()
            for n, l in sc.sizes:
                for _ in range(l):
                    blocks.append(("pair", _real_jordan_block(n, rep)))
        else:
            raise SympertError("structure", "non-real unit-circle eigenvalues are not supported by the generator")
    return blocks


def _direct_sum(parts, n_half):
    """Symplectic direct sum of ``2m x 2m`` parts in ``[[q-block], [p-block]]`` layout."""
    W = np.zeros((2 * n_half, 2 * n_half))
    off = 0
    for P in parts:
        m = P.shape[0] // 2
        idx = np.r_[off:off + m, n_half + off:n_half + off + m]
        W[np.ix_(idx, idx)] = P
        off += m
    return W


def _parts(spec):
    parts = []
    for kind, B in _components(spec):
        parts.append(sla.block_diag(B, np.linalg.inv(B).T) if kind == "pair" else B)
    return parts


def required_half_dimension(spec):
    """``N`` of the symplectic matrix realizing ``spec``."""
    return sum(P.shape[0] for P in _parts(spec)) // 2


def symplectic_with_structure(spec, ctx, rng=None):
    """Symplectic matrix whose Jordan form at each listed eigenvalue matches ``spec``.

    Blocks at ``lam`` not in ``{+1, -1}`` are mirrored at ``1/lam`` (and at the
    conjugates for non-real ``lam``) via ``diag(B, B^{-T})``; a mirror entry in
    ``spec`` must carry the same sizes. At ``+-1`` odd-sized blocks need even
    multiplicity. With ``rng`` the result is conjugated by a random orthogonal
    symplectic matrix.
    """
    if not any(np.array_equal(ctx.J, block_j(ctx.n_half, s)) for s in (-1, 1)):
        raise SympertError("structure", "the generator needs a block skew form")
    parts = _parts(spec)
    total = sum(P.shape[0] for P in parts) // 2
    if total != ctx.n_half:
        raise SympertError("dimension", f"spec needs N={total}, context has N={ctx.n_half}")
    W = _direct_sum(parts, ctx.n_half)
    if rng is not None:
        Q = random_orthogonal_symplectic(ctx, rng)
        W = Q @ W @ Q.T
    ok, defect = is_symplectic(W, ctx)
    if not ok:
        raise SympertError("structure", f"generated matrix is not symplectic (defect {defect:.2e})")
    return W


def _is_pm1(lam):
    return lam.imag == 0 and abs(abs(lam.real) - 1) <= 1e-12


def predict(sc, k):
    """Predicted ``(case, sizes)`` at ``sc.lam`` after a generic rank-``k`` perturbation.

    Off ``+-1`` the ``k`` largest blocks disappear. At ``+-1`` the budget
    walks down the levels: even levels lose blocks one for one; an odd level
    entered with an odd budget ``2 k_i - 1`` keeps ``l_i - 2 k_i`` blocks
    and gains one block one size larger, and with an even budget ``2 k_i``
    simply loses ``2 k_i`` blocks.
    """
    counts = dict(sc.sizes)
    budget = k
    pm1 = _is_pm1(sc.lam)
    case = "1"
    for n, l in sc.sizes:
        if budget == 0:
            break
        if pm1:
            case = "2a" if n % 2 == 0 else "2b" if budget % 2 else "2b_even"
        if budget >= l:
            counts[n] = 0
            budget -= l
            if pm1 and n % 2 == 1:
                case = "2b_even"
            continue
        if pm1 and n % 2 == 1 and budget % 2 == 1:
            counts[n] = l - budget - 1
            counts[n + 1] = counts.get(n + 1, 0) + 1
        else:
            counts[n] = l - budget
        budget = 0
    return case, _sizes_from_counts(counts)


def _group(values, radius):
    groups = []
    for v in values:
        for g in groups:
            if np.min(np.abs(np.array(g) - v)) <= radius:
                g.append(complex(v))
                break
        else:
            groups.append([complex(v)])
    return groups


def eigen_clusters(A, radius=CLUSTER_RADIUS):
    """Eigenvalues of ``A`` grouped with any neighbour within ``radius``."""
    return _group(np.linalg.eigvals(A), radius)


def _cluster_multiplicity(A, g, radius, tol_rank):
    m = segre_at(A, np.mean(g), tol_rank).multiplicity
    if m == len(g) or len(g) == 1 or radius < 1e-10:
        return m
    return sum(_cluster_multiplicity(A, sub, radius / 10, tol_rank) for sub in _group(g, radius / 10))


def total_multiplicity(A, tol_rank=SEGRE_TOL):
    """Sum of ``size * count`` over the Segre characteristics of all eigenvalues.

    Each cluster is examined at its mean, which is accurate for a split
    Jordan block. A cluster whose characteristic disagrees with its size may
    join distinct nearby eigenvalues and is split with a smaller radius.
    """
    return sum(_cluster_multiplicity(A, g, CLUSTER_RADIUS, tol_rank) for g in eigen_clusters(A))


def _random_generic_u(ctx, k, rng):
    basis, _ = isotropic_from(rng.standard_normal((ctx.dim, ctx.n_half)), ctx)
    cols = rng.choice(ctx.n_half, size=k, replace=False)
    U = basis.U[:, np.sort(cols)] @ rng.standard_normal((k, k))
    return U / np.linalg.norm(U, axis=0)


def perturbed_trial(W, ctx, k, rng):
    """``(I + U U^T J) W`` for a generic isotropic ``U`` with ``k`` unit columns."""
    U = _random_generic_u(ctx, k, rng)
    return W + low_rank_term(U, ctx.J) @ W


@dataclass
class ThrReport:
    case: str
    predicted: SegreCharacteristic
    observed_histogram: dict
    match_fraction: float
    borderline_count: int
    seed: int
    trials: int
    conserved: int  # trials where total algebraic multiplicity equals 2N
    matches: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "case": self.case,
            "predicted": {
                "lambda": [self.predicted.lam.real, self.predicted.lam.imag],
                "sizes": [list(p) for p in self.predicted.sizes],
            },
            "observed_histogram": dict(sorted(self.observed_histogram.items())),
            "match_fraction": self.match_fraction,
            "borderline_count": self.borderline_count,
            "seed": self.seed,
            "trials": self.trials,
            "multiplicity_conserved": self.conserved,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _one_trial(W, ctx, lam, k, seed, index, tol_rank):
    rng = np.random.default_rng([seed, index])
    Wt = perturbed_trial(W, ctx, k, rng)
    obs = segre_at(Wt, lam, tol_rank)
    conserved = total_multiplicity(Wt, tol_rank) == ctx.dim
    return obs, conserved


def check_thr(W, lam, k, trials, ctx, seed=0, tol_rank=SEGRE_TOL, workers=None):
    """Match fraction of generic rank-``k`` perturbations against :func:`predict`.

    Trial ``i`` draws from ``numpy.random.default_rng([seed, i])``, so the
    report does not depend on ``workers``. Borderline rank decisions are
    counted separately and left out of the match fraction.
    """
    W = ctx.check_square(W, "W")
    base = segre_at(W, lam, tol_rank)
    if base.is_empty:
        raise SympertError("structure", f"{complex(lam):g} is not an eigenvalue of W")
    if not 1 <= k <= ctx.n_half:
        raise SympertError("dimension", f"k must lie in 1..{ctx.n_half}")
    case, sizes = predict(base, k)
    predicted = SegreCharacteristic(base.lam, sizes)

    def run(i):
        return _one_trial(W, ctx, base.lam, k, seed, i, tol_rank)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(trials)))
    else:
        results = [run(i) for i in range(trials)]

    hist = Counter()
    borderline = matches = conserved = 0
    for obs, cons in results:
        conserved += bool(cons)
        if obs.borderline:
            borderline += 1
            continue
        hist[obs.label()] += 1
        matches += obs.sizes == predicted.sizes
    counted = trials - borderline
    frac = matches / counted if counted else 0.0
    return ThrReport(case, predicted, dict(hist), frac, borderline, seed, trials, conserved, matches)
