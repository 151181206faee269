import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sympert.cli import REFERENCE_CASES
from sympert.isotropic import (
    ElementarySymplecticOrthogonal,
    IsotropicBasis,
    extend_to_lagrangian,
    givens_symplectic,
    householder_pair,
    isotropic_from,
    krylov_basis,
    krylov_isotropy_check,
    random_isotropic,
    random_orthogonal_symplectic,
    random_skew_hamiltonian,
    symplectic_qr,
)
from sympert.matcore import SympertError, SymplecticContext, is_symplectic

# Bases printed next to the example inputs, 4 digits.
REFERENCE_V = {
    "eps2_delta4": [
        [-0.4918, 0.1282, 0.4009],
        [-0.5468, 0.0030, -0.3293],
        [-0.0767, -0.6566, 0.1582],
        [-0.5514, -0.1635, -0.5002],
        [-0.3818, 0.3003, 0.5972],
        [-0.0589, -0.6599, 0.3146],
    ],
    "eps15_delta4": [
        [-0.5773, -0.1442, 0.4709],  # printed as -0.1332, which breaks unit column norm
        [-0.3476, 0.1520, 0.1331],
        [-0.0647, -0.9504, -0.2474],
        [-0.1767, -0.1538, 0.6077],
        [-0.7047, 0.1706, -0.5591],
        [-0.1176, -0.0103, -0.1320],
    ],
    "a2_b2": [
        [-0.1599, 0.0405, 0.5357],
        [-0.5453, -0.3844, 0.2439],
        [0.6717, -0.4143, 0.1441],
        [-0.2564, -0.7645, -0.1887],
        [-0.0948, 0.1272, 0.6857],
        [0.3889, -0.2798, 0.3563],
    ],
    "a18.95_b2": [
        [-0.4677, -0.3232, 0.6729],
        [-0.4704, -0.4311, -0.3311],
        [-0.2229, -0.1819, 0.2867],
        [0.4008, -0.1814, 0.1744],
        [-0.2381, -0.3203, -0.5692],
        [-0.5412, 0.7356, -0.0323],
    ],
}
CASES = {tag: A for cases in REFERENCE_CASES.values() for tag, _, A in cases}


def _defects(U, ctx):
    k = U.shape[1]
    return np.linalg.norm(U.T @ U - np.eye(k), 2), np.linalg.norm(U.T @ ctx.J @ U, 2)


@pytest.mark.parametrize("tag", sorted(REFERENCE_V))
def test_reference_bases_up_to_column_signs(tag, ctx3):
    basis, _ = isotropic_from(np.array(CASES[tag]), ctx3)
    V = np.array(REFERENCE_V[tag])
    signs = np.sign(np.sum(basis.U * V, axis=0))
    assert np.allclose(basis.U * signs, V, atol=2e-4)
    assert np.allclose(basis.U @ basis.U.T, V @ V.T, atol=1e-3)


def test_leading_columns_do_not_depend_on_later_ones(ctx3):
    A = np.array(CASES["eps2_delta4"])
    full, _ = isotropic_from(A, ctx3)
    two, _ = isotropic_from(A[:, :2], ctx3)
    assert np.allclose(full.U[:, :2], two.U, atol=1e-14)


def test_householder_pair_clears_the_requested_half(ctx3, rng):
    x = rng.standard_normal(6)
    up = householder_pair(0, x, ctx3, "upper")
    y = up.apply(x)
    assert np.allclose(y[1:3], 0, atol=1e-14)
    assert abs(y[0]) == pytest.approx(np.linalg.norm(x[:3]))
    # the reflector sign follows -sign(x_0)
    assert np.sign(y[0]) == -np.sign(x[0])
    lo = householder_pair(1, x, ctx3, "lower")
    z = lo.apply(x)
    assert abs(z[5]) < 1e-14
    assert z[0] == x[0]
    assert is_symplectic(lo.matrix(), ctx3)[0]


def test_givens_clears_the_partner_entry(ctx3, rng):
    x = rng.standard_normal(6)
    g = givens_symplectic(2, x, ctx3)
    y = g.apply(x)
    assert abs(y[5]) < 1e-15
    assert -np.pi / 2 <= g.theta < np.pi / 2
    assert np.allclose(g.matrix().T @ x, y)
    assert is_symplectic(g.matrix(), ctx3)[0]


def test_givens_with_zero_leading_entry(ctx3):
    x = np.array([0.0, 0, 0, 2.0, 0, 0])
    g = givens_symplectic(0, x, ctx3)
    assert g.theta == pytest.approx(-np.pi / 2)
    assert abs(g.apply(x)[3]) < 1e-15


def test_elementary_transform_rejects_bad_index(ctx3):
    with pytest.raises(SympertError):
        householder_pair(3, np.ones(6), ctx3)
    with pytest.raises(ValueError):
        householder_pair(0, np.ones(6), ctx3, "middle")
    assert isinstance(givens_symplectic(0, np.ones(6), ctx3), ElementarySymplecticOrthogonal)


def test_symplectic_qr_structure(ctx3, rng):
    A = rng.standard_normal((6, 3))
    Q, R = symplectic_qr(A, ctx3)
    assert np.allclose(Q @ R, A, atol=1e-13)
    assert np.allclose(Q.T @ Q, np.eye(6), atol=1e-13)
    assert is_symplectic(Q, ctx3)[1] < 1e-13
    for j in range(3):
        assert np.allclose(R[j + 1:3, j], 0) and np.allclose(R[3 + j:, j], 0)


def test_deficient_input_is_reported(ctx3):
    A = np.ones((6, 2))
    with pytest.raises(SympertError) as err:
        isotropic_from(A, ctx3)
    assert err.value.code == "deficient_input"
    with pytest.raises(SympertError):
        isotropic_from(np.ones((6, 4)), ctx3)


def test_basis_validation(ctx3):
    with pytest.raises(SympertError):
        IsotropicBasis(np.eye(6)[:, [0, 3]], ctx3)  # e_0 and J e_0 span a symplectic plane
    B = IsotropicBasis(np.eye(6)[:, [0, 1, 2]], ctx3)
    assert B.is_lagrangian and B.columns([1]).k == 1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), data=st.data())
def test_isotropic_from_random_inputs(seed, n, data):
    k = data.draw(st.integers(1, n))
    ctx = SymplecticContext(n)
    A = np.random.default_rng(seed).standard_normal((2 * n, k))
    basis, Q = isotropic_from(A, ctx)
    orth, iso = _defects(basis.U, ctx)
    assert orth <= 1e-12 and iso <= 1e-12
    # the first column of A is reduced to a multiple of e_0
    a0 = A[:, 0] / np.linalg.norm(A[:, 0])
    assert abs(abs(basis.U[:, 0] @ a0) - 1) < 1e-12
    assert is_symplectic(Q, ctx)[1] < 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 6))
def test_extend_to_lagrangian_keeps_original_columns(seed, n):
    ctx = SymplecticContext(n)
    rng = np.random.default_rng(seed)
    B = random_isotropic(ctx, 1, rng)
    L = extend_to_lagrangian(B)
    assert L.is_lagrangian
    assert np.array_equal(L.U[:, :1], B.U)


def test_random_helpers(ctx3, rng):
    Q = random_orthogonal_symplectic(ctx3, rng)
    assert np.allclose(Q.T @ Q, np.eye(6), atol=1e-13) and is_symplectic(Q, ctx3)[0]
    S = random_skew_hamiltonian(ctx3, rng)
    JS = ctx3.J @ S
    assert np.allclose(JS, -JS.T)


@pytest.mark.parametrize("seed", range(20))
def test_krylov_spaces_of_skew_hamiltonian_matrices_are_isotropic(seed, ctx3):
    rng = np.random.default_rng(seed)
    S = random_skew_hamiltonian(ctx3, rng)
    assert krylov_isotropy_check(S, rng.standard_normal(6), 3, ctx3)


def test_krylov_of_a_generic_matrix_is_not_isotropic(ctx3, rng):
    K = krylov_basis(rng.standard_normal((6, 6)), rng.standard_normal(6), 3)
    assert np.linalg.norm(K.T @ ctx3.J @ K) > 1e-3
    with pytest.raises(SympertError):
        krylov_isotropy_check(rng.standard_normal((6, 6)), np.ones(6), 2, ctx3)


def test_krylov_basis_stops_at_an_invariant_subspace():
    S = np.diag([1.0, 2.0, 3.0, 4.0])
    K = krylov_basis(S, np.array([1.0, 1.0, 0.0, 0.0]), 4)
    assert K.shape[1] == 2
