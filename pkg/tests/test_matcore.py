import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sympert.matcore import (
    SympertError,
    SymplecticContext,
    as_mat,
    block_j,
    cayley_minus,
    cayley_plus,
    eig,
    inverse_cayley_minus,
    inverse_cayley_plus,
    is_hamiltonian,
    is_symplectic,
    numerical_rank,
    read_csv,
    solve,
    symplectic_projection,
    write_csv,
)

from conftest import random_symplectic


@pytest.mark.parametrize("n", [1, 2, 3, 6])
@pytest.mark.parametrize("sign", [-1, 1])
def test_block_j_is_a_skew_square_root_of_minus_identity(n, sign):
    J = block_j(n, sign)
    assert np.array_equal(J.T, -J)
    assert np.array_equal(J @ J, -np.eye(2 * n))
    assert J[0, n] == sign


def test_context_rejects_bad_forms():
    with pytest.raises(SympertError) as err:
        SymplecticContext(2, J=np.eye(4))
    assert err.value.code == "structure"
    with pytest.raises(SympertError):
        SymplecticContext(2, J=block_j(3))
    with pytest.raises(SympertError):
        SymplecticContext(0)


def test_context_accepts_alternate_sign_and_is_immutable():
    ctx = SymplecticContext.standard(2, sign=1)
    assert np.array_equal(ctx.J_inv @ ctx.J, np.eye(4))
    with pytest.raises(ValueError):
        ctx.J[0, 0] = 1.0


def test_as_mat_checks_shape_and_finiteness():
    assert as_mat([1.0, 2.0]).shape == (2, 1)
    with pytest.raises(SympertError):
        as_mat(np.ones((2, 3)), rows=3)
    with pytest.raises(SympertError):
        as_mat([[np.nan]])


def test_is_symplectic_on_known_matrices(ctx3):
    D = np.diag([2.0, 3.0, 0.25])
    W = np.block([[D, np.zeros((3, 3))], [np.zeros((3, 3)), np.linalg.inv(D)]])
    assert is_symplectic(W, ctx3)[0]
    assert not is_symplectic(2 * np.eye(6), ctx3)[0]
    assert is_symplectic(2 * np.eye(6), ctx3)[1] == pytest.approx(3.0)


def test_is_hamiltonian(ctx3, rng):
    S = rng.standard_normal((6, 6))
    A = ctx3.J_inv @ (S + S.T)
    assert is_hamiltonian(A, ctx3)[0]
    assert not is_hamiltonian(np.eye(6), ctx3)[0]


def test_eig_sorted_with_small_residuals(rng):
    A = rng.standard_normal((6, 6))
    spec = eig(A)
    mods = np.abs(spec.eigenvalues)
    assert np.all(np.diff(np.round(mods, 12)) >= 0)
    assert spec.max_residual < 1e-12
    assert np.allclose(np.linalg.norm(spec.eigenvectors, axis=0), 1.0)


@pytest.mark.parametrize(
    "A, r",
    [(np.eye(4), 4), (np.zeros((3, 3)), 0), (np.outer([1, 2, 3], [1, 0, 1]), 1), (np.diag([1, 1e-12]), 1)],
)
def test_numerical_rank(A, r):
    assert numerical_rank(A, 1e-10) == r


def test_solve_warns_on_near_singular_systems():
    A = np.diag([1.0, 1e-14])
    with pytest.warns(RuntimeWarning):
        solve(A, np.ones(2))


def test_cayley_of_a_diagonal_matrix():
    ctx = SymplecticContext(1)
    W = np.diag([2.0, 0.5])
    # (1 + w) / (1 - w) on the diagonal
    assert np.allclose(cayley_plus(W, ctx), np.diag([-3.0, 3.0]))
    # (1 - w) / (1 + w)
    assert np.allclose(cayley_minus(W, ctx), np.diag([-1.0 / 3.0, 1.0 / 3.0]))


def test_cayley_rejects_excluded_eigenvalue():
    ctx = SymplecticContext(1)
    with pytest.raises(SympertError) as err:
        cayley_plus(np.eye(2), ctx)
    assert err.value.code == "singular_cayley"
    with pytest.raises(SympertError):
        cayley_minus(-np.eye(2), ctx)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
def test_cayley_round_trips(seed, n):
    ctx = SymplecticContext(n)
    rng = np.random.default_rng(seed)
    W = random_symplectic(ctx, rng, shift=-1.0)
    A = cayley_plus(W, ctx)
    assert is_hamiltonian(A, ctx)[1] < 1e-11 * max(1.0, np.linalg.norm(A, 2))
    assert np.allclose(inverse_cayley_plus(A, ctx), W, atol=1e-12)
    V = random_symplectic(ctx, rng, shift=1.0)
    B = cayley_minus(V, ctx)
    assert is_hamiltonian(B, ctx)[1] < 1e-11
    assert np.allclose(inverse_cayley_minus(B, ctx), V, atol=1e-12)


def test_symplectic_projection_repairs_small_defects(ctx3, rng):
    W = random_symplectic(ctx3, rng, scale=2.0)
    noisy = W + 1e-9 * rng.standard_normal(W.shape)
    fixed = symplectic_projection(noisy, ctx3)
    assert is_symplectic(fixed, ctx3)[1] < 1e-13
    assert np.linalg.norm(fixed - W, 2) < 1e-7
    # exactly symplectic input comes back unchanged; large defects are left alone
    assert symplectic_projection(np.eye(6), ctx3) is not None
    far = 3 * np.eye(6)
    assert np.array_equal(symplectic_projection(far, ctx3), far)


def test_csv_round_trip(tmp_path, rng):
    A = rng.standard_normal((3, 4))
    path = tmp_path / "a.csv"
    write_csv(path, A)
    assert np.array_equal(read_csv(path), A)
    path.write_text("2,2\n1,2\n")
    with pytest.raises(SympertError):
        read_csv(path)
