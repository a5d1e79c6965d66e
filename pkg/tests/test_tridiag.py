import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lagwave.tridiag import (
    SingularMatrixError,
    TridiagonalMatrix,
    comm_time_allreduce,
    comm_time_dichotomy,
    factor,
    partition_bounds,
    solve_batched,
    thomas_solve,
)


def random_dd(rng, n, k=None):
    shape = (n,) if k is None else (n, k)
    lower = rng.uniform(-1, 1, shape)
    upper = rng.uniform(-1, 1, shape)
    diag = np.abs(lower) + np.abs(upper) + rng.uniform(0.1, 1.0, shape)
    return TridiagonalMatrix(lower, diag, upper)


def test_thomas_matches_dense():
    rng = np.random.default_rng(0)
    T = random_dd(rng, 40)
    b = rng.standard_normal((40, 3))
    np.testing.assert_allclose(thomas_solve(T, b), np.linalg.solve(T.dense(), b), rtol=1e-12)


def test_matvec_matches_dense():
    rng = np.random.default_rng(1)
    T = random_dd(rng, 25)
    x = rng.standard_normal(25)
    np.testing.assert_allclose(T.matvec(x), T.dense() @ x, rtol=1e-13)


@pytest.mark.parametrize("workers", [1, 2, 3, 4, 8])
def test_partitioned_matches_thomas(workers):
    rng = np.random.default_rng(workers)
    T = random_dd(rng, 1000)
    b = rng.standard_normal((1000, 17))
    x = solve_batched(factor(T, workers), b)
    ref = thomas_solve(T, b)
    assert np.abs(x - ref).max() <= 1e-12 * np.abs(ref).max()


def test_vector_rhs():
    rng = np.random.default_rng(2)
    T = random_dd(rng, 64)
    b = rng.standard_normal(64)
    x = solve_batched(factor(T, 4), b)
    assert x.shape == (64,)
    np.testing.assert_allclose(T.matvec(x), b, atol=1e-12)


def test_per_column_matrices():
    rng = np.random.default_rng(3)
    T = random_dd(rng, 300, 9)
    b = rng.standard_normal((300, 9))
    x = solve_batched(factor(T, 4), b)
    for j in range(9):
        Tj = TridiagonalMatrix(T.lower[:, j], T.diag[:, j], T.upper[:, j])
        np.testing.assert_allclose(x[:, j], thomas_solve(Tj, b[:, j]), rtol=1e-11, atol=1e-13)
    with pytest.raises(ValueError):
        solve_batched(factor(T, 2), b[:, :3])


def test_parallel_and_serial_bit_identical():
    rng = np.random.default_rng(4)
    T = random_dd(rng, 5000)
    b = rng.standard_normal((5000, 32))
    F = factor(T, 4)
    a = solve_batched(F, b, parallel=True)
    c = solve_batched(F, b, parallel=False)
    assert np.array_equal(a, c)
    assert np.array_equal(a, solve_batched(F, b, parallel=True))


def test_zero_rhs_gives_zero():
    rng = np.random.default_rng(5)
    T = random_dd(rng, 50)
    assert np.all(solve_batched(factor(T, 3), np.zeros((50, 2))) == 0.0)


def test_singular_matrix_detected():
    T = TridiagonalMatrix(np.zeros(4), np.array([1.0, 0.0, 1.0, 1.0]), np.zeros(4))
    with pytest.raises(SingularMatrixError):
        factor(T, 1)
    with pytest.raises(SingularMatrixError):
        thomas_solve(T, np.ones(4))


def test_shape_errors():
    with pytest.raises(ValueError):
        TridiagonalMatrix(np.zeros(3), np.ones(4), np.zeros(4))
    rng = np.random.default_rng(6)
    F = factor(random_dd(rng, 10), 2)
    with pytest.raises(ValueError):
        solve_batched(F, np.ones(11))


def test_factored_state_is_read_only():
    rng = np.random.default_rng(7)
    F = factor(random_dd(rng, 100), 4)
    with pytest.raises(ValueError):
        F.blocks[0].cp[0] = 1.0


def test_partition_bounds_cover_rows():
    for n, w in [(10, 3), (5, 8), (2, 4), (100000, 8)]:
        b = partition_bounds(n, w)
        assert b[0][0] == 0 and b[-1][1] == n
        assert all(e - s >= 2 for s, e in b) or n < 2
        assert all(b[i][1] == b[i + 1][0] for i in range(len(b) - 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=2, max_value=200), st.integers(min_value=1, max_value=9), st.integers(0, 2**31))
def test_property_partitioned_equals_thomas(n, workers, seed):
    rng = np.random.default_rng(seed)
    T = random_dd(rng, n)
    b = rng.standard_normal((n, 2))
    x = solve_batched(factor(T, workers), b)
    ref = thomas_solve(T, b)
    assert np.abs(x - ref).max() <= 1e-11 * max(np.abs(ref).max(), 1.0)


def test_cost_model_values():
    assert comm_time_allreduce(1, 1.0, 1.0, 1.0) == 0.0
    assert comm_time_dichotomy(1, 5.0, 1.0, 1.0, 1.0) == 0.0
    assert comm_time_allreduce(4, 1.0, 0.0, 0.0) == 4.0
    assert comm_time_dichotomy(4, 1.0, 1.0, 0.0, 0.0) == 6.0
    # bandwidth terms: (p-1)/p (gamma + 2 beta) and l (log p - (p-1)/p)(gamma + 2 beta)
    assert comm_time_allreduce(8, 0.0, 1.0, 1.0) == pytest.approx(7 / 8 * 3)
    assert comm_time_dichotomy(8, 10.0, 0.0, 1.0, 1.0) == pytest.approx(10 * (3 - 7 / 8) * 3)


@pytest.mark.parametrize("p", [0, 3, 6, -4])
def test_cost_model_rejects_non_powers(p):
    with pytest.raises(ValueError):
        comm_time_allreduce(p, 1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        comm_time_dichotomy(p, 1.0, 1.0, 0.0, 0.0)
