import numpy as np
import pytest
from hypothesis import given, strategies as st

from fredflow.errors import InputError, SolveError
from fredflow.linalg import (as_matrix, cluster_eigenvalues, condition_estimate, eigenvalues,
                             nullspace, numerical_rank, solve, strip_imag)


def test_rank_examples():
    assert numerical_rank(np.eye(3), 1e-8).rank == 3
    assert numerical_rank(np.zeros((2, 2))).rank == 0
    d = numerical_rank(np.diag([1.0, 1e-12]), 1e-8)
    assert d.rank == 1
    assert d.threshold == pytest.approx(1e-8)
    assert d.singular_values == pytest.approx((1.0, 1e-12))


def test_rank_rejects_bad_input():
    with pytest.raises(InputError):
        numerical_rank([[np.nan, 0.0], [0.0, 1.0]])
    with pytest.raises(InputError):
        numerical_rank(np.eye(2), rel_tol=1.5)
    with pytest.raises(InputError):
        as_matrix(np.zeros((0, 3)), square=False)
    with pytest.raises(InputError):
        as_matrix([[1.0, np.inf]], square=False)


def test_eigenvalue_examples():
    assert eigenvalues(np.diag([2.0, -5.0])) == pytest.approx([-5.0, 2.0])
    assert eigenvalues([[0.0, 3.0], [1.0, 0.0]]) == pytest.approx([-np.sqrt(3), np.sqrt(3)])
    assert eigenvalues([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx([-1j, 1j])


def test_solve_examples():
    B = np.arange(6.0).reshape(3, 2)
    assert np.allclose(solve(np.eye(3), B), B)
    assert np.allclose(solve(np.diag([2.0, 4.0]), np.eye(2)), np.diag([0.5, 0.25]))
    X, res = solve([[1.0, 1.0], [0.0, 1.0]], np.eye(2), return_residual=True)
    assert np.allclose(X, [[1.0, -1.0], [0.0, 1.0]])
    assert res < 1e-15


def test_solve_singular_carries_condition():
    with pytest.raises(SolveError) as info:
        solve([[1.0, 2.0], [2.0, 4.0]], np.eye(2))
    assert "condition" in info.value.diagnostics
    with pytest.raises(SolveError):
        solve(np.diag([1.0, 1e-14]), np.eye(2))


def test_condition_estimate_matches_dense():
    A = np.array([[4.0, 1.0], [2.0, 3.0]])
    exact = np.linalg.cond(A, 1)
    assert condition_estimate(A) == pytest.approx(exact, rel=1e-12)


def test_strip_imag_and_clusters():
    M = np.eye(2) + 1e-14j
    assert not np.iscomplexobj(strip_imag(M))
    assert np.iscomplexobj(strip_imag(np.eye(2) + 1e-3j))
    cl = cluster_eigenvalues([1.0, 1.0 + 1e-9, 2.0])
    assert sorted(m for _, m in cl) == [1, 2]


@given(st.integers(2, 7), st.integers(0, 7), st.integers(0, 10_000))
def test_rank_plus_nullity(n, r, seed):
    r = min(r, n)
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, r)) @ rng.standard_normal((r, n))
    rank = numerical_rank(M).rank
    assert rank == r
    assert rank + nullspace(M).shape[1] == n


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_solve_residual(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) + n * np.eye(n)
    B = rng.standard_normal((n, 3))
    X = solve(M, B)
    assert np.linalg.norm(M @ X - B) <= 1e-10 * np.linalg.norm(B)


@given(st.integers(1, 7), st.integers(0, 10_000))
def test_similarity_preserves_spectrum(n, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n))
    S = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)
    a = eigenvalues(M)
    b = eigenvalues(S @ M @ np.linalg.inv(S))
    # multiset comparison by greedy matching
    left = list(b)
    for v in a:
        j = int(np.argmin(np.abs(np.array(left) - v)))
        assert abs(left.pop(j) - v) <= 1e-8 * (1 + abs(v))
