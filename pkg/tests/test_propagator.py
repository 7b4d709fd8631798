import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from fredflow.errors import InputError
from fredflow.propagator import (OperatorPath, cocycle_residual, dual_residual,
                                 fit_exponential_estimate, inverse_residual, propagate,
                                 variation_of_constants_residual)

TOL = 1e-10


def smooth_path(seed, n=3, scale=1.0):
    rng = np.random.default_rng(seed)
    A0, A1, A2 = (scale * rng.standard_normal((n, n)) / np.sqrt(n) for _ in range(3))
    return OperatorPath.from_function(lambda t: A0 + np.sin(t) * A1 + np.cos(2 * t) * A2, (-3.0, 3.0))


def reference_propagator(path, ts):
    """Fundamental solution from scipy's DOP853 at tight tolerance."""
    n = path.n
    rhs = lambda t, y: (path(t) @ y.reshape(n, n)).ravel()
    out = {}
    for sign in (1, -1):
        pts = sorted((t for t in ts if sign * t > 0), key=abs)
        if not pts:
            continue
        sol = solve_ivp(rhs, (0.0, pts[-1]), np.eye(n).ravel(), method="DOP853", t_eval=pts,
                        rtol=1e-13, atol=1e-14)
        for t, y in zip(sol.t, sol.y.T):
            out[float(t)] = y.reshape(n, n)
    out[0.0] = np.eye(n)
    return out


def test_closed_forms():
    tr = propagate(OperatorPath.constant(np.zeros((2, 2))), (-2.0, 2.0), tol=TOL)
    assert all(np.allclose(X, np.eye(2)) for X in tr.X)
    tr = propagate(OperatorPath.constant([[-1.0]]), (0.0, 5.0), tol=TOL)
    assert np.max(np.abs(tr.X[:, 0, 0] - np.exp(-tr.times))) <= 10 * TOL
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    tr = propagate(OperatorPath.constant(J), (0.0, 6.0), tol=TOL, t_eval=[1.0, 6.0])
    for t in (1.0, 6.0):
        X = tr.at(t)[0]
        assert np.allclose(X, sla.expm(t * J), atol=1e-9)
        assert np.linalg.norm(X, 2) == pytest.approx(1.0, abs=1e-9)


def test_input_validation():
    p = OperatorPath.constant(np.eye(2))
    with pytest.raises(InputError):
        propagate(p, (1.0, 0.0))
    with pytest.raises(InputError):
        propagate(p, (0.0, 1.0), tol=1e-2)
    with pytest.raises(InputError):
        OperatorPath([0.0, 0.0], np.zeros((2, 1, 1)))
    with pytest.raises(InputError):
        OperatorPath([0.0, 1.0], np.full((2, 1, 1), np.nan))


def test_sampled_path_interpolates_linearly():
    p = OperatorPath([0.0, 1.0, 3.0], [[[0.0]], [[2.0]], [[0.0]]])
    assert p(0.5)[0, 0] == pytest.approx(1.0)
    assert p(2.0)[0, 0] == pytest.approx(1.0)
    assert p(10.0)[0, 0] == 0.0


def test_cocycle_examples():
    tr = propagate(OperatorPath.constant([[-1.0]]), (0.0, 4.0), tol=TOL, t_eval=[1.0, 3.0])
    assert cocycle_residual(tr, 0.0, 3.0) <= 1e-12
    assert cocycle_residual(tr, 1.0, 2.0) <= 1e-8
    with pytest.raises(InputError):
        cocycle_residual(tr, 3.0, 3.0)


def test_dual_examples():
    tr = propagate(OperatorPath.constant(np.zeros((2, 2))), (0.0, 1.0), tol=TOL)
    assert dual_residual(tr) == 0.0
    S = np.array([[1.0, 0.5], [0.5, -2.0]])
    tr = propagate(OperatorPath.constant(S), (-1.0, 1.0), tol=TOL)
    assert dual_residual(tr) <= 1e-8


def test_fit_examples():
    tr = propagate(OperatorPath.constant(-np.eye(2)), (0.0, 5.0), tol=TOL, t_eval=np.linspace(0, 5, 41))
    c, lam = fit_exponential_estimate(tr)
    assert c <= 1 + 1e-6 and lam <= -1 + 1e-6
    tr = propagate(OperatorPath.constant(np.zeros((2, 2))), (0.0, 5.0), tol=TOL, t_eval=np.linspace(0, 5, 41))
    c, lam = fit_exponential_estimate(tr)
    assert c == pytest.approx(1.0, abs=1e-9) and lam == pytest.approx(0.0, abs=1e-9)


def test_variation_of_constants_examples():
    A = smooth_path(3, n=2)
    assert variation_of_constants_residual(A, A, (-1.0, 1.0)) <= 1e-9
    Z = OperatorPath.constant(np.zeros((1, 1)))
    B = OperatorPath.constant(np.ones((1, 1)))
    assert variation_of_constants_residual(Z, B, (0.0, 1.0)) <= 1e-6


def test_variation_of_constants_converges_under_refinement():
    A, B = smooth_path(5, n=2), smooth_path(6, n=2)
    coarse = variation_of_constants_residual(A, B, (-1.0, 1.0), points=51)
    fine = variation_of_constants_residual(A, B, (-1.0, 1.0), points=401)
    assert fine < coarse
    assert fine <= 1e-6


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_against_reference_integrator(seed):
    p = smooth_path(seed)
    ts = [-3.0, -1.5, 0.7, 2.0, 3.0]
    tr = propagate(p, (-3.0, 3.0), tol=TOL, t_eval=ts)
    ref = reference_propagator(p, ts)
    for t in ts:
        X = tr.at(t)[0]
        assert np.linalg.norm(X - ref[t], 2) <= 50 * TOL * (1 + np.linalg.norm(ref[t], 2))


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_algebraic_laws(seed):
    p = smooth_path(seed)
    tr = propagate(p, (-3.0, 3.0), tol=TOL, t_eval=[-1.0, 0.5, 1.5, 2.0])
    assert cocycle_residual(tr, 0.5, 1.5) <= 50 * TOL * 10
    assert cocycle_residual(tr, -1.0, 2.0) <= 50 * TOL * 10
    assert dual_residual(tr) <= 50 * TOL * 10
    assert all(abs(np.linalg.det(X)) > 0 for X in tr.X)
    # X X^{-1} = I up to tol times the conditioning of X along the window
    cond = max(np.linalg.norm(X, 2) * np.linalg.norm(Y, 2) for X, Y in zip(tr.X, tr.Xinv))
    assert inverse_residual(tr) <= 50 * TOL * cond


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_group_law(seed):
    tr = propagate(smooth_path(seed, scale=0.5), (-3.0, 3.0), tol=1e-11)
    assert inverse_residual(tr) <= 1e-9


def test_residuals_shrink_with_tolerance():
    p = smooth_path(11)
    loose = propagate(p, (-3.0, 3.0), tol=1e-6, t_eval=[1.0, 2.5])
    tight = propagate(p, (-3.0, 3.0), tol=1e-10, t_eval=[1.0, 2.5])
    assert cocycle_residual(tight, 1.0, 1.5) < cocycle_residual(loose, 1.0, 1.5)


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_gronwall_cap(seed):
    p = smooth_path(seed)
    tr = propagate(p, (0.0, 3.0), tol=1e-8, t_eval=np.linspace(0, 3, 31))
    _, lam = fit_exponential_estimate(tr)
    assert lam <= p.sup_norm(0.0, 3.0) + 1e-6


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_perturbed_rate(seed):
    rng = np.random.default_rng(seed)
    base = OperatorPath.constant(-np.eye(3), (0.0, 4.0))
    ts = np.linspace(0, 4, 33)
    c, lam = fit_exponential_estimate(propagate(base, (0.0, 4.0), tol=1e-9, t_eval=ts))
    K = rng.standard_normal((3, 3))
    K *= 0.1 / np.linalg.norm(K, 2)
    H = lambda t: np.cos(t) * K
    pert = base.plus(H)
    _, lam2 = fit_exponential_estimate(propagate(pert, (0.0, 4.0), tol=1e-9, t_eval=ts))
    assert lam2 <= lam + c * 0.1 + 1e-6
