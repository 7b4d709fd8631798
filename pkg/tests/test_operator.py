import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from fredflow.errors import InputError, NonHyperbolicError
from fredflow.grassmann import Projector, intersection, subspace_sum
from fredflow.operator import (_assemble_matrix, assemble, boundary_maps, near_kernel,
                               numeric_index, orthogonal_projectors, range_membership,
                               right_inverse_apply, smallest_singular)
from fredflow.presets import battery_member, rotation, scalar_tanh, tanh_diag
from fredflow.propagator import OperatorPath

sech = lambda t: 1.0 / np.cosh(t)


def neg_tanh():
    return OperatorPath.from_function(lambda t: np.array([[-np.tanh(t)]]), (-40.0, 40.0), [[1.0]], [[-1.0]])


def test_pure_difference_operator_has_trivial_kernel():
    times = np.linspace(-5.0, 5.0, 101)
    M = _assemble_matrix(OperatorPath.constant([[0.0]]), times, times[1] - times[0]).toarray()
    s = sla.svdvals(M)
    assert s[-1] > 1e-3 * s[0]


def test_assembly_shape_and_boundary_rows():
    op = assemble(scalar_tanh(), T=20.0, h=0.1)
    assert op.matrix.shape == (op.m + 1, op.m)
    u = np.zeros(op.m)
    u[0] = 1.0
    assert (op.matrix @ u)[0] == pytest.approx(1.0 / op.h)
    u = np.zeros(op.m)
    u[-1] = 1.0
    assert (op.matrix @ u)[-1] == pytest.approx(1.0 / op.h)


def test_consistency_is_second_order():
    p = neg_tanh()
    res = []
    for h in (0.1, 0.05):
        op = assemble(p, T=20.0, h=h)
        res.append(np.max(np.abs(op.apply(sech(op.times)))))
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)


def test_kernel_matches_sech():
    op = assemble(neg_tanh(), T=20.0, h=0.02)
    dec, basis = near_kernel(op)
    assert dec.nullity == 1
    k = basis[0][:, 0]
    exact = sech(op.times)
    k = k * (exact @ k) / (k @ k)
    assert np.max(np.abs(k - exact)) / np.max(exact) <= 1e-4


@pytest.mark.parametrize("path, expected", [
    (scalar_tanh(), (0, 1, -1)),
    (neg_tanh(), (1, 0, 1)),
    (tanh_diag(), (1, 1, 0)),
])
def test_index_examples(path, expected):
    rep = numeric_index(assemble(path))
    assert (rep.ker_dim, rep.coker_dim, rep.index) == expected
    assert rep.pair_index == expected[2] and rep.match and rep.reliable
    assert rep.gap_ratio >= 10


def test_sparse_rank_matches_dense_svd():
    for path in (scalar_tanh(), neg_tanh(), tanh_diag(), battery_member(7, 1)):
        op = assemble(path, T=12.0, h=0.1)
        dense = sla.svdvals(op.matrix.toarray())
        nullity = int(np.count_nonzero(dense <= 1e-8 * dense[0]))
        s, _, smax = smallest_singular(op.matrix, nullity + 2)
        assert smax == pytest.approx(dense[0], rel=1e-6)
        # the iteration stops once the values up to the cut agree to 1e-3
        want = np.sort(dense)[:nullity + 1]
        assert np.allclose(s[:nullity + 1], want, rtol=1e-2, atol=1e-8 * dense[0])
        assert near_kernel(op)[0].nullity == nullity


def test_assembly_rejections():
    with pytest.raises(NonHyperbolicError):
        assemble(rotation())
    with pytest.raises(InputError):
        assemble(scalar_tanh(), T=3.0)
    with pytest.raises(InputError):
        assemble(scalar_tanh(), T=20.0, h=0.5)


def test_index_robust_to_grid_and_window():
    p = tanh_diag()
    base = numeric_index(assemble(p, T=20.0, h=0.1), predict=False)
    finer = numeric_index(assemble(p, T=20.0, h=0.05), predict=False)
    wider = numeric_index(assemble(p, T=25.0, h=0.1), predict=False)
    assert base.ker_dim == finer.ker_dim == wider.ker_dim
    assert base.coker_dim == finer.coker_dim == wider.coker_dim


@settings(max_examples=6)
@given(st.integers(0, 49))
def test_kernel_and_surjectivity_characterizations(index):
    p = battery_member(3, index)
    rep = numeric_index(assemble(p))
    Ws, Wu, _, _ = orthogonal_projectors(p)
    assert rep.ker_dim == intersection(Ws, Wu).dim
    assert (rep.coker_dim == 0) == (subspace_sum(Ws, Wu).dim == p.n)
    assert rep.index == rep.pair_index


def test_right_inverse_closed_forms():
    stable = OperatorPath.constant([[-1.0]], (-40.0, 40.0))
    sol = right_inverse_apply(stable, np.eye(1), lambda t: np.array([np.exp(-t)]))
    t = sol.times
    assert np.max(np.abs(sol.values[:, 0] - t * np.exp(-t))) <= 1e-5
    assert sol.defect <= 1e-5 and sol.envelope_ok
    unstable = OperatorPath.constant([[1.0]], (-40.0, 40.0))
    sol = right_inverse_apply(unstable, np.zeros((1, 1)), lambda t: np.array([np.exp(-t)]))
    assert np.max(np.abs(sol.values[:, 0] + 0.5 * np.exp(-sol.times))) <= 1e-5
    assert sol.defect <= 1e-5
    sol = right_inverse_apply(stable, np.eye(1), lambda t: np.zeros(1))
    assert np.max(np.abs(sol.values)) == 0.0


def test_right_inverse_general_defect():
    p = battery_member(7, 3)
    _, _, Ps, _ = orthogonal_projectors(p)
    rng = np.random.default_rng(1)
    v = rng.standard_normal(p.n)
    dt = 0.01
    sol = right_inverse_apply(p, Ps, lambda t: np.exp(-t) * np.cos(2 * t) * v, dt=dt)
    assert sol.defect <= 10 * (dt ** 2 + 1e-10)
    assert sol.envelope_ok


def test_right_inverse_rejects_wrong_projector():
    p = OperatorPath.constant(np.diag([-1.0, 1.0]), (-40.0, 40.0))
    with pytest.raises(InputError):
        right_inverse_apply(p, np.diag([0.0, 1.0]), lambda t: np.zeros(2))


def test_boundary_maps_examples():
    p = OperatorPath.constant(np.diag([-1.0, 1.0]), (-40.0, 40.0))
    zero = lambda t: np.zeros(2)
    bm = boundary_maps(p, zero, zero)
    assert np.allclose(bm.r_plus, 0.0) and np.allclose(bm.r_minus, 0.0)
    scalar = OperatorPath.constant([[-1.0]], (-40.0, 40.0))
    bm = boundary_maps(scalar, lambda t: np.array([np.exp(-t)]), lambda t: np.zeros(1))
    assert abs(bm.r_plus[0]) <= 1e-9
    bm = boundary_maps(p, zero, zero, witness=True)
    assert len(bm.witnesses) == 1
    w = bm.witnesses[0]
    assert abs(abs(w["target"][1]) - 1.0) <= 1e-12
    assert w["error"] <= 1e-6


def test_range_membership_round_trip():
    p = battery_member(7, 1)
    rng = np.random.default_rng(2)
    v = rng.standard_normal(p.n)
    u = lambda t: sech(t) ** 2 * v
    du = lambda t: -2.0 * sech(t) ** 2 * np.tanh(t) * v
    h = lambda t: du(t) - p(t) @ u(t)
    res = range_membership(p, h)
    assert res.member
    exact = np.array([u(t) for t in res.times])
    assert np.max(np.abs(res.solution - exact)) <= 1e-6


def test_range_membership_scalar_tanh():
    p = scalar_tanh()
    res = range_membership(p, lambda t: np.array([np.exp(-4 * (t - 1) ** 2)]))
    assert not res.member
    res = range_membership(p, lambda t: np.zeros(1))
    assert res.member and np.max(np.abs(res.solution)) == 0.0
