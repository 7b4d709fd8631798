"""The operator ``F_A u = u' - A(t) u`` on decaying functions.

``assemble`` discretizes it on ``[-T, T]`` with the implicit midpoint rule
and zero Dirichlet rows at both ends. The kernel of ``F_A`` shows up as
singular values of the assembled matrix that are exponentially small in
``T``; the cokernel is read off the same construction for ``-A^*``.

Green kernels are applied on half lines by recursive trapezoid
convolutions along the invariant bundles ``X(t) W^s`` and ``X(t) ker P_s``,
so no fundamental matrix is ever formed over a long interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, NonHyperbolicError, NumericalError
from .grassmann import Projector, Subspace, delta1, pair_index
from .invariant import _block_transitions, stable_space_limit, unstable_space
from .linalg import DEFAULT_RANK_TOL, opnorm, strip_imag
from .propagator import TAIL_TOL

KERNEL_DECAY = 1e-10
MAX_WINDOW = 40.0
MIN_WINDOW = 10.0
GAP_RATIO_MIN = 10.0


def _grid_step_cap(path, T):
    sup = path.sup_norm(-T, T)
    return min(0.1, 1.0 / (4.0 * sup)) if sup > 0 else 0.1


def default_window(path, tail_tol=TAIL_TOL):
    """Half-width ``T`` past both tails with ``exp(-nu T)`` below ``KERNEL_DECAY``."""
    lo, hi = path.limit_margins()
    nu = min(lo, hi)
    T = max(path.tail_time(-1, tail_tol), path.tail_time(+1, tail_tol)) + 2.0
    T = max(T, math.log(1.0 / KERNEL_DECAY) / nu, MIN_WINDOW)
    return float(min(math.ceil(T), MAX_WINDOW))


@dataclass(frozen=True, eq=False)
class GridOperator:
    """Assembled midpoint discretization of ``F_A`` on ``[-T, T]``."""

    path: object
    T: float
    h: float
    times: np.ndarray
    matrix: sp.csr_matrix
    tail_tol: float = TAIL_TOL

    @property
    def n(self):
        return self.path.n

    @property
    def m(self):
        return self.times.size

    def apply(self, u):
        """Midpoint rows only: ``(m - 1, n)`` residuals of a grid function ``u``."""
        u = np.asarray(u).reshape(self.m, self.n)
        mid = self._mid
        du = (u[1:] - u[:-1]) / self.h
        av = 0.5 * (u[1:] + u[:-1])
        return du - np.einsum("tij,tj->ti", mid, av)

    @property
    def _mid(self):
        tm = 0.5 * (self.times[1:] + self.times[:-1])
        return self.path.sample(tm)


def _assemble_matrix(path, times, h):
    n = path.n
    m = times.size
    tm = 0.5 * (times[1:] + times[:-1])
    mid = path.sample(tm)
    I = np.eye(n)
    left = -I / h - 0.5 * mid          # block acting on u_i
    right = I / h - 0.5 * mid          # block acting on u_{i+1}
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    rows, cols, vals = [], [], []
    blk = np.arange(m - 1)
    for B, off in ((left, 0), (right, 1)):
        rows.append(((blk + 1)[:, None, None] * n + ii[None]).ravel())
        cols.append(((blk + off)[:, None, None] * n + jj[None]).ravel())
        vals.append(B.ravel())
    # Dirichlet rows, scaled like the difference rows
    for brow, bcol in ((0, 0), (m, m - 1)):
        rows.append(brow * n + np.arange(n))
        cols.append(bcol * n + np.arange(n))
        vals.append(np.full(n, 1.0 / h))
    data = np.concatenate(vals)
    shape = (n * (m + 1), n * m)
    return sp.csr_matrix((data, (np.concatenate(rows), np.concatenate(cols))), shape=shape)


def assemble(path, T=None, h=None, tail_tol=TAIL_TOL):
    """Assemble ``F_A`` on ``[-T, T]`` with step at most ``h``."""
    if not path.is_asymptotically_hyperbolic():
        raise NonHyperbolicError("path limits are not hyperbolic", margins=path.limit_margins())
    if T is None:
        T = default_window(path, tail_tol)
    else:
        T = float(T)
        if not T > 0:
            raise InputError("window half-width must be positive")
        lo = opnorm(path(-T) - path.limit_minus)
        hi = opnorm(path(T) - path.limit_plus)
        if max(lo, hi) > tail_tol:
            raise InputError("window too small: tail residual above tail-tol",
                             T=T, residual_minus=lo, residual_plus=hi, tail_tol=tail_tol)
    cap = _grid_step_cap(path, T)
    if h is None:
        h = cap
    elif not 0 < h <= cap * (1 + 1e-12):
        raise InputError(f"grid step must lie in (0, {cap:.6g}]", h=h)
    m = int(math.ceil(2.0 * T / h - 1e-9)) + 1
    times = np.linspace(-T, T, m)
    h = float(times[1] - times[0])
    return GridOperator(path, T, h, times, _assemble_matrix(path, times, h), tail_tol)


def _sigma_max(M):
    """Largest singular value via ARPACK (deterministic start vector)."""
    if M.nnz == 0:
        return 0.0
    if min(M.shape) < 3:
        return float(np.linalg.norm(M.toarray(), 2))
    v0 = np.ones(min(M.shape)) / math.sqrt(min(M.shape))
    s = spla.svds(M, k=1, which="LM", v0=v0, return_singular_vectors=False, tol=1e-10)
    return float(s[0])


def smallest_singular(M, k, rel_tol=DEFAULT_RANK_TOL, max_iter=60, seed=0):
    """``k`` smallest singular values (ascending) and right vectors of sparse ``M``.

    Shifted block inverse iteration with ``(M^* M + mu^2)^{-1}``, ``mu`` the
    rank threshold, applied through the augmented system
    ``[[I, M], [M^*, -mu^2 I]]`` so ``M^* M`` is never formed. The shift
    caps the amplification: directions far below the threshold are boosted
    alike instead of one of them swamping the block. Singular values come
    from a Rayleigh-Ritz step on ``M`` itself.
    """
    M = sp.csc_matrix(M)
    p, q = M.shape
    k = min(k, q)
    smax = _sigma_max(M)
    mu2 = (rel_tol * smax) ** 2
    K = sp.bmat([[sp.identity(p, dtype=M.dtype, format="csc"), M],
                 [M.conj().T, -mu2 * sp.identity(q, format="csc")]], format="csc")
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise NumericalError("augmented system factorization failed", cause=str(exc)) from exc
    rng = np.random.default_rng(seed)
    V, _ = np.linalg.qr(rng.standard_normal((q, k)))
    threshold = rel_tol * smax
    prev = None
    for it in range(max_iter):
        rhs = np.zeros((p + q, k), dtype=np.result_type(M.dtype, float))
        rhs[p:] = -V
        Z = lu.solve(rhs)[p:]
        if not np.all(np.isfinite(Z)):
            raise NumericalError("inverse iteration produced non-finite values")
        V, _ = np.linalg.qr(Z)
        _, s, Wh = np.linalg.svd(M @ V, full_matrices=False)
        V = V @ Wh.conj().T
        s, V = s[::-1], V[:, ::-1]
        # only the values up to the first one above the cut matter
        j = min(int(np.count_nonzero(s <= threshold)) + 1, k)
        if prev is not None and it >= 3 and np.all(np.abs(s[:j] - prev[:j]) <= 1e-3 * (s[:j] + threshold)):
            break
        prev = s
    return s, V, smax


@dataclass(frozen=True)
class CutDecision:
    """Rank cut among the smallest singular values of a tall matrix."""

    nullity: int
    threshold: float
    sigma_max: float
    smallest: tuple
    gap_ratio: float


def _cut(s, smax, rel_tol):
    threshold = rel_tol * smax
    null = int(np.count_nonzero(s <= threshold))
    if null == len(s):
        gap = float("nan")
    elif null == 0:
        gap = float(s[0] / threshold) if threshold > 0 else float("inf")
    else:
        gap = float(s[null] / max(s[null - 1], 1e-300))
    return CutDecision(null, threshold, smax, tuple(float(v) for v in s), gap)


def near_kernel(op, rel_tol=DEFAULT_RANK_TOL, seed=0):
    """Numerical kernel of the assembled matrix: ``(decision, basis)``.

    ``basis`` has shape ``(nullity, m, n)``: one grid function per direction.
    """
    s, V, smax = smallest_singular(op.matrix, op.n + 2, rel_tol, seed=seed)
    d = _cut(s, smax, rel_tol)
    B = V[:, :d.nullity].T.reshape(d.nullity, op.m, op.n)
    return d, strip_imag(B)


@dataclass(frozen=True, eq=False)
class IndexReport:
    ker_dim: int
    coker_dim: int
    index: int
    gap_ratio: float
    reliable: bool
    T: float
    h: float
    m: int
    kernel: CutDecision
    cokernel: CutDecision
    pair_index: int | None = None
    match: bool | None = None
    kernel_basis: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "ker": self.ker_dim, "coker": self.coker_dim, "index": self.index,
            "pair_index": self.pair_index, "match": self.match,
            "gap_ratio": self.gap_ratio, "reliable": self.reliable,
            "window": [-self.T, self.T], "h": self.h, "grid_points": self.m,
        }


def numeric_index(op, rel_tol=DEFAULT_RANK_TOL, predict=True, horizon=60, ode_tol=1e-10):
    """Kernel and cokernel dimensions of the assembled operator.

    The cokernel is the kernel of the discretization of ``-A^*`` on the
    same grid. With ``predict`` the pair index of the computed stable and
    unstable spaces is attached together with the match flag.
    """
    kd, kb = near_kernel(op, rel_tol)
    adj = GridOperator(op.path.adjoint_negated(), op.T, op.h, op.times,
                       _assemble_matrix(op.path.adjoint_negated(), op.times, op.h), op.tail_tol)
    cd, _ = near_kernel(adj, rel_tol)
    gaps = [g for g in (kd.gap_ratio, cd.gap_ratio) if not math.isnan(g)]
    gap = min(gaps) if gaps else float("nan")
    reliable = bool(gaps) and len(gaps) == 2 and gap >= GAP_RATIO_MIN
    index = kd.nullity - cd.nullity
    pi = match = None
    if predict:
        Ws = stable_space_limit(op.path, horizon, ode_tol, with_certificate=False)
        Wu = unstable_space(op.path, horizon, ode_tol)
        pi = pair_index(Ws, Wu).index
        match = pi == index
    return IndexReport(kd.nullity, cd.nullity, index, gap, reliable, op.T, op.h, op.m,
                       kd, cd, pi, match, kb)


# ---------------------------------------------------------------------------
# Green kernels on half lines


def _as_grid_values(hfn, t, n):
    if callable(hfn):
        vals = np.array([np.asarray(hfn(float(s))).reshape(-1) for s in t])
    else:
        ht, hv = hfn
        hv = np.asarray(hv).reshape(len(ht), -1)
        vals = np.stack([np.interp(t, ht, hv[:, j], right=0.0) for j in range(hv.shape[1])], axis=1)
    if vals.shape != (t.size, n):
        raise InputError(f"forcing must take values in dimension {n}")
    return vals


def _bundle_projectors(path, Ps, t, Phi, Phinv, horizon, ode_tol):
    """Projectors onto ``X(t) W^s`` along ``X(t) ker P_s`` at the grid times."""
    n = path.n
    N = t.size - 1
    k = Ps.rank
    if k == 0:
        return np.zeros((N + 1, n, n))
    if k == n:
        return np.broadcast_to(np.eye(n), (N + 1, n, n)).copy()
    Ws_end = stable_space_limit(path.shifted(t[-1]), horizon, ode_tol, with_certificate=False)
    if Ws_end.dim != k:
        raise InputError("rank of P_s differs from the stable dimension", rank=k, dim=Ws_end.dim)
    Bs = np.empty((N + 1, n, k))
    Bs[N] = Ws_end.basis
    for i in range(N - 1, -1, -1):
        Bs[i] = np.linalg.qr(Phinv[i] @ Bs[i + 1])[0]
    if delta1(Subspace(strip_imag(Bs[0])), Ps.range()) > 1e-6:
        raise InputError("P_s does not project onto the stable space")
    Bu = np.empty((N + 1, n, n - k))
    Bu[0] = Ps.kernel().basis
    for i in range(N):
        Bu[i + 1] = np.linalg.qr(Phi[i] @ Bu[i])[0]
    B = np.concatenate([Bs, Bu], axis=2)
    Binv = np.linalg.inv(B)
    return np.einsum("tik,tkj->tij", Bs, Binv[:, :k, :])


@dataclass(frozen=True, eq=False)
class GreenSolution:
    """Output of :func:`right_inverse_apply` on the grid ``times``."""

    times: np.ndarray
    values: np.ndarray
    defect: float
    envelope_ok: bool
    envelope: np.ndarray = field(repr=False)
    _Phi: np.ndarray = field(repr=False, default=None)
    _P: np.ndarray = field(repr=False, default=None)

    @property
    def at_zero(self):
        return self.values[0]

    def homogeneous(self, xi):
        """``X(t) xi`` on the grid for ``xi`` in the stable space."""
        y = np.empty((self.times.size, xi.size), dtype=np.result_type(xi, self._Phi))
        y[0] = self._P[0] @ xi
        for i in range(self.times.size - 1):
            y[i + 1] = self._P[i + 1] @ (self._Phi[i] @ y[i])
        return y


def _green_pass(path, Ps, L, dt, hvals_fn, horizon, ode_tol):
    N = int(round(L / dt))
    t = np.linspace(0.0, N * dt, N + 1)
    Phi = _block_transitions(path.sample, t, dt, 1, backward=False)
    Phinv = np.linalg.inv(Phi)
    P = _bundle_projectors(path, Ps, t, Phi, Phinv, horizon, ode_tol)
    Q = np.eye(path.n) - P
    hv = hvals_fn(t)
    ph = np.einsum("tij,tj->ti", P, hv)
    qh = np.einsum("tij,tj->ti", Q, hv)
    half = 0.5 * dt
    J = np.zeros_like(ph)
    for i in range(N):
        J[i + 1] = P[i + 1] @ (Phi[i] @ (J[i] + half * ph[i])) + half * ph[i + 1]
    K = np.zeros_like(qh)
    for i in range(N - 1, -1, -1):
        K[i] = Q[i] @ (Phinv[i] @ (K[i + 1] + half * qh[i + 1])) + half * qh[i]
    return t, J - K, hv, Phi, P


def _exp_envelope(a, lam, dt):
    """``∫ exp(-lam |t - s|) a(s) ds`` on the grid by trapezoid recursions."""
    N = a.size - 1
    e = math.exp(-lam * dt)
    F = np.zeros_like(a)
    G = np.zeros_like(a)
    for i in range(N):
        F[i + 1] = e * (F[i] + 0.5 * dt * a[i]) + 0.5 * dt * a[i + 1]
    for i in range(N - 1, -1, -1):
        G[i] = e * (G[i + 1] + 0.5 * dt * a[i + 1]) + 0.5 * dt * a[i]
    return F + G


def _kernel_constant(Phi, P, lam, dt):
    """Bound ``c`` with ``|G(t_j, t_i)| <= c exp(-lam |t_j - t_i|)`` on the grid.

    Uses submultiplicativity over cells: cumulative log-gains of the cell
    maps restricted to each bundle, then a running minimum.
    """
    N = Phi.shape[0]
    Q = np.eye(P.shape[1]) - P
    gs = np.array([opnorm(Phi[i] @ P[i]) / max(opnorm(P[i]), 1e-300) if opnorm(P[i]) > 0 else 0.0
                   for i in range(N)])
    Phinv = np.linalg.inv(Phi)
    gu = np.array([opnorm(Phinv[i] @ Q[i + 1]) / max(opnorm(Q[i + 1]), 1e-300) if opnorm(Q[i + 1]) > 0 else 0.0
                   for i in range(N)])
    pn = max(float(np.max(np.linalg.norm(P, 2, axis=(1, 2)))), float(np.max(np.linalg.norm(Q, 2, axis=(1, 2)))))
    best = 0.0
    for g, forward in ((gs, True), (gu, False)):
        if not np.any(g > 0):
            continue
        lg = np.log(np.maximum(g, 1e-300)) + lam * dt
        seq = lg if forward else lg[::-1]
        S = np.concatenate([[0.0], np.cumsum(seq)])
        run_min = np.minimum.accumulate(S)
        best = max(best, float(np.max(S - run_min)))
    return pn * pn * math.exp(best)


def right_inverse_apply(path, Ps, hfn, L=30.0, dt=0.01, horizon=60, ode_tol=1e-10, envelope_rate=None):
    """``R^+ h`` on ``[0, L]``: the half-line right inverse for projector ``P_s``.

    ``hfn`` is a callable ``t -> vector`` or a pair ``(times, values)``
    (linearly interpolated, zero past the last sample). Trapezoid results on
    steps ``dt`` and ``dt/2`` are Richardson-combined. The defect
    ``|F_A u - h|`` is measured with a fourth-order difference stencil.
    """
    if not isinstance(Ps, Projector):
        Ps = Projector.from_matrix(Ps)
    if Ps.n != path.n:
        raise InputError("projector dimension does not match the path")
    if path.limit_plus is None:
        raise InputError("path needs a limit at +inf")
    margin = path.limit_margins()[1]
    if margin is None or margin <= 1e-7:
        raise NonHyperbolicError("limit at +inf is not hyperbolic", margin=margin)
    n = path.n
    hv_of = lambda t: _as_grid_values(hfn, t, n)
    t1, u1, hv1, Phi1, P1 = _green_pass(path, Ps, L, dt, hv_of, horizon, ode_tol)
    t2, u2, _, _, _ = _green_pass(path, Ps, L, dt / 2.0, hv_of, horizon, ode_tol)
    u = (4.0 * u2[::2] - u1) / 3.0
    # fourth-order central differences on the interior
    A = path.sample(t1)
    du = (-u[4:] + 8 * u[3:-1] - 8 * u[1:-3] + u[:-4]) / (12.0 * dt)
    res = du - np.einsum("tij,tj->ti", A[2:-2], u[2:-2]) - hv1[2:-2]
    defect = float(np.max(np.abs(res))) if res.size else 0.0
    lam = envelope_rate if envelope_rate is not None else 0.5 * margin
    c = _kernel_constant(Phi1, P1, lam, dt)
    env = c * _exp_envelope(np.linalg.norm(hv1, axis=1), lam, dt)
    un = np.linalg.norm(u, axis=1)
    ok = bool(np.all(un <= env * (1 + 1e-6) + 1e-10))
    return GreenSolution(t1, strip_imag(u), defect, ok, env, Phi1, P1)


def _reflected(path):
    """``s -> -A(-s)``: maps solutions on the left half line to the right one."""
    return path.reversed().negated()


def right_inverse_apply_minus(path, Pu, hfn, L=30.0, dt=0.01, horizon=60, ode_tol=1e-10):
    """``R^- h`` on ``[-L, 0]`` (returned on increasing times)."""
    n = path.n
    if callable(hfn):
        g = lambda s: -np.asarray(hfn(-s)).reshape(n)
    else:
        ht, hv = hfn
        ht = np.asarray(ht)
        g = (-ht[::-1], -np.asarray(hv).reshape(len(ht), -1)[::-1])
    sol = right_inverse_apply(_reflected(path), Pu, g, L, dt, horizon, ode_tol)
    return GreenSolution(-sol.times[::-1], sol.values[::-1], sol.defect, sol.envelope_ok,
                         sol.envelope[::-1], sol._Phi, sol._P), sol


def orthogonal_projectors(path, horizon=60, ode_tol=1e-10):
    """``(W^s, W^u, P_s, P_u)`` with orthogonal projectors (complements ``⊥``)."""
    Ws = stable_space_limit(path, horizon, ode_tol, with_certificate=False)
    Wu = unstable_space(path, horizon, ode_tol)
    return Ws, Wu, Projector(Ws.orthogonal_projector, 0.0), Projector(Wu.orthogonal_projector, 0.0)


def smooth_bump(center, width=0.5):
    """``C^inf`` bump supported on ``(center - width, center + width)``."""
    def phi(t):
        s = (t - center) / width
        return math.exp(-1.0 / (1.0 - s * s)) if abs(s) < 1.0 else 0.0
    return phi


@dataclass(frozen=True, eq=False)
class BoundaryMaps:
    r_plus: np.ndarray
    r_minus: np.ndarray
    witnesses: list = field(default_factory=list)


def _bump_witness(path, Ps, v, L, dt, horizon, ode_tol, centers=(1.0, 2.0, 0.75, 3.0, 1.5)):
    """Forcing ``h = phi z`` with ``r^+ h = v`` for ``v`` in ``ker P_s``.

    ``r^+ (phi z) = -(I - P_s) U z`` with ``U = ∫ phi(t) X(t)^{-1} dt``, so
    ``z = -U^{-1} v`` works whenever ``U`` is invertible.
    """
    from .propagator import propagate

    n = path.n
    for c in centers:
        phi = smooth_bump(c)
        ts = np.linspace(c - 0.5, c + 0.5, 201)
        traj = propagate(path, (0.0, c + 0.5), tol=ode_tol, t_eval=np.concatenate([[0.0], ts]))
        Xinv = np.array([traj.Xinv[traj.index_of(s)] for s in ts])
        w = np.array([phi(s) for s in ts])
        U = np.trapezoid(w[:, None, None] * Xinv, ts, axis=0)
        if np.linalg.cond(U) > 1e8:
            continue
        z = -np.linalg.solve(U, v)
        hfn = lambda t, phi=phi, z=z: phi(t) * z
        got = right_inverse_apply(path, Ps, hfn, L, dt, horizon, ode_tol).at_zero
        return {"center": c, "z": z, "target": v, "achieved": got,
                "error": float(np.linalg.norm(got - v))}
    raise NumericalError("no invertible bump found for the surjectivity witness", tried=list(centers))


def boundary_maps(path, h_plus, h_minus, Ps=None, Pu=None, witness=False, L=30.0, dt=0.01,
                  horizon=60, ode_tol=1e-10):
    """``(r^+ h^+, r^- h^-)`` with optional surjectivity witnesses onto ``ker P_s``."""
    if Ps is None or Pu is None:
        _, _, Ps0, Pu0 = orthogonal_projectors(path, horizon, ode_tol)
        Ps = Ps if Ps is not None else Ps0
        Pu = Pu if Pu is not None else Pu0
    rp = right_inverse_apply(path, Ps, h_plus, L, dt, horizon, ode_tol).at_zero
    rm = right_inverse_apply_minus(path, Pu, h_minus, L, dt, horizon, ode_tol)[0].values[-1]
    wits = []
    if witness:
        Xs = Ps.kernel()
        for j in range(Xs.dim):
            wits.append(_bump_witness(path, Ps, Xs.basis[:, j], L, dt, horizon, ode_tol))
    return BoundaryMaps(rp, rm, wits)


@dataclass(frozen=True, eq=False)
class Membership:
    member: bool
    distance: float
    difference: np.ndarray
    times: np.ndarray | None = None
    solution: np.ndarray | None = None


def range_membership(path, hfn, tol=1e-6, L=30.0, dt=0.01, horizon=60, ode_tol=1e-10):
    """Decide ``h ∈ Range F_A`` via ``r^+ h - r^- h ∈ W^s + W^u``.

    ``hfn`` is a callable on the whole line. On success the glued solution
    is returned on ``[-L, L]``.
    """
    Ws, Wu, Ps, Pu = orthogonal_projectors(path, horizon, ode_tol)
    plus = right_inverse_apply(path, Ps, hfn, L, dt, horizon, ode_tol)
    minus, refl = right_inverse_apply_minus(path, Pu, hfn, L, dt, horizon, ode_tol)
    d = plus.at_zero - minus.values[-1]
    B = np.hstack([Wu.basis, -Ws.basis])
    if B.shape[1]:
        coef, *_ = np.linalg.lstsq(B, d, rcond=None)
        dist = float(np.linalg.norm(B @ coef - d))
    else:
        coef = np.zeros(0)
        dist = float(np.linalg.norm(d))
    member = dist <= tol * (1.0 + float(np.linalg.norm(d)))
    if not member:
        return Membership(False, dist, d)
    a, b = coef[:Wu.dim], coef[Wu.dim:]
    xi_s = Ws.basis @ b
    xi_u = Wu.basis @ a
    up = plus.values + plus.homogeneous(xi_s)
    # left half: the reflected path has stable space W^u
    um = minus.values + refl.homogeneous(xi_u)[::-1]
    times = np.concatenate([minus.times[:-1], plus.times])
    sol = np.concatenate([um[:-1], up])
    return Membership(True, dist, d, times, strip_imag(sol))
