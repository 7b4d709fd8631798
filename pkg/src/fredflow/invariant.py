"""Stable and unstable spaces of asymptotically hyperbolic paths.

Two independent constructions of the stable space are provided:

* :func:`stable_space_limit` transports ``E-(A(+inf))`` backwards from a
  horizon ``T`` and stops once two consecutive horizons agree.
* :func:`stable_space_graph` solves the fixed-point problem for bounded
  solutions on a tail where ``A`` is close to its limit, reads off the graph
  operator ``S: E- -> E+`` and pulls the graph back to ``t = 0``.

Backward transport of a subspace is well conditioned here: running time
backwards expands stable directions and contracts unstable ones, so the
images are re-orthonormalized after every unit step instead of being
inverted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import CertificateError, InputError, NonHyperbolicError, NumericalError
from .grassmann import Subspace, delta1
from .linalg import opnorm, orth, strip_imag
from .propagator import OperatorPath, _integrate
from .spectral import Splitting, is_hyperbolic, spectral_projectors

STEP_TOL = 1e-12


def _qr_basis(M):
    Q, _ = np.linalg.qr(M)
    return Q


class UnitTransitions:
    """Cache of ``X_A(j) X_A(j+1)^{-1}`` and its inverse for integer ``j``."""

    def __init__(self, path, tol=STEP_TOL):
        self.path = path
        self.tol = tol
        self._cache = {}

    def get(self, j):
        """``(back, fwd)`` with ``back = X(j) X(j+1)^{-1}`` and ``fwd = back^{-1}``."""
        if j not in self._cache:
            n = self.path.n
            dtype = complex if self.path.is_complex else float
            I = np.eye(n, dtype=dtype)
            steps, _, _ = _integrate(self.path, float(j + 1), float(j), I, I, self.tol, 0.1)
            self._cache[j] = (steps[-1][1], steps[-1][2])
        return self._cache[j]

    def pull_back(self, basis, T):
        """Orthonormal basis of ``X_A(T)^{-1} span(basis)`` for integer ``T >= 0``."""
        V = basis
        for j in range(int(T) - 1, -1, -1):
            if V.shape[1] == 0:
                break
            V = _qr_basis(self.get(j)[0] @ V)
        return V

    def push_forward(self, basis, T):
        """Images ``X_A(j) basis`` for ``j = 0..T`` with norms tracked across QR steps.

        Returns ``(bases, gains)`` where ``gains[j]`` is the operator norm of
        ``X_A(j)`` restricted to ``span(basis)`` (orthonormal input assumed).
        """
        V = basis
        R_total = np.eye(basis.shape[1])
        bases = [V]
        gains = [1.0]
        for j in range(int(T)):
            Q, R = np.linalg.qr(self.get(j)[1] @ V)
            R_total = R @ R_total
            V = Q
            bases.append(V)
            gains.append(opnorm(R_total))
        return bases, gains


@dataclass(frozen=True, eq=False)
class LimitSplitting:
    """Spectral splitting of ``A(+inf)`` with orthonormal bases of ``E-``, ``E+``."""

    splitting: Splitting
    basis_minus: np.ndarray
    basis_plus: np.ndarray

    @classmethod
    def of(cls, A0):
        sp = spectral_projectors(A0)
        n = A0.shape[0]
        Vm = orth(sp.p_minus.matrix) if sp.rank_minus else np.zeros((n, 0))
        Vp = orth(sp.p_plus.matrix) if sp.rank_plus else np.zeros((n, 0))
        if Vm.shape[1] != sp.rank_minus or Vp.shape[1] != sp.rank_plus:
            raise NumericalError("spectral projector ranks are inconsistent")
        return cls(sp, strip_imag(Vm), strip_imag(Vp))

    @property
    def k(self):
        return self.basis_minus.shape[1]

    @property
    def V(self):
        return np.hstack([self.basis_minus, self.basis_plus])

    def coordinates(self, u):
        """Coordinates of ``u`` in the (non-orthogonal) basis ``[V-, V+]``."""
        return np.linalg.solve(self.V, u)


def stable_space_limit(path, horizon=60, tol=1e-10, start=1, transitions=None, with_certificate=True):
    """Stable space as the limit of ``X_A(T)^{-1} E-(A(+inf))``.

    Returns a :class:`Subspace`; ``subspace.meta`` is not available on the
    frozen dataclass, so diagnostics go through :func:`stable_space_limit_report`.
    """
    return stable_space_limit_report(path, horizon, tol, start, transitions, with_certificate)["subspace"]


def stable_space_limit_report(path, horizon=60, tol=1e-10, start=1, transitions=None, with_certificate=True):
    A0 = path.limit_plus
    if A0 is None:
        raise InputError("path has no limit at +inf")
    margin, ok = is_hyperbolic(A0)
    if not ok:
        raise NonHyperbolicError("limit at +inf is not hyperbolic", margin=margin)
    ls = LimitSplitting.of(A0)
    n = path.n
    k = ls.k
    if k == 0:
        return {"subspace": Subspace.zero(n), "T": 0, "delta": 0.0, "rate": None, "splitting": ls}
    if k == n:
        return {"subspace": Subspace.full(n), "T": 0, "delta": 0.0, "rate": None, "splitting": ls}
    tr = transitions or UnitTransitions(path)
    E = ls.basis_minus
    prev = Subspace(strip_imag(tr.pull_back(E, start)))
    T = start
    dist = None
    while True:
        if T + 1 > horizon:
            raise NumericalError("horizon exhausted before the stable space stabilized",
                                 horizon=horizon, last_delta=dist)
        cur = Subspace(strip_imag(tr.pull_back(E, T + 1)))
        dist = delta1(prev, cur)
        T += 1
        if dist < tol:
            break
        prev = cur
    rate = None
    if with_certificate:
        rate = _decay_rate(tr, cur.basis, min(T, 20))
    return {"subspace": cur, "T": T, "delta": dist, "rate": rate, "splitting": ls}


def _decay_rate(tr, W, T):
    """Fitted exponential rate of ``|X_A(t)|_W|`` on integer times up to ``T``."""
    if T < 2:
        return None
    _, gains = tr.push_forward(W, T)
    g = np.array(gains)
    t = np.arange(g.size, dtype=float)
    good = g > 1e-12
    if good.sum() < 2:
        return None
    slope, _ = np.polyfit(t[good], np.log(g[good]), 1)
    return float(-slope)


def unstable_space(path, horizon=60, tol=1e-10):
    """Unstable space, via the stable space of ``t -> -A(-t)``."""
    if path.limit_minus is None:
        raise InputError("path has no limit at -inf")
    return stable_space_limit(path.reversed().negated(), horizon, tol)


@dataclass(frozen=True, eq=False)
class DichotomyData:
    """Constants controlling the contraction argument on a tail ``[tau, inf)``."""

    limit: LimitSplitting
    c: float
    lam: float
    M: float
    tau: float
    h_norm: float
    h_pm: float
    h_mp: float
    mu_minus: float
    mu_plus: float
    nu: float
    b: float
    certificate: bool

    @property
    def bound(self):
        """Largest admissible ``|H|_inf`` on the tail."""
        return self.lam / (self.M * self.c * (1.0 + math.sqrt(self.c)))


@dataclass(frozen=True, eq=False)
class GraphOperator:
    """``S: E- -> E+`` in the orthonormal coordinates of the limit splitting."""

    S: np.ndarray
    time: float
    limit: LimitSplitting
    norm_bound: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def norm(self):
        return opnorm(self.S)

    def subspace(self):
        """``graph(S) = {x + S x}`` as a :class:`Subspace`."""
        ls = self.limit
        G = ls.basis_minus + ls.basis_plus @ self.S
        return Subspace(strip_imag(_qr_basis(G)) if G.shape[1] else np.zeros((G.shape[0], 0)))


def _semigroup_constant(ls, A0, lam, tmax, num=400):
    """``sup_t max(|e^{tA0} P-|, |e^{-tA0} P+|) e^{lam t}`` on a grid.

    Evaluated blockwise in the splitting coordinates; multiplying full
    exponentials by projectors would amplify rounding in ``P-`` by ``e^{t|A0|}``.
    """
    V = ls.V
    Vinv = np.linalg.inv(V)
    k = ls.k
    B = Vinv @ A0 @ V
    Bm, Bp = B[:k, :k], B[k:, k:]
    Vm, Vp = V[:, :k], V[:, k:]
    Wm, Wp = Vinv[:k], Vinv[k:]
    c = 1.0
    for t in np.linspace(0.0, tmax, num):
        vals = []
        if k:
            vals.append(opnorm(Vm @ sla.expm(t * Bm) @ Wm))
        if k < V.shape[0]:
            vals.append(opnorm(Vp @ sla.expm(-t * Bp) @ Wp))
        c = max(c, max(vals) * math.exp(lam * t))
    return c


def dichotomy_data(path, tau=None, tail_span=40.0, max_tau=40.0):
    """Pick ``(c, lam)`` for ``A(+inf)`` and the first integer ``tau`` where the
    smallness condition holds on ``[tau, tau + tail_span]`` (sampled).

    With an explicit ``tau`` the certificate is evaluated there and reported,
    satisfied or not.
    """
    A0 = path.limit_plus
    if A0 is None:
        raise InputError("path has no limit at +inf")
    ls = LimitSplitting.of(A0)
    sp = ls.splitting
    margin = sp.margin
    M = max(opnorm(sp.p_plus.matrix), opnorm(sp.p_minus.matrix))
    best = None
    for frac in (0.9, 0.75, 0.5, 0.25):
        lam = frac * margin
        c = _semigroup_constant(ls, A0, lam, tmax=30.0 / margin)
        score = lam / (M * c * (1.0 + math.sqrt(c)))
        if best is None or score > best[0]:
            best = (score, lam, c)
    bound, lam, c = best
    V = ls.V
    Vinv = np.linalg.inv(V)
    k = ls.k

    def tail_norms(t0):
        ts = np.arange(t0, t0 + tail_span + 1e-9, 0.1)
        H = np.array([path(t) - A0 for t in ts])
        hn = max(opnorm(h) for h in H)
        B = np.einsum("ij,tjk,kl->til", Vinv, H, V)
        h_mp = max(opnorm(b[:k, k:]) for b in B)  # E+ -> E- block
        h_pm = max(opnorm(b[k:, :k]) for b in B)  # E- -> E+ block
        return hn, h_pm, h_mp

    if tau is None:
        t0 = 0.0
        while True:
            hn, h_pm, h_mp = tail_norms(t0)
            if hn <= bound or t0 >= max_tau:
                break
            t0 += 1.0
    else:
        t0 = float(tau)
        hn, h_pm, h_mp = tail_norms(t0)
    mu_m = lam - c * hn
    mu_p = lam - c * hn
    nu = (mu_m * mu_p - c ** 3 * h_pm * h_mp) / mu_p if mu_p > 0 else float("nan")
    b = c * (1.0 + c) * opnorm(sp.p_minus.matrix) * opnorm(sp.p_plus.matrix)
    cert = bool(hn <= bound and mu_m > 0 and mu_p > 0 and nu > 0)
    return DichotomyData(ls, c, lam, M, t0, hn, h_pm, h_mp, mu_m, mu_p, nu, b, cert)


def _block_transitions(Bblk, t, h, substeps, backward):
    """One-cell transitions of ``z' = B(t) z`` for every cell ``[t_i, t_i + h]``.

    ``Bblk(times)`` returns the block at the given times, shape ``(len, m, m)``.
    Forward: ``Z(t_{i+1}) Z(t_i)^{-1}``; backward: ``Z(t_i) Z(t_{i+1})^{-1}``.
    """
    N = t.size - 1
    m = Bblk(t[:1]).shape[1]
    Tr = np.broadcast_to(np.eye(m), (N, m, m)).copy()
    d = h / substeps
    if backward:
        starts = t[1:]
        d = -d
    else:
        starts = t[:-1]
    for s in range(substeps):
        a = starts + s * d
        B1 = Bblk(a)
        B2 = Bblk(a + 0.5 * d)
        B3 = Bblk(a + d)
        k1 = B1 @ Tr
        k2 = B2 @ (Tr + 0.5 * d * k1)
        k3 = B2 @ (Tr + 0.5 * d * k2)
        k4 = B3 @ (Tr + d * k3)
        Tr = Tr + d / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return Tr


def _graph_on_grid(path, data, T_cut, h, tol, substeps=4, max_iter=500):
    """Solve the fixed-point problem on ``[0, T_cut]`` for the shifted path."""
    ls = data.limit
    k = ls.k
    V = ls.V
    Vinv = np.linalg.inv(V)
    N = int(round(T_cut / h))
    t = np.linspace(0.0, N * h, N + 1)
    cache = {}

    def B_at(times):
        out = []
        for s in np.asarray(times):
            key = round(float(s), 12)
            if key not in cache:
                cache[key] = Vinv @ path(float(s)) @ V
            out.append(cache[key])
        return np.array(out)

    Tm = _block_transitions(lambda ts: B_at(ts)[:, :k, :k], t, h, substeps, backward=False)
    Up = _block_transitions(lambda ts: B_at(ts)[:, k:, k:], t, h, substeps, backward=True)
    Bg = B_at(t)
    Bmp = Bg[:, :k, k:]
    Bpm = Bg[:, k:, :k]
    # X_{A-}(t_i) x0 for x0 running over the basis of E-
    F = np.empty((N + 1, k, k), dtype=Tm.dtype)
    F[0] = np.eye(k)
    for i in range(N):
        F[i + 1] = Tm[i] @ F[i]
    half = 0.5 * h

    def apply_L(x, y):
        fy = Bmp @ y
        J = np.empty_like(x)
        J[0] = 0.0
        for i in range(N):
            J[i + 1] = Tm[i] @ (J[i] + half * fy[i]) + half * fy[i + 1]
        fx = Bpm @ x
        K = np.empty_like(y)
        K[N] = 0.0
        for i in range(N - 1, -1, -1):
            K[i] = Up[i] @ (K[i + 1] - half * fx[i + 1]) - half * fx[i]
        return J, K

    x = F.copy()
    y = np.zeros((N + 1, V.shape[0] - k, k), dtype=F.dtype)
    tx, ty = x, y
    for it in range(max_iter):
        tx, ty = apply_L(tx, ty)
        x = x + tx
        y = y + ty
        inc = max(np.max(np.abs(tx)), np.max(np.abs(ty)))
        if inc < tol:
            return y[0], it + 1
        if not np.isfinite(inc) or inc > 1e12:
            break
    raise NumericalError("Neumann series stagnated", iterations=max_iter, last_increment=float(inc))


def stable_space_graph(path, tau=None, tol=1e-12, h=0.05, T_cut=None, richardson=True, horizon_pull=None):
    """Stable space from the graph operator on a tail, pulled back to ``t = 0``.

    Returns ``(subspace, graph_operator, dichotomy_data)``. Raises
    :class:`CertificateError` when the smallness condition fails at ``tau``.
    """
    A0 = path.limit_plus
    if A0 is None:
        raise InputError("path has no limit at +inf")
    data = dichotomy_data(path, tau)
    ls = data.limit
    n = path.n
    k = ls.k
    if k in (0, n):
        S = np.zeros((n - k, k))
        g = GraphOperator(S, 0.0, ls, 0.0)
        return g.subspace(), g, data
    if not data.certificate:
        raise CertificateError("smallness certificate violated; increase tau",
                               tau=data.tau, h_norm=data.h_norm, bound=data.bound)
    tau = data.tau
    shifted = path.shifted(tau)
    if T_cut is None:
        rate = data.nu if data.nu > 0 else data.lam
        T_cut = min(80.0, max(10.0, math.log(1e3 / tol) / rate))
    S1, it1 = _graph_on_grid(shifted, data, T_cut, h, tol)
    iters = it1
    if richardson:
        S2, it2 = _graph_on_grid(shifted, data, T_cut, h / 2.0, tol)
        S = (4.0 * S2 - S1) / 3.0
        iters = max(it1, it2)
    else:
        S = S1
    S = strip_imag(S)
    envelope = _tow_envelope(path, data, tau)
    g = GraphOperator(S, tau, ls, envelope, {"iterations": iters, "T_cut": T_cut, "h": h})
    Wtau = g.subspace()
    tr = UnitTransitions(path)
    W0 = Subspace(strip_imag(tr.pull_back(Wtau.basis, int(round(tau)))))
    return W0, g, data


def _tow_envelope(path, data, t, span=60.0, step=0.01):
    """``c^2 ∫_t^inf exp(-nu (s - t)) |H(s)| ds`` by the trapezoid rule."""
    s = np.arange(t, t + span + step / 2, step)
    hn = np.array([opnorm(path(v) - path.limit_plus) for v in s])
    w = np.exp(-data.nu * (s - t)) * hn
    return float(data.c ** 2 * np.trapezoid(w, s))


def _from_envelope(path, data, t, step=0.01):
    """``c^2 ∫_0^t exp(-nu (t - s)) |H(s)| ds``."""
    if t <= 0:
        return 0.0
    s = np.arange(0.0, t + step / 2, step)
    hn = np.array([opnorm(path(v) - path.limit_plus) for v in s])
    w = np.exp(-data.nu * (t - s)) * hn
    return float(data.c ** 2 * np.trapezoid(w, s))


def graph_evolution(path, t, W=None, transitions=None):
    """``(S(t), T(t))``: graph operators of ``X_A(t) W^s`` and ``X_A(t) E+``.

    ``t`` must be a non-negative integer time (unit transport grid).
    """
    if t < 0 or abs(t - round(t)) > 1e-12:
        raise InputError("graph_evolution expects a non-negative integer time")
    t = int(round(t))
    tr = transitions or UnitTransitions(path)
    rep = stable_space_limit_report(path, transitions=tr, with_certificate=False)
    ls = rep["splitting"]
    W = rep["subspace"] if W is None else W
    k = ls.k
    n = path.n
    if k in (0, n):
        return np.zeros((n - k, k)), np.zeros((k, n - k))
    Vinv = np.linalg.inv(ls.V)

    def graph_of(basis, top):
        imgs, _ = tr.push_forward(basis, t)
        C = Vinv @ imgs[-1]
        a, b = (C[:k], C[k:]) if top == "minus" else (C[k:], C[:k])
        s = np.linalg.svd(a, compute_uv=False)
        if s[-1] <= 1e-12 * s[0]:
            raise NumericalError("singular denominator block", condition=float(s[0] / max(s[-1], 1e-300)))
        return strip_imag(np.linalg.solve(a.T, b.T).T)

    S_t = graph_of(W.basis, "minus")
    T_t = graph_of(ls.basis_plus, "plus")
    return S_t, T_t
