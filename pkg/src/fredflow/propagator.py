"""Fundamental solutions of ``X' = A(t) X`` with ``X(0) = I``.

The integrator is classical RK4 with step doubling and local
extrapolation. Inverses are never formed by matrix inversion: ``Y = X^{-1}``
is integrated alongside from ``Y' = -Y A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import InputError, NumericalError
from .linalg import as_matrix, opnorm
from .spectral import is_hyperbolic

INVERTIBILITY_CAP = 1e12
TAIL_TOL = 1e-6


class OperatorPath:
    """A continuous family ``t -> A(t)`` of ``n x n`` matrices.

    Sample-defined paths interpolate piecewise-linearly and extend by the
    end samples outside their time range. A path may instead carry an exact
    evaluator ``func``; ``times`` then only records the nominal window.
    """

    def __init__(self, times, matrices=None, limit_minus=None, limit_plus=None, func=None, name=None):
        t = np.asarray(times, dtype=float).reshape(-1)
        if t.size < 2:
            raise InputError("a path needs at least two sample times")
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise InputError("sample times must be finite and strictly increasing")
        self.times = t
        self.func = func
        self.name = name
        if func is None:
            if matrices is None:
                raise InputError("either matrices or func is required")
            M = np.asarray(matrices)
            if M.ndim != 3 or M.shape[0] != t.size or M.shape[1] != M.shape[2]:
                raise InputError(f"matrices must have shape ({t.size}, n, n), got {M.shape}")
            if not np.all(np.isfinite(M)):
                raise InputError("path matrices have non-finite entries")
            self.matrices = M if np.iscomplexobj(M) else M.astype(float)
            self.n = M.shape[1]
        else:
            A0 = as_matrix(func(float(t[0])), name="A(t0)")
            self.matrices = None
            self.n = A0.shape[0]
        self.limit_minus = None if limit_minus is None else as_matrix(limit_minus, name="limit_minus")
        self.limit_plus = None if limit_plus is None else as_matrix(limit_plus, name="limit_plus")
        for L in (self.limit_minus, self.limit_plus):
            if L is not None and L.shape != (self.n, self.n):
                raise InputError("limit matrices must match the path dimension")

    @classmethod
    def constant(cls, A, window=(-1.0, 1.0), name=None):
        A = as_matrix(A)
        return cls(window, func=lambda t: A, limit_minus=A, limit_plus=A, name=name)

    @classmethod
    def from_function(cls, func, window, limit_minus=None, limit_plus=None, name=None):
        return cls(window, func=func, limit_minus=limit_minus, limit_plus=limit_plus, name=name)

    @property
    def t_min(self):
        return float(self.times[0])

    @property
    def t_max(self):
        return float(self.times[-1])

    @property
    def is_complex(self):
        if self.func is None:
            return np.iscomplexobj(self.matrices)
        return np.iscomplexobj(self(self.t_min))

    def __call__(self, t):
        if self.func is not None:
            return np.asarray(self.func(float(t)))
        ts = self.times
        if t <= ts[0]:
            return self.matrices[0]
        if t >= ts[-1]:
            return self.matrices[-1]
        i = int(np.searchsorted(ts, t, side="right")) - 1
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - w) * self.matrices[i] + w * self.matrices[i + 1]

    def sample(self, ts):
        return np.array([self(float(t)) for t in np.asarray(ts, dtype=float).reshape(-1)])

    def sup_norm(self, a=None, b=None, num=401):
        a = self.t_min if a is None else a
        b = self.t_max if b is None else b
        ts = np.linspace(a, b, num)
        if self.func is None:
            ts = np.union1d(ts, self.times[(self.times >= a) & (self.times <= b)])
        return max(opnorm(self(t)) for t in ts)

    def tail_residuals(self):
        """``(|A(t_first) - A(-inf)|, |A(t_last) - A(+inf)|)``; None if a limit is missing."""
        lo = None if self.limit_minus is None else opnorm(self(self.t_min) - self.limit_minus)
        hi = None if self.limit_plus is None else opnorm(self(self.t_max) - self.limit_plus)
        return lo, hi

    def limit_margins(self):
        out = []
        for L in (self.limit_minus, self.limit_plus):
            out.append(None if L is None else is_hyperbolic(L)[0])
        return tuple(out)

    def is_asymptotically_hyperbolic(self, tol=1e-7):
        m = self.limit_margins()
        return all(v is not None and v > tol for v in m)

    def tail_time(self, side, tail_tol=TAIL_TOL, step=0.25, limit=200.0):
        """Smallest |t| from which ``|A(t) - A(±inf)| <= tail_tol`` on sampled points.

        Searches outward from 0; the condition is checked on the whole
        remaining sampled stretch up to ``limit`` (or the last sample).
        """
        L = self.limit_plus if side > 0 else self.limit_minus
        if L is None:
            raise InputError("path has no limit on that side")
        if self.func is None:
            end = self.t_max if side > 0 else -self.t_min
            end = max(end, 0.0)
        else:
            end = limit
        ts = np.arange(0.0, end + step, step)
        res = np.array([opnorm(self(side * t) - L) for t in ts])
        bad = np.flatnonzero(res > tail_tol)
        if bad.size == 0:
            return 0.0
        if bad[-1] == ts.size - 1:
            if self.func is None:
                return float(end)
            raise NumericalError("tail never settles within the search range", side=side, limit=limit)
        return float(ts[bad[-1] + 1])

    def shifted(self, tau):
        """``A(. + tau)``."""
        return OperatorPath((self.t_min - tau, self.t_max - tau), func=lambda t: self(t + tau),
                            limit_minus=self.limit_minus, limit_plus=self.limit_plus)

    def reversed(self):
        """``t -> A(-t)``."""
        return OperatorPath((-self.t_max, -self.t_min), func=lambda t: self(-t),
                            limit_minus=self.limit_plus, limit_plus=self.limit_minus)

    def negated(self):
        neg = lambda M: None if M is None else -M
        return OperatorPath(self.times, func=lambda t: -self(t),
                            limit_minus=neg(self.limit_minus), limit_plus=neg(self.limit_plus))

    def adjoint_negated(self):
        """``t -> -A(t)^*``."""
        adj = lambda M: None if M is None else -M.conj().T
        return OperatorPath(self.times, func=lambda t: -self(t).conj().T,
                            limit_minus=adj(self.limit_minus), limit_plus=adj(self.limit_plus))

    def plus(self, other, scale=1.0, limits=None):
        """``A + scale * K`` for another path (or a callable) ``K``.

        Limits add when ``K`` is a path. A bare callable is taken to vanish at
        ``±inf`` unless ``limits = (K(-inf), K(+inf))`` is given.
        """
        K = other
        if limits is not None:
            kl, kp = (as_matrix(L) for L in limits)
        elif isinstance(K, OperatorPath):
            kl, kp = K.limit_minus, K.limit_plus
        else:
            kl = kp = np.zeros((self.n, self.n))
        lim = lambda a, b: None if a is None or b is None else a + scale * b
        return OperatorPath(self.times, func=lambda t: self(t) + scale * np.asarray(K(t)),
                            limit_minus=lim(self.limit_minus, kl), limit_plus=lim(self.limit_plus, kp),
                            name=self.name)

    def on_interval(self, a, b):
        """Reparametrize ``[a, b]`` onto ``[0, 1]``."""
        return OperatorPath((0.0, 1.0), func=lambda s: self(a + (b - a) * s),
                            limit_minus=self(a), limit_plus=self(b))

    def __repr__(self):
        kind = "function" if self.func is not None else f"{self.times.size} samples"
        return f"OperatorPath(n={self.n}, [{self.t_min}, {self.t_max}], {kind})"


def _rk4_pair(path, t, h, X, Y):
    A1 = path(t)
    Am = path(t + 0.5 * h)
    A2 = path(t + h)
    k1 = A1 @ X
    l1 = -Y @ A1
    k2 = Am @ (X + 0.5 * h * k1)
    l2 = -(Y + 0.5 * h * l1) @ Am
    k3 = Am @ (X + 0.5 * h * k2)
    l3 = -(Y + 0.5 * h * l2) @ Am
    k4 = A2 @ (X + h * k3)
    l4 = -(Y + h * l3) @ A2
    return (X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4),
            Y + h / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4))


def _integrate(path, t0, t1, X, Y, tol, h0, stops=()):
    """Adaptive RK4 from ``t0`` to ``t1`` (either direction), landing on ``stops``.

    Returns lists of (t, X, Y) at every accepted step plus the max local
    error estimate.
    """
    direction = 1.0 if t1 >= t0 else -1.0
    stops = sorted({float(s) for s in stops if (s - t0) * direction > 0 and (t1 - s) * direction >= 0} | {float(t1)},
                   key=lambda s: direction * s)
    out = []
    t = t0
    h = abs(h0)
    max_err = 0.0
    for target in stops:
        while direction * (target - t) > 1e-14 * (1 + abs(t)):
            rem = abs(target - t)
            step = min(h, rem)
            if rem - step <= 1e-9 * (1.0 + abs(t)):
                # absorb a sliver before the stop instead of stepping into it
                step = rem
            if step < 1e-12 * (1.0 + abs(t)):
                raise NumericalError("step size underflow", t=t, step=step)
            s = direction * step
            Xb, Yb = _rk4_pair(path, t, s, X, Y)
            Xh, Yh = _rk4_pair(path, t, 0.5 * s, X, Y)
            Xh, Yh = _rk4_pair(path, t + 0.5 * s, 0.5 * s, Xh, Yh)
            ex = np.linalg.norm(Xh - Xb) / (15.0 * max(1.0, np.linalg.norm(Xh)))
            ey = np.linalg.norm(Yh - Yb) / (15.0 * max(1.0, np.linalg.norm(Yh)))
            err = max(ex, ey)
            if err <= tol:
                # local extrapolation: fifth-order combination
                X = Xh + (Xh - Xb) / 15.0
                Y = Yh + (Yh - Yb) / 15.0
                t = target if step == abs(target - t) else t + s
                out.append((t, X, Y))
                max_err = max(max_err, err)
                grow = 0.9 * (tol / err) ** 0.2 if err > 0 else 4.0
                h = step * min(4.0, max(0.2, grow))
            else:
                h = step * max(0.1, 0.9 * (tol / err) ** 0.2)
    return out, max_err, h


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of ``X_A`` and ``X_A^{-1}`` on a grid containing 0."""

    path: OperatorPath
    times: np.ndarray
    X: np.ndarray
    Xinv: np.ndarray
    tol: float
    max_local_error: float
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[1]

    @property
    def window(self):
        return float(self.times[0]), float(self.times[-1])

    def index_of(self, t, atol=1e-12):
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) <= atol * (1 + abs(t)):
            return i
        return None

    def at(self, t):
        """``(X(t), X(t)^{-1})``, integrating a short hop if ``t`` is off-grid."""
        a, b = self.window
        if not a - 1e-12 <= t <= b + 1e-12:
            raise InputError(f"time {t} outside trajectory window [{a}, {b}]")
        i = self.index_of(t)
        if i is not None:
            return self.X[i], self.Xinv[i]
        i = int(np.argmin(np.abs(self.times - t)))
        steps, _, _ = _integrate(self.path, float(self.times[i]), float(t), self.X[i], self.Xinv[i],
                                 self.tol, abs(t - self.times[i]))
        return steps[-1][1], steps[-1][2]

    def transition(self, t, s):
        """``X(t) X(s)^{-1}``."""
        return self.at(t)[0] @ self.at(s)[1]


def propagate(path, window, tol=1e-10, t_eval=None, h0=0.05, cond_cap=INVERTIBILITY_CAP):
    """Integrate the fundamental solution over ``window = (a, b)``.

    The stored grid contains 0, every accepted step and every point of
    ``t_eval`` inside the window.
    """
    a, b = (float(window[0]), float(window[1]))
    if not b > a:
        raise InputError("window must satisfy a < b")
    if not 1e-13 < tol < 1e-3:
        raise InputError(f"tol must lie in (1e-13, 1e-3), got {tol}")
    n = path.n
    dtype = complex if path.is_complex else float
    I = np.eye(n, dtype=dtype)
    stops = [] if t_eval is None else list(np.asarray(t_eval, dtype=float).reshape(-1))
    lo, hi = min(a, 0.0), max(b, 0.0)
    fwd, efwd, _ = _integrate(path, 0.0, hi, I, I, tol, h0, stops) if hi > 0 else ([], 0.0, h0)
    bwd, ebwd, _ = _integrate(path, 0.0, lo, I, I, tol, h0, stops) if lo < 0 else ([], 0.0, h0)
    pts = list(reversed(bwd)) + [(0.0, I, I)] + fwd
    times = np.array([p[0] for p in pts])
    X = np.array([p[1] for p in pts])
    Y = np.array([p[2] for p in pts])
    conds = np.linalg.norm(X, axis=(1, 2)) * np.linalg.norm(Y, axis=(1, 2))
    if np.max(conds) > cond_cap:
        raise NumericalError("invertibility cap exceeded", condition=float(np.max(conds)), cap=cond_cap)
    return Trajectory(path, times, X, Y, tol, max(efwd, ebwd), {"steps": len(pts) - 1, "window": (a, b)})


def cocycle_residual(traj, s, t):
    """``|X_{A(.+s)}(t) X_A(s) - X_A(t+s)|`` with a freshly integrated shifted propagator."""
    a, b = traj.window
    for v in (s, t + s):
        if not a - 1e-12 <= v <= b + 1e-12:
            raise InputError(f"time {v} outside trajectory window")
    if t == 0.0:
        shifted_t = np.eye(traj.n)
    else:
        win = (t, 0.0) if t < 0 else (0.0, t)
        sh = propagate(traj.path.shifted(s), win, tol=traj.tol, t_eval=[t])
        shifted_t = sh.at(t)[0]
    return opnorm(shifted_t @ traj.at(s)[0] - traj.at(t + s)[0])


def dual_residual(traj):
    """``max_t |(X_A(t)^{-1})^* - X_{-A^*}(t)|`` over the trajectory grid."""
    dual = propagate(traj.path.adjoint_negated(), traj.window, tol=traj.tol, t_eval=traj.times)
    worst = 0.0
    for i, t in enumerate(traj.times):
        worst = max(worst, opnorm(traj.Xinv[i].conj().T - dual.at(float(t))[0]))
    return worst


def inverse_residual(traj):
    """``max_t |X(t) X(t)^{-1} - I|`` over the grid."""
    I = np.eye(traj.n)
    return max(opnorm(traj.X[i] @ traj.Xinv[i] - I) for i in range(traj.times.size))


def fit_exponential_estimate(traj, max_points=60, forward=True):
    """Fit ``|X(t) X(s)^{-1}| <= c exp(lam (t - s))`` over sampled pairs ``t >= s``.

    Least squares on the logarithm, then ``c`` is inflated by the largest
    residual so the bound holds on every sampled pair. With
    ``forward=False`` pairs ``t <= s`` are used with ``|t - s|``.
    """
    if traj.times.size < 10:
        raise InputError("need at least 10 grid points for a fit")
    idx = np.unique(np.linspace(0, traj.times.size - 1, min(max_points, traj.times.size)).round().astype(int))
    ts = traj.times[idx]
    d, y = [], []
    for i, ti in enumerate(ts):
        for j, sj in enumerate(ts):
            if (forward and ti > sj) or (not forward and ti < sj):
                nrm = opnorm(traj.X[idx[i]] @ traj.Xinv[idx[j]])
                d.append(abs(ti - sj))
                y.append(np.log(nrm))
    d = np.array(d)
    y = np.array(y)
    if d.size < 2 or np.ptp(d) == 0:
        raise InputError("degenerate grid for exponential fit")
    Amat = np.column_stack([d, np.ones_like(d)])
    (lam, logc), *_ = np.linalg.lstsq(Amat, y, rcond=None)
    logc += max(0.0, float(np.max(y - (lam * d + logc))))
    return float(np.exp(logc)), float(lam)


def variation_of_constants_residual(A, B, window=(0.0, 1.0), tol=1e-11, points=401):
    """Gap between ``X_B`` and the variation-of-constants formula built from ``X_A``."""
    a, b = window
    ts = np.linspace(a, b, points)
    if not (a <= 0.0 <= b):
        raise InputError("window must contain 0")
    TA = propagate(A, (a, b), tol=tol, t_eval=ts)
    TB = propagate(B, (a, b), tol=tol, t_eval=ts)
    XA = np.array([TA.at(t)[0] for t in ts])
    YA = np.array([TA.at(t)[1] for t in ts])
    XB = np.array([TB.at(t)[0] for t in ts])
    D = np.array([B(t) - A(t) for t in ts])
    integrand = np.einsum("kij,kjl,klm->kim", YA, D, XB)
    i0 = int(np.argmin(np.abs(ts)))
    cum = cumulative_simpson(integrand, x=ts, axis=0, initial=0.0)
    cum = cum - cum[i0]
    rhs = XA + np.einsum("kij,kjl->kil", XA, cum)
    return float(np.max(np.linalg.norm(XB - rhs, ord=2, axis=(1, 2))))
