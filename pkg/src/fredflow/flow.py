"""Spectral flow of paths of matrices with hyperbolic endpoints.

In finite dimension the flow is the change in rank of the positive
spectral projector between the endpoints. That endpoint count is the
authoritative method; a ledger of individual imaginary-axis crossings is
computed independently as a diagnostic and must give the same integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import IdentityViolation, InputError, NonHyperbolicError, NumericalError
from .grassmann import relative_dimension
from .linalg import as_matrix, cluster_eigenvalues, eigenvalues, opnorm
from .propagator import OperatorPath
from .spectral import HYPERBOLICITY_TOL, is_hyperbolic, spectral_projectors

AXIS_TOL = 1e-12
BISECT_TOL = 1e-9
TOUCH_TOL = 1e-7
SLOPE_TOL = 1e-6


@dataclass(frozen=True)
class Crossing:
    time: float
    eigenvalue: complex
    direction: int
    multiplicity: int


@dataclass(frozen=True, eq=False)
class FlowReport:
    sf: int
    sf_projector: int
    sf_crossing: int
    methods_agree: bool
    crossings: tuple = ()
    method: str = "projector-lift"
    delta: float | None = None
    delta_invariant: bool | None = None

    def to_dict(self):
        out = {
            "sf": self.sf, "method": self.method, "methods_agree": self.methods_agree,
            "sf_projector_lift": self.sf_projector, "sf_crossing_count": self.sf_crossing,
            "crossings": [{"time": c.time, "eigenvalue": [c.eigenvalue.real, c.eigenvalue.imag],
                           "direction": c.direction, "multiplicity": c.multiplicity}
                          for c in self.crossings],
        }
        if self.delta is not None:
            out["delta"] = self.delta
            out["delta_invariant"] = self.delta_invariant
        return out


def _counts(path, t):
    ev = eigenvalues(path(t))
    scale = AXIS_TOL * (1.0 + np.max(np.abs(ev)))
    return int(np.count_nonzero(ev.real > scale)), int(np.count_nonzero(np.abs(ev.real) <= scale))


def _clean_count(path, t, lo, hi):
    """Positive count at ``t``, nudging ``t`` inside ``(lo, hi)`` off the axis."""
    for k in range(8):
        npos, nz = _counts(path, t)
        if nz == 0:
            return t, npos
        t = t + (hi - lo) * (0.1 / (k + 1)) * (-1) ** k
        t = min(max(t, lo + 1e-3 * (hi - lo)), hi - 1e-3 * (hi - lo))
    raise NumericalError("eigenvalue lingers on the imaginary axis", time=t)


def _bisect(path, t0, t1, c0, c1, out):
    """Refine ``[t0, t1]`` until every count change sits in a bracket below ``BISECT_TOL``."""
    if c0 == c1:
        return
    if t1 - t0 <= BISECT_TOL:
        out.append((t0, t1, c0, c1))
        return
    mid, cm = _clean_count(path, 0.5 * (t0 + t1), t0, t1)
    _bisect(path, t0, mid, c0, cm, out)
    _bisect(path, mid, t1, cm, c1, out)


def _events_at(path, tc, d=1e-6):
    """Events for the eigenvalue clusters near the axis at ``tc``.

    Crossing speeds come from first-order perturbation theory: the real
    parts of the eigenvalues of ``A'(tc)`` compressed to the cluster's
    eigenspace. A zero speed is a tangential touch and is rejected.
    """
    A = as_matrix(path(tc))
    ev, V = sla.eig(A)
    width = 10 * TOUCH_TOL * (1.0 + np.max(np.abs(ev)))
    near = np.flatnonzero(np.abs(ev.real) <= width)
    if near.size == 0:
        raise NumericalError("count change without an eigenvalue near the axis", time=tc)
    dA = (np.asarray(path(tc + d)) - np.asarray(path(tc - d))) / (2 * d)
    if np.linalg.cond(V) > 1e8:
        raise NumericalError("defective eigenvalue at a crossing", time=tc)
    W = np.linalg.inv(V)
    events = []
    for center, mult in cluster_eigenvalues(ev[near], rel_radius=1e-4):
        idx = near[np.argsort(np.abs(ev[near] - center))[:mult]]
        speeds = np.linalg.eigvals(W[idx] @ dA @ V[:, idx]).real
        if np.any(np.abs(speeds) < SLOPE_TOL):
            raise NumericalError("tangential crossing rejected", time=tc, eigenvalue=complex(center))
        for direction, k in ((1, int(np.sum(speeds > 0))), (-1, int(np.sum(speeds < 0)))):
            if k:
                events.append(Crossing(float(tc), complex(center), direction, k))
    return events


def _classify(path, t0, t1, c0, c1):
    """Split a resolved bracket into events with direction and multiplicity."""
    events = _events_at(path, 0.5 * (t0 + t1))
    total = sum(e.direction * e.multiplicity for e in events)
    if total != c1 - c0:
        raise NumericalError("unresolvable crossing: ledger does not match the count change",
                             time=events[0].time, ledger=total, change=c1 - c0)
    return events


def _touches(path, ts, m, counts):
    """Crossings hidden from the count (cancelling pairs) at local minima of
    ``min |Re λ|``; tangential touches are rejected."""
    events = []
    for i in range(1, len(ts) - 1):
        if not (m[i] <= m[i - 1] and m[i] <= m[i + 1]) or m[i] > 1e-2:
            continue
        (c0, _), (c1, z1), (c2, _) = counts[i - 1:i + 2]
        if c0 != c2 or (c1 != c0 and z1 == 0):
            continue
        f = lambda t: float(np.min(np.abs(eigenvalues(path(t)).real)))
        res = minimize_scalar(f, bounds=(ts[i - 1], ts[i + 1]), method="bounded",
                              options={"xatol": 1e-10})
        if res.fun > TOUCH_TOL:
            continue
        found = _events_at(path, float(res.x))
        if sum(e.direction * e.multiplicity for e in found) != 0:
            raise NumericalError("unresolvable crossing near a sample", time=float(res.x))
        events.extend(found)
    return events


def crossing_ledger(path, interval=(0.0, 1.0), samples=201):
    """Imaginary-axis crossings of the eigenvalues on ``interval``."""
    a, b = interval
    ts = np.linspace(a, b, samples)
    clean_t, counts, m = [], [], []
    for t in ts:
        ev = eigenvalues(path(t))
        m.append(float(np.min(np.abs(ev.real))))
        npos, nz = _counts(path, t)
        if nz == 0:
            clean_t.append(t)
            counts.append(npos)
    if not clean_t or clean_t[0] != a or clean_t[-1] != b:
        raise NonHyperbolicError("endpoint spectrum meets the imaginary axis")
    events = _touches(path, ts, np.array(m), [_counts(path, t) for t in ts])
    brackets = []
    for i in range(len(clean_t) - 1):
        _bisect(path, clean_t[i], clean_t[i + 1], counts[i], counts[i + 1], brackets)
    for br in brackets:
        events.extend(_classify(path, *br))
    return sorted(events, key=lambda e: (e.time, e.eigenvalue.real, e.eigenvalue.imag))


def spectral_flow(path, interval=(0.0, 1.0), tol=HYPERBOLICITY_TOL, samples=201):
    """Spectral flow on ``interval`` by endpoint projector ranks and by crossings."""
    a, b = (float(v) for v in interval)
    if not b > a:
        raise InputError("interval must have positive length")
    ends = []
    for t in (a, b):
        A = as_matrix(path(t))
        margin, ok = is_hyperbolic(A, tol)
        if not ok:
            raise NonHyperbolicError("endpoint is not hyperbolic", time=t, margin=margin)
        ends.append(spectral_projectors(A, tol).rank_plus)
    sf_proj = ends[1] - ends[0]
    events = crossing_ledger(path, (a, b), samples)
    sf_cross = sum(e.direction * e.multiplicity for e in events)
    return FlowReport(sf_proj, sf_proj, sf_cross, sf_proj == sf_cross, tuple(events))


def _hyperbolic_outside(path, delta, end, tol, step=0.05):
    """Sampled check that ``A`` stays hyperbolic on ``|t| >= delta``.

    Every sample must be hyperbolic with the positive count of the limit on
    its side; a count change between samples would be a missed crossing.
    """
    for side, L in ((1.0, path.limit_plus), (-1.0, path.limit_minus)):
        target = int(np.count_nonzero(eigenvalues(L).real > 0))
        for t in np.arange(delta, end + step / 2, step):
            ev = eigenvalues(path(side * t))
            if np.min(np.abs(ev.real)) <= tol or np.count_nonzero(ev.real > 0) != target:
                return False
    return True


def spectral_flow_asymptotic(path, delta=None, tol=HYPERBOLICITY_TOL, checks=(2.0, 4.0), tail_tol=1e-6):
    """Spectral flow of a path on the line: ``sf`` on ``[-δ, δ]`` with ``A``
    hyperbolic outside.

    ``δ`` comes from a doubling search unless given. The value is recomputed
    for each multiple of ``δ`` in ``checks`` and must not change.
    """
    if not path.is_asymptotically_hyperbolic(tol):
        raise NonHyperbolicError("path limits are not hyperbolic", margins=path.limit_margins())
    end = max(path.tail_time(1, tail_tol), path.tail_time(-1, tail_tol)) + 1.0
    if delta is None:
        delta = 0.5
        while not _hyperbolic_outside(path, delta, max(end, delta), tol):
            delta *= 2.0
            if delta > max(end, 1.0):
                raise NonHyperbolicError("no admissible δ within the sampled window", end=end)
    else:
        delta = float(delta)
        if not _hyperbolic_outside(path, delta, max(end, delta), tol):
            raise NonHyperbolicError("path is not hyperbolic outside [-δ, δ]", delta=delta)
    base = spectral_flow(path, (-delta, delta), tol)
    invariant = True
    for k in checks:
        other = spectral_flow(path, (-k * delta, k * delta), tol)
        invariant &= other.sf == base.sf and other.methods_agree
    return FlowReport(base.sf, base.sf_projector, base.sf_crossing, base.methods_agree,
                      base.crossings, delta=delta, delta_invariant=bool(invariant))


@dataclass(frozen=True, eq=False)
class Catenation:
    path: OperatorPath
    sf_first: int
    sf_second: int
    sf_total: int


def catenate(a, b, check=True, atol=1e-10):
    """Concatenate two paths on ``[0, 1]`` into one on ``[0, 1]``.

    With ``check`` the additivity ``sf(a * b) = sf(a) + sf(b)`` is verified
    and a violation raises :class:`IdentityViolation`.
    """
    gap = opnorm(np.asarray(a(1.0)) - np.asarray(b(0.0)))
    if gap > atol:
        raise InputError("paths do not chain: a(1) != b(0)", gap=gap)
    f = lambda s: a(2.0 * s) if s <= 0.5 else b(2.0 * s - 1.0)
    c = OperatorPath((0.0, 1.0), func=f, limit_minus=a(0.0), limit_plus=b(1.0))
    if not check:
        return Catenation(c, None, None, None)
    sa, sb, sc = (spectral_flow(p).sf for p in (a, b, c))
    if sc != sa + sb:
        raise IdentityViolation("spectral flow is not additive under catenation",
                                {"sf_a": sa, "sf_b": sb, "sf_ab": sc})
    return Catenation(c, sa, sb, sc)


def smooth_step(x):
    """``C^inf`` step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    def f(y):
        return math.exp(-1.0 / y) if y > 0 else 0.0
    x = float(x)
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return f(x) / (f(x) + f(1.0 - x))


def patch_profile(t):
    """1 on ``[-1/2, 1/2]``, -1 outside ``(-1, 1)``, smooth in between."""
    return 1.0 - 2.0 * smooth_step(2.0 * abs(t) - 1.0)


def patch_path(X, Y, window=(-40.0, 40.0)):
    """Path with stable space ``X`` and unstable space ``Y``.

    With ``P``, ``Q`` the orthogonal projectors onto ``X``, ``Y``:
    ``A = φ P + (I - P)`` for ``t >= 0`` and ``A = φ (I - Q) + Q`` for
    ``t < 0``. The limits are ``I - 2P`` and ``2Q - I``.
    """
    if X.n != Y.n:
        raise InputError("subspaces live in different spaces")
    n = X.n
    I = np.eye(n)
    P = X.orthogonal_projector.real if not np.iscomplexobj(X.basis) else X.orthogonal_projector
    Q = Y.orthogonal_projector.real if not np.iscomplexobj(Y.basis) else Y.orthogonal_projector

    def A(t):
        phi = patch_profile(t)
        if t >= 0:
            return phi * P + (I - P)
        return phi * (I - Q) + Q

    return OperatorPath(window, func=A, limit_minus=2 * Q - I, limit_plus=I - 2 * P, name="patch")


@dataclass(frozen=True, eq=False)
class IdentityReport:
    sf: int
    index: int
    ker: int
    coker: int
    relative_dimension: int
    pair_index: int
    flow: FlowReport
    reliable: bool
    holds: bool

    def to_dict(self):
        return {"sf": self.sf, "index": self.index, "ker": self.ker, "coker": self.coker,
                "relative_dimension": self.relative_dimension, "pair_index": self.pair_index,
                "methods_agree": self.flow.methods_agree, "rank_gap_reliable": self.reliable,
                "holds": self.holds}


def verify_identity(path, raise_on_violation=True, T=None, h=None, rank_tol=1e-8,
                    horizon=60, ode_tol=1e-10, tail_tol=1e-6):
    """Check ``sf = -ind F_A = -dim(E-(+inf), E-(-inf))`` and ``ind F_A = ind(W^s, W^u)``."""
    from .operator import assemble, numeric_index

    flow = spectral_flow_asymptotic(path, tail_tol=tail_tol)
    op = assemble(path, T, h, tail_tol=tail_tol)
    idx = numeric_index(op, rank_tol, predict=True, horizon=horizon, ode_tol=ode_tol)
    e_plus = spectral_projectors(path.limit_plus).p_minus.range()
    e_minus = spectral_projectors(path.limit_minus).p_minus.range()
    rd = relative_dimension(e_plus, e_minus)
    holds = (flow.sf == -idx.index == -rd) and idx.index == idx.pair_index and flow.methods_agree
    rep = IdentityReport(flow.sf, idx.index, idx.ker_dim, idx.coker_dim, rd, idx.pair_index,
                         flow, idx.reliable, bool(holds))
    if raise_on_violation and not holds:
        raise IdentityViolation("index identities violated", rep.to_dict())
    return rep
