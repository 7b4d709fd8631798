"""Spectral projectors and holomorphic functional calculus by contour quadrature.

Contour integrals of the resolvent ``(z - A)^{-1}`` are evaluated with
trapezoid sums on circles (periodic integrand, geometric convergence) and
with adaptive Gauss-Legendre panels on rectangles, where the corners break
periodicity and the left edge may pass close to eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NonHyperbolicError, QuadratureError
from .grassmann import Projector, Subspace
from .linalg import as_matrix, eigenvalues, opnorm, strip_imag

HYPERBOLICITY_TOL = 1e-7
CONTOUR_MARGIN = 1e-6
MAX_NODES = 4096

_GL = {k: np.polynomial.legendre.leggauss(k) for k in (8, 16)}


@dataclass(frozen=True)
class Contour:
    """Closed, counter-clockwise quadrature contour."""

    shape: str
    params: tuple
    nodes: int = 16

    def __post_init__(self):
        if self.shape not in ("circle", "rectangle"):
            raise InputError(f"unknown contour shape {self.shape!r}")
        if self.nodes < 16 or self.nodes % 2:
            raise InputError("contour needs an even node count >= 16")
        if self.shape == "circle":
            _, r = self.params
            if not r > 0:
                raise InputError("circle radius must be positive")
        else:
            x0, x1, y0, y1 = self.params
            if not (x1 > x0 and y1 > y0):
                raise InputError("rectangle must have positive area")

    @classmethod
    def circle(cls, center, radius, nodes=16):
        return cls("circle", (complex(center), float(radius)), nodes)

    @classmethod
    def rectangle(cls, re_min, re_max, im_min, im_max, nodes=16):
        return cls("rectangle", (float(re_min), float(re_max), float(im_min), float(im_max)), nodes)

    def distance_to(self, points):
        """Smallest distance from ``points`` to the contour trace."""
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        if self.shape == "circle":
            c, r = self.params
            return float(np.min(np.abs(np.abs(pts - c) - r)))
        x0, x1, y0, y1 = self.params
        best = np.inf
        for p in pts:
            cx = min(max(p.real, x0), x1)
            cy = min(max(p.imag, y0), y1)
            inside = x0 < p.real < x1 and y0 < p.imag < y1
            if inside:
                d = min(p.real - x0, x1 - p.real, p.imag - y0, y1 - p.imag)
            else:
                d = abs(p - complex(cx, cy))
            best = min(best, d)
        return float(best)

    def encloses(self, z):
        z = complex(z)
        if self.shape == "circle":
            c, r = self.params
            return abs(z - c) < r
        x0, x1, y0, y1 = self.params
        return x0 < z.real < x1 and y0 < z.imag < y1

    def _sides(self):
        x0, x1, y0, y1 = self.params
        corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
        return [(corners[i], corners[(i + 1) % 4]) for i in range(4)]

    def integrate(self, integrand, tol=1e-12, max_nodes=MAX_NODES):
        """``∮ integrand(z) dz`` for a batched matrix-valued integrand.

        ``integrand`` takes a 1-D array of nodes and returns an array of
        shape ``(len(nodes), n, m)``. Returns ``(value, nodes_used)``.
        """
        if self.shape == "circle":
            return self._integrate_circle(integrand, tol, max_nodes)
        return self._integrate_rectangle(integrand, tol, max_nodes)

    def _integrate_circle(self, integrand, tol, max_nodes):
        c, r = self.params
        N = self.nodes
        prev = None
        while True:
            theta = 2.0 * np.pi * np.arange(N) / N
            e = np.exp(1j * theta)
            z = c + r * e
            w = 1j * r * e * (2.0 * np.pi / N)
            f = integrand(z)
            val = np.tensordot(w, f, axes=1)
            if prev is not None:
                err = np.max(np.abs(val - prev))
                # cancellation can push |val| far below the rounding floor
                floor = 64 * np.finfo(float).eps * np.max(np.tensordot(np.abs(w), np.abs(f), axes=1))
                if err <= max(tol * max(1.0, np.max(np.abs(val))), floor):
                    return val, N
            if 2 * N > max_nodes:
                raise QuadratureError("circle quadrature did not converge", nodes=N)
            prev = val
            N *= 2

    def _integrate_rectangle(self, integrand, tol, max_nodes):
        x16, w16 = _GL[16]
        x8, w8 = _GL[8]
        # start with nodes/16 panels spread over the four sides
        per_side = max(1, self.nodes // 64)
        panels = []
        for a, b in self._sides():
            edges = np.linspace(0.0, 1.0, per_side + 1)
            panels.extend((a + (b - a) * edges[i], a + (b - a) * edges[i + 1]) for i in range(per_side))
        perimeter = sum(abs(b - a) for a, b in self._sides())
        total = None
        used = 0
        while panels:
            a = np.array([p[0] for p in panels])
            b = np.array([p[1] for p in panels])
            mid = 0.5 * (a + b)
            half = 0.5 * (b - a)
            z16 = (mid[:, None] + half[:, None] * x16[None, :]).ravel()
            z8 = (mid[:, None] + half[:, None] * x8[None, :]).ravel()
            used += z16.size + z8.size
            if used > max_nodes:
                raise QuadratureError("rectangle quadrature exceeded node cap", nodes=used, cap=max_nodes)
            f16 = integrand(z16)
            f8 = integrand(z8)
            shape = f16.shape[1:]
            f16 = f16.reshape(len(panels), 16, *shape)
            f8 = f8.reshape(len(panels), 8, *shape)
            v16 = np.einsum("p,pk,pk...->p...", half, np.broadcast_to(w16, (len(panels), 16)), f16)
            v8 = np.einsum("p,pk,pk...->p...", half, np.broadcast_to(w8, (len(panels), 8)), f8)
            diff = np.max(np.abs(v16 - v8).reshape(len(panels), -1), axis=1)
            size = np.max(np.abs(v16).reshape(len(panels), -1), axis=1) + 1e-300
            # in the asymptotic regime the 16-point error is roughly the
            # square of the relative 8-point error
            est = diff ** 2 / size
            ok = (est <= tol * np.abs(b - a) / perimeter) & (diff <= 1e-3 * size)
            acc = v16[ok].sum(axis=0)
            total = acc if total is None else total + acc
            split = []
            for i in np.flatnonzero(~ok):
                m = mid[i]
                split.append((a[i], m))
                split.append((m, b[i]))
            panels = split
        return total, used


def _resolvent_batch(A, z):
    n = A.shape[0]
    M = z[:, None, None] * np.eye(n)[None] - A[None]
    return np.linalg.inv(M)


def _check_clearance(A, contour, margin=CONTOUR_MARGIN):
    ev = eigenvalues(A)
    d = contour.distance_to(ev)
    need = margin * (1.0 + opnorm(A))
    if d <= need:
        raise QuadratureError("contour passes too close to the spectrum", distance=d, required=need)
    return ev


def is_hyperbolic(A, tol=HYPERBOLICITY_TOL):
    """Return ``(margin, hyperbolic)`` with ``margin = min |Re λ|``."""
    ev = eigenvalues(A)
    margin = float(np.min(np.abs(ev.real)))
    return margin, margin > tol


def hyperbolicity_margin(A):
    return is_hyperbolic(A)[0]


@dataclass(frozen=True, eq=False)
class Splitting:
    """Spectral splitting ``E = E+ ⊕ E-`` of a hyperbolic matrix."""

    p_plus: Projector
    p_minus: Projector
    margin: float
    nodes: int = 0

    @property
    def n(self):
        return self.p_plus.n

    @property
    def e_plus(self):
        return self.p_plus.range()

    @property
    def e_minus(self):
        return self.p_minus.range()

    @property
    def rank_plus(self):
        return self.p_plus.rank

    @property
    def rank_minus(self):
        return self.p_minus.rank


def spectral_projectors(A, tol=HYPERBOLICITY_TOL, idem_tol=1e-9, max_nodes=MAX_NODES):
    """Contour-integral projectors onto the right/left half-plane spectral subspaces."""
    A = as_matrix(A)
    margin, ok = is_hyperbolic(A, tol)
    if not ok:
        raise NonHyperbolicError("matrix is not hyperbolic", margin=margin, tol=tol)
    n = A.shape[0]
    I = np.eye(n)
    ev = eigenvalues(A)
    if not np.any(ev.real > 0):
        P = np.zeros((n, n))
        return Splitting(Projector(P, 0.0), Projector(I.copy(), 0.0), margin, 0)
    if not np.any(ev.real < 0):
        return Splitting(Projector(I.copy(), 0.0), Projector(np.zeros((n, n)), 0.0), margin, 0)
    R = opnorm(A) + 1.0
    contour = Contour.rectangle(margin / 2.0, R, -R, R)
    _check_clearance(A, contour)
    val, used = contour.integrate(lambda z: _resolvent_batch(A, z), tol=1e-12, max_nodes=max_nodes)
    P = val / (2j * np.pi)
    if not np.iscomplexobj(A):
        P = strip_imag(P, tol=1e-8)
        if np.iscomplexobj(P):
            raise QuadratureError("real matrix produced complex projector", imag=float(np.max(np.abs(P.imag))))
    res = float(np.linalg.norm(P @ P - P, 2))
    if res > idem_tol * (1.0 + opnorm(P) ** 2):
        raise QuadratureError("projector not idempotent at node cap", residual=res, nodes=used)
    return Splitting(Projector(P, res), Projector(I - P, res), margin, used)


def functional_calculus(A, f, contour, tol=1e-12, max_nodes=MAX_NODES):
    """``(1/2πi) ∮ f(z) (z - A)^{-1} dz`` with self-calibrated orientation.

    ``f`` must accept a 1-D complex array. The orientation is fixed by
    requiring the constant function 1 to map to the identity; a contour
    that does not surround the whole spectrum fails that check.
    """
    A = as_matrix(A)
    _check_clearance(A, contour)
    n = A.shape[0]
    I = np.eye(n)

    def integrand(z):
        Rz = _resolvent_batch(A, z)
        fz = np.asarray(f(z), dtype=complex)
        return fz[:, None, None] * Rz

    one, _ = contour.integrate(lambda z: _resolvent_batch(A, z), tol=tol, max_nodes=max_nodes)
    one = one / (2j * np.pi)
    if np.max(np.abs(one - I)) < 1e-8:
        sign = 1.0
    elif np.max(np.abs(one + I)) < 1e-8:
        sign = -1.0
    else:
        raise QuadratureError("contour does not surround the spectrum",
                              calibration_error=float(np.max(np.abs(one - I))))
    val, _ = contour.integrate(integrand, tol=tol, max_nodes=max_nodes)
    out = sign * val / (2j * np.pi)
    if not np.iscomplexobj(A):
        out = strip_imag(out)
    return out


def enclosing_circle(A, pad=1.0, nodes=64):
    """Circle centred at the origin with radius ``|A| + pad``."""
    return Contour.circle(0.0, opnorm(A) + pad, nodes=nodes)


def hyperbolic_retraction(A, tol=HYPERBOLICITY_TOL):
    """``P+ - P-``; a square root of the identity."""
    sp = spectral_projectors(A, tol)
    return sp.p_plus.matrix - sp.p_minus.matrix


def leray_schauder_degree(T):
    """``(-1)^m`` with ``m`` the algebraic count of negative real eigenvalues."""
    T = as_matrix(T)
    if np.iscomplexobj(T):
        raise InputError("degree is defined for real matrices only")
    ev = eigenvalues(T)
    scale = 1.0 + opnorm(T)
    if np.min(np.abs(ev)) <= 1e-12 * scale:
        raise InputError("matrix is singular")
    # conjugate pairs are either both counted or both skipped, so the
    # parity is insensitive to the reality threshold
    real_neg = (ev.real < 0) & (np.abs(ev.imag) <= 1e-9 * (1.0 + np.abs(ev)))
    m = int(np.count_nonzero(real_neg))
    return -1 if m % 2 else 1


def positive_rank(A):
    """Number of eigenvalues with positive real part (eigenvalue route)."""
    return int(np.count_nonzero(eigenvalues(A).real > 0))
