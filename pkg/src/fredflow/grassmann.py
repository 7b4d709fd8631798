"""Subspace geometry in a finite-dimensional Euclidean space.

A :class:`Subspace` stores an orthonormal basis. All metrics are evaluated
exactly through singular values of projected bases; nothing here iterates.

In a Euclidean ambient space the disc excess ``rho`` coincides with
``rho1``: for ``|y| <= 1`` the orthogonal projection of ``y`` on ``Z`` already
lies in the unit disc of ``Z``, so ``dist(y, D(Z)) = dist(y, Z)``. The two are
still exposed separately because the inequalities relating them are part of
the public contract.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, NotComplementaryError, NotConjugableError, NumericalError
from .linalg import DEFAULT_RANK_TOL, as_matrix, opnorm, orth, strip_imag

EQUALITY_TOL = 1e-8


class GapValue(enum.Enum):
    """Sentinel for an infimum over an empty set."""

    UNDEFINED_EMPTY_INFIMUM = "undefined-empty-infimum"


UNDEFINED_EMPTY_INFIMUM = GapValue.UNDEFINED_EMPTY_INFIMUM


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of C^n (or R^n) held as an ``n x k`` orthonormal basis."""

    basis: np.ndarray
    tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        B = np.asarray(self.basis)
        if B.ndim != 2 or B.shape[0] == 0:
            raise InputError(f"basis must be n x k with n > 0, got {B.shape}")
        k = B.shape[1]
        if k > B.shape[0]:
            raise InputError("more basis vectors than ambient dimension")
        if k and np.linalg.norm(B.conj().T @ B - np.eye(k)) > 1e-10 * max(1, k):
            raise InputError("basis columns are not orthonormal")
        B = B.copy()
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @classmethod
    def span(cls, vectors, rel_tol=DEFAULT_RANK_TOL, n=None):
        """Span of the columns of ``vectors`` (rank decided at ``rel_tol``)."""
        V = np.asarray(vectors)
        if V.ndim == 1:
            V = V[:, None]
        if V.ndim != 2:
            raise InputError("vectors must be a 2-D array of columns")
        if n is not None and V.shape[0] != n:
            raise InputError(f"vectors live in dimension {V.shape[0]}, expected {n}")
        if V.shape[1] and not np.all(np.isfinite(V)):
            raise InputError("vectors have non-finite entries")
        return cls(strip_imag(orth(V, rel_tol)), rel_tol)

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, 0)))

    @classmethod
    def full(cls, n):
        return cls(np.eye(n))

    @classmethod
    def coordinate(cls, n, indices):
        """Span of the standard basis vectors ``e_i`` for ``i`` in ``indices``."""
        return cls(np.eye(n)[:, list(indices)])

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def orthogonal_projector(self):
        return self.basis @ self.basis.conj().T

    def complement(self):
        """Euclidean orthogonal complement (the annihilator under the inner product)."""
        if self.dim == 0:
            return Subspace(np.eye(self.n, dtype=self.basis.dtype), self.tol)
        U, _, _ = np.linalg.svd(self.basis, full_matrices=True)
        return Subspace(strip_imag(U[:, self.dim:]), self.tol)

    def image(self, T):
        """The subspace ``T(self)`` for a square matrix ``T``."""
        T = as_matrix(T)
        return Subspace.span(T @ self.basis, self.tol, n=self.n)

    def equals(self, other, tol=EQUALITY_TOL):
        return _same_ambient(self, other) and delta1(self, other) < tol

    def __repr__(self):
        return f"Subspace(n={self.n}, dim={self.dim})"


def _same_ambient(Y, Z):
    if Y.n != Z.n:
        raise InputError(f"ambient dimensions differ: {Y.n} vs {Z.n}")
    return True


def _orth_residual(Y, Z):
    """Component of the basis of ``Y`` orthogonal to ``Z``."""
    B = Y.basis
    if Z.dim:
        B = B - Z.basis @ (Z.basis.conj().T @ B)
    return B


def dist_point(v, Z):
    """Euclidean distance from the vector ``v`` to the subspace ``Z``."""
    v = np.asarray(v).reshape(-1)
    if v.shape[0] != Z.n:
        raise InputError(f"vector has dimension {v.shape[0]}, subspace lives in {Z.n}")
    r = v - Z.basis @ (Z.basis.conj().T @ v) if Z.dim else v
    return float(np.linalg.norm(r))


def rho1(Y, Z):
    """``sup`` over the unit disc of ``Y`` of the distance to ``Z``."""
    _same_ambient(Y, Z)
    if Y.dim == 0:
        return 0.0
    return min(1.0, opnorm(_orth_residual(Y, Z)))


def delta1(Y, Z):
    return max(rho1(Y, Z), rho1(Z, Y))


def rho(Y, Z):
    """Excess of the unit disc of ``Y`` over the unit disc of ``Z``.

    Equal to :func:`rho1` in the Euclidean norm (see the module docstring).
    """
    return rho1(Y, Z)


def delta(Y, Z):
    """Hausdorff distance between the unit discs."""
    return max(rho(Y, Z), rho(Z, Y))


def rho_S(Y, Z):
    """Excess of the unit sphere of ``Y`` over the unit sphere of ``Z``.

    Conventions for the null space: ``rho_S(0, 0) = 0`` and 1 when exactly
    one side is null. Otherwise a unit ``y`` at angle ``theta`` from ``Z``
    is at distance ``2 sin(theta/2)`` from the sphere of ``Z``, maximized by
    the largest such angle, whose sine is ``rho1(Y, Z)``.
    """
    _same_ambient(Y, Z)
    if Y.dim == 0 and Z.dim == 0:
        return 0.0
    if Y.dim == 0 or Z.dim == 0:
        return 1.0
    theta = math.asin(min(1.0, rho1(Y, Z)))
    return 2.0 * math.sin(theta / 2.0)


def delta_S(Y, Z):
    return max(rho_S(Y, Z), rho_S(Z, Y))


def intersection(Y, Z, rel_tol=None):
    """``Y ∩ Z`` from the nullspace of ``[Y, -Z]``."""
    _same_ambient(Y, Z)
    tol = rel_tol if rel_tol is not None else max(Y.tol, Z.tol)
    if Y.dim == 0 or Z.dim == 0:
        return Subspace.zero(Y.n)
    # y in Z iff its component orthogonal to Z vanishes
    R = _orth_residual(Y, Z)
    _, s, Vh = np.linalg.svd(R, full_matrices=True)
    # singular values of R are sines of principal angles, all <= 1
    keep = int(np.count_nonzero(s > tol))
    C = Vh[keep:].conj().T
    if C.shape[1] == 0:
        return Subspace.zero(Y.n)
    return Subspace.span(Y.basis @ C, tol)


def subspace_sum(Y, Z, rel_tol=None):
    _same_ambient(Y, Z)
    tol = rel_tol if rel_tol is not None else max(Y.tol, Z.tol)
    return Subspace.span(np.hstack([Y.basis, Z.basis]), tol, n=Y.n)


def kernel_subspace(T, rel_tol=DEFAULT_RANK_TOL):
    """Numerical kernel of a (possibly rectangular) matrix."""
    T = as_matrix(T, square=False)
    _, s, Vh = np.linalg.svd(T, full_matrices=True)
    smax = s[0] if s.size else 0.0
    r = int(np.count_nonzero(s > rel_tol * smax)) if smax > 0 else 0
    return Subspace(strip_imag(Vh[r:].conj().T), rel_tol)


def range_subspace(T, rel_tol=DEFAULT_RANK_TOL):
    T = as_matrix(T, square=False)
    return Subspace.span(T, rel_tol)


def gap(Y, Z):
    """Minimum gap ``gamma(Y, Z)``.

    Returns 1 for ``Y = 0`` and :data:`UNDEFINED_EMPTY_INFIMUM` when
    ``Y ⊆ Z`` with ``Y != 0``. Writing ``Y = (Y ∩ Z) ⊕ Y'`` orthogonally,
    ``dist(y, Y ∩ Z) = |y'|`` and ``dist(y, Z) = dist(y', Z)``, so the
    infimum is the smallest singular value of the part of ``Y'`` orthogonal
    to ``Z``.
    """
    _same_ambient(Y, Z)
    if Y.dim == 0:
        return 1.0
    W = intersection(Y, Z)
    if W.dim == Y.dim:
        return UNDEFINED_EMPTY_INFIMUM
    if W.dim:
        C = Y.basis.conj().T @ W.basis
        _, _, Vh = np.linalg.svd(C.conj().T, full_matrices=True)
        Yp = Y.basis @ Vh[W.dim:].conj().T
    else:
        Yp = Y.basis
    s = np.linalg.svd(_orth_residual(Subspace(Yp, Y.tol), Z), compute_uv=False)
    return float(s[-1])


def min_gap(Y, Z):
    """``min(gap(Y, Z), gap(Z, Y))``, skipping undefined sides."""
    vals = [g for g in (gap(Y, Z), gap(Z, Y)) if g is not UNDEFINED_EMPTY_INFIMUM]
    return min(vals) if vals else UNDEFINED_EMPTY_INFIMUM


@dataclass(frozen=True, eq=False)
class Projector:
    """An idempotent matrix together with its idempotency residual."""

    matrix: np.ndarray
    residual: float

    @classmethod
    def from_matrix(cls, P, rel_tol=1e-8):
        P = as_matrix(P, name="projector")
        P = strip_imag(P)
        res = float(np.linalg.norm(P @ P - P, 2))
        bound = rel_tol * (1.0 + opnorm(P) ** 2)
        if res > bound:
            raise NumericalError("matrix is not idempotent", residual=res, bound=bound)
        return cls(P, res)

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def rank(self):
        return int(round(np.trace(self.matrix).real))

    def range(self, rel_tol=1e-8):
        return range_subspace(self.matrix, rel_tol)

    def kernel(self, rel_tol=1e-8):
        return kernel_subspace(self.matrix, rel_tol)

    def complementary(self):
        return Projector(np.eye(self.n) - self.matrix, self.residual)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def projector_onto_along(X, Y):
    """Projector with range ``X`` and kernel ``Y``; needs ``X ⊕ Y`` = ambient."""
    _same_ambient(X, Y)
    n = X.n
    if X.dim + Y.dim != n:
        raise NotComplementaryError("dimensions do not add up", dim_x=X.dim, dim_y=Y.dim, n=n)
    B = np.hstack([X.basis, Y.basis])
    s = np.linalg.svd(B, compute_uv=False)
    tol = max(X.tol, Y.tol)
    if s[-1] <= tol * s[0]:
        raise NotComplementaryError("subspaces intersect", smallest_singular_value=float(s[-1]))
    # P B = [X, 0]
    target = np.hstack([X.basis, np.zeros_like(Y.basis)])
    P = np.linalg.solve(B.T, target.T).T
    return Projector.from_matrix(P)


@dataclass(frozen=True)
class PairIndexReport:
    dim_intersection: int
    codim_sum: int
    index: int


def pair_index(X, Y, rel_tol=None):
    """``dim(X ∩ Y) - codim(X + Y)``, cross-checked against the pairing operator."""
    _same_ambient(X, Y)
    tol = rel_tol if rel_tol is not None else max(X.tol, Y.tol)
    k = intersection(X, Y, tol).dim
    c = X.n - subspace_sum(X, Y, tol).dim
    report = PairIndexReport(k, c, k - c)
    # (x, y) -> x - y on X × Y: kernel ≅ X ∩ Y, cokernel ≅ E / (X + Y)
    pairing = np.hstack([X.basis, -Y.basis])
    if pairing.shape[1]:
        s = np.linalg.svd(pairing, compute_uv=False)
        r = int(np.count_nonzero(s > tol * s[0])) if s[0] > 0 else 0
    else:
        r = 0
    pairing_index = (pairing.shape[1] - r) - (X.n - r)
    if pairing_index != report.index:
        raise NumericalError("pair index disagrees with pairing operator",
                             dimension_count=report.index, pairing=pairing_index)
    return report


def relative_dimension(X, Y):
    """Relative dimension of a pair; in finite dimension ``dim X - dim Y``."""
    _same_ambient(X, Y)
    return X.dim - Y.dim


def transitivity_holds(X, Y, Z):
    """Check ``ind(X, Z) = dim(X, Y) + ind(Y, Z)``."""
    return pair_index(X, Z).index == relative_dimension(X, Y) + pair_index(Y, Z).index


def conjugator(p, q):
    """Invertible ``g`` with ``g p = q g`` for projectors with ``|p - q| < 1``.

    ``g = L(q, p) R`` where ``L(a, b) = ab + (1 - a)(1 - b)`` and
    ``R = (1 - (p - q)^2)^(-1/2)`` comes from the holomorphic functional
    calculus. ``R`` commutes with ``p`` and ``q``, and ``L(q, p) p = q p =
    q L(q, p)``.
    """
    from .spectral import Contour, functional_calculus

    P = np.asarray(p.matrix if isinstance(p, Projector) else p)
    Q = np.asarray(q.matrix if isinstance(q, Projector) else q)
    P = as_matrix(P)
    Q = as_matrix(Q)
    if P.shape != Q.shape:
        raise InputError("projectors have different shapes")
    n = P.shape[0]
    I = np.eye(n)
    D = P - Q
    dn = opnorm(D)
    if dn >= 1.0 - 1e-12:
        raise NotConjugableError("projectors are too far apart", distance=dn)
    if dn == 0.0:
        return I.copy()
    D2 = D @ D
    # spectrum of D^2 lies in the disc of radius dn^2 < 1; the branch point of
    # (1 - z)^(-1/2) sits at z = 1
    radius = 0.5 * (dn ** 2 + 1.0)
    contour = Contour.circle(0.0, radius, nodes=64)
    R = functional_calculus(D2, lambda z: 1.0 / np.sqrt(1.0 - z), contour)
    L = Q @ P + (I - Q) @ (I - P)
    g = strip_imag(L @ R)
    return g
