"""Dense linear-algebra primitives shared by every other module.

Matrices are plain numpy arrays. ``as_matrix`` is the single validation
gate: it rejects non-finite entries and empty shapes so downstream code can
assume clean input.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InputError, NumericalError, SolveError

DEFAULT_RANK_TOL = 1e-8
DEFAULT_COND_CAP = 1e12
IMAG_STRIP_TOL = 1e-10


def as_matrix(M, square=True, name="matrix"):
    """Validate ``M`` and return it as a 2-D float or complex array."""
    A = np.asarray(M)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] == 0 or A.shape[1] == 0:
        raise InputError(f"{name} must have positive dimensions, got {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be square, got {A.shape}")
    if not np.issubdtype(A.dtype, np.number) or np.issubdtype(A.dtype, np.bool_):
        raise InputError(f"{name} must be numeric")
    if not np.issubdtype(A.dtype, np.complexfloating):
        A = A.astype(float)
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


def strip_imag(M, tol=IMAG_STRIP_TOL):
    """Drop imaginary parts that are noise relative to ``1 + |M|``.

    Used by operations that are real-in/real-out but go through complex
    arithmetic (contour quadrature, complex eigenvectors).
    """
    M = np.asarray(M)
    if not np.iscomplexobj(M):
        return M
    scale = 1.0 + (np.max(np.abs(M)) if M.size else 0.0)
    if M.size == 0 or np.max(np.abs(M.imag)) <= tol * scale:
        return np.ascontiguousarray(M.real)
    return M


def opnorm(M):
    """Spectral norm (largest singular value); 0 for empty arrays."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


@dataclass(frozen=True)
class RankDecision:
    """Outcome of a relative-threshold rank decision."""

    threshold: float
    rank: int
    singular_values: tuple
    rel_tol: float
    ncols: int

    @property
    def nullity(self):
        """Column nullity implied by the decision (columns minus rank)."""
        return self.ncols - self.rank

    @property
    def gap_ratio(self):
        """Ratio of the last kept to the first dropped singular value.

        ``inf`` when nothing is dropped or nothing is kept.
        """
        s = self.singular_values
        if self.rank == 0 or self.rank >= len(s):
            return float("inf")
        if s[self.rank] == 0.0:
            return float("inf")
        return s[self.rank - 1] / s[self.rank]


def numerical_rank(M, rel_tol=DEFAULT_RANK_TOL):
    """Count singular values strictly above ``rel_tol * sigma_max``."""
    if not 0.0 < rel_tol < 1.0:
        raise InputError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    A = as_matrix(M, square=False)
    s = sla.svdvals(A)
    smax = float(s[0]) if s.size else 0.0
    threshold = rel_tol * smax
    rank = int(np.count_nonzero(s > threshold))
    return RankDecision(threshold, rank, tuple(float(v) for v in s), rel_tol, A.shape[1])


def nullspace(M, rel_tol=DEFAULT_RANK_TOL):
    """Orthonormal basis (columns) of the numerical right nullspace."""
    A = as_matrix(M, square=False)
    _, s, Vh = sla.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > rel_tol * smax))
    return Vh[rank:].conj().T


def orth(M, rel_tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the numerical column space of ``M``."""
    A = np.asarray(M)
    if A.ndim != 2:
        raise InputError("orth expects a 2-D array")
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], 0), dtype=A.dtype)
    U, s, _ = sla.svd(A, full_matrices=False)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > rel_tol * smax)) if smax > 0 else 0
    return U[:, :rank]


def eigenvalues(M):
    """Eigenvalues with algebraic multiplicity, sorted by (real, imag)."""
    A = as_matrix(M)
    try:
        w = sla.eigvals(A)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError("eigenvalue iteration failed", shape=A.shape, cause=str(exc)) from exc
    w = np.asarray(w, dtype=complex)
    order = np.lexsort((w.imag, w.real))
    return w[order]


def cluster_eigenvalues(values, rel_radius=1e-7):
    """Group nearby eigenvalues; returns ``[(center, multiplicity), ...]``.

    Two values join a cluster when they lie within
    ``rel_radius * (1 + |lambda|)`` of a member (single linkage).
    """
    vals = [complex(v) for v in values]
    clusters = []
    used = [False] * len(vals)
    for i, v in enumerate(vals):
        if used[i]:
            continue
        members = [v]
        used[i] = True
        grew = True
        while grew:
            grew = False
            for j, w in enumerate(vals):
                if used[j]:
                    continue
                if any(abs(w - m) <= rel_radius * (1.0 + abs(m)) for m in members):
                    members.append(w)
                    used[j] = True
                    grew = True
        clusters.append((complex(np.mean(members)), len(members)))
    return clusters


def _lu(A):
    with warnings.catch_warnings():
        # singular factors are detected below; the LinAlgWarning is noise
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        return sla.lu_factor(A, check_finite=False)


def _rcond_inverse(A, lu):
    if np.any(np.diag(lu) == 0):
        return float("inf")
    gecon, = sla.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, np.linalg.norm(A, 1), norm="1")
    if info != 0 or rcond == 0:
        return float("inf")
    return 1.0 / rcond


def condition_estimate(M):
    """1-norm condition number estimate from an LU factorization."""
    A = as_matrix(M)
    return _rcond_inverse(A, _lu(A)[0])


def solve(M, B, cond_cap=DEFAULT_COND_CAP, return_residual=False):
    """Solve ``M X = B`` for square ``M``.

    Raises SolveError (with the condition estimate attached) if ``M`` is
    singular or its estimated condition number exceeds ``cond_cap``.
    """
    A = as_matrix(M)
    Bm = np.asarray(B)
    vec = Bm.ndim == 1
    if vec:
        Bm = Bm[:, None]
    Bm = as_matrix(Bm, square=False, name="rhs")
    if Bm.shape[0] != A.shape[0]:
        raise InputError(f"rhs has {Bm.shape[0]} rows, matrix has {A.shape[0]}")
    lu, piv = _lu(A)
    cond = _rcond_inverse(A, lu)
    if not np.isfinite(cond) or cond > cond_cap:
        raise SolveError("matrix is singular or ill-conditioned", condition=cond, cap=cond_cap)
    X = sla.lu_solve((lu, piv), Bm, check_finite=False)
    bnorm = np.linalg.norm(Bm)
    residual = float(np.linalg.norm(A @ X - Bm) / bnorm) if bnorm > 0 else float(np.linalg.norm(A @ X))
    if vec:
        X = X[:, 0]
    if return_residual:
        return X, residual
    return X
