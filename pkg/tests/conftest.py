import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fredflow.grassmann import Subspace

settings.register_profile("fredflow", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("fredflow")


def eigen_projector_oracle(A):
    """Sum of eigenprojectors with Re > 0, straight from an eigendecomposition."""
    w, V = np.linalg.eig(A)
    Vinv = np.linalg.inv(V)
    pos = w.real > 0
    return V[:, pos] @ Vinv[pos, :]


def random_hyperbolic(rng, n, margin=0.1):
    """Random real matrix with spectrum kept at least ``margin`` off the axis."""
    while True:
        A = rng.standard_normal((n, n))
        w = np.linalg.eigvals(A)
        if np.min(np.abs(w.real)) > margin:
            return A


def random_subspace(rng, n, k=None):
    if k is None:
        k = int(rng.integers(0, n + 1))
    if k == 0:
        return Subspace.zero(n)
    return Subspace.span(rng.standard_normal((n, k)), n=n)


def sphere_excess_sampled(Y, Z, rng, samples=4000):
    """Brute-force lower bound of the unit-sphere excess by sampling ``Y``'s sphere.

    For unit ``y`` the nearest unit vector of ``Z`` is the normalized
    projection, so each sample costs one projection.
    """
    if Y.dim == 0:
        return 0.0 if Z.dim == 0 else 1.0
    if Z.dim == 0:
        return 1.0
    c = rng.standard_normal((Y.dim, samples))
    y = Y.basis @ (c / np.linalg.norm(c, axis=0))
    pz = Z.basis @ (Z.basis.T @ y)
    nz = np.linalg.norm(pz, axis=0)
    nearest = pz / np.where(nz > 0, nz, 1.0)
    d = np.linalg.norm(y - nearest, axis=0)
    d = np.where(nz > 0, d, np.sqrt(2.0))
    return float(np.max(d))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
