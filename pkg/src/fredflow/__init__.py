"""Numerical toolkit for asymptotically hyperbolic matrix paths.

Subspace geometry, contour-integral spectral projectors, propagators,
stable and unstable spaces, the discretized operator ``u' - A(t) u`` with
its index, and spectral flow.
"""

from .errors import (CertificateError, FredflowError, IdentityViolation, InputError, NonHyperbolicError,
                     NotComplementaryError, NotConjugableError, NumericalError, QuadratureError, SolveError)
from .flow import (FlowReport, catenate, patch_path, spectral_flow, spectral_flow_asymptotic,
                   verify_identity)
from .grassmann import (UNDEFINED_EMPTY_INFIMUM, Projector, Subspace, conjugator, delta, delta1,
                        delta_S, gap, intersection, min_gap, pair_index, projector_onto_along,
                        relative_dimension, rho, rho1, rho_S, subspace_sum)
from .invariant import graph_evolution, stable_space_graph, stable_space_limit, unstable_space
from .linalg import numerical_rank, solve
from .operator import (assemble, boundary_maps, numeric_index, range_membership, right_inverse_apply)
from .propagator import OperatorPath, propagate
from .spectral import (Contour, functional_calculus, hyperbolic_retraction, leray_schauder_degree,
                       spectral_projectors)

import types as _types

__all__ = [name for name, obj in dict(globals()).items()
           if not name.startswith("_") and not isinstance(obj, _types.ModuleType)]
