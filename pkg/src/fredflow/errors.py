"""Exception hierarchy.

Input problems and numerical failures are kept apart because the CLI maps
them to different exit codes.
"""


class FredflowError(Exception):
    """Base class for all library errors; keyword arguments become ``diagnostics``."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InputError(FredflowError, ValueError):
    """Malformed or out-of-contract input (shapes, NaNs, bad parameters)."""


class NumericalError(FredflowError, ArithmeticError):
    """A computation failed to converge or lost too much accuracy."""


class SolveError(NumericalError):
    """Linear solve refused because the matrix is singular or ill-conditioned."""


class NotComplementaryError(NumericalError):
    """Two subspaces do not split the ambient space."""


class NotConjugableError(NumericalError):
    """Projectors too far apart for the local conjugation formula."""


class NonHyperbolicError(NumericalError):
    """A matrix has spectrum on (or too close to) the imaginary axis."""


class QuadratureError(NumericalError):
    """Contour or grid quadrature did not converge."""


class CertificateError(NumericalError):
    """A sufficient condition required by an algorithm does not hold."""


class IdentityViolation(FredflowError):
    """An index identity that must hold exactly was violated."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
