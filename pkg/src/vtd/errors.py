"""Exception hierarchy shared by all vtd modules."""


class VTDError(Exception):
    """Base class for every error raised by this package."""


class PrecisionError(VTDError, ValueError):
    pass


class SingularMatrix(VTDError, ArithmeticError):
    """A pivot fell below the singularity threshold during LU factorization."""


class AssumptionViolated(SingularMatrix):
    """The defining system of an approximation operator is singular.

    Raised when the integrator cannot separate the polynomial space that the
    variational conditions test against, so the operator (and the discrete
    method) is not well defined for this (r, k, rule) combination.
    """


class SingularJacobian(SingularMatrix):
    pass


class InvalidNodeSet(VTDError, ValueError):
    pass


class LengthMismatch(VTDError, ValueError):
    pass


class TotalDerivativeUnavailable(VTDError):
    pass


class NewtonDiverged(VTDError):
    """Newton's method hit the iteration limit on some mesh interval."""

    def __init__(self, message, *, interval=None, iterations=None, residual=None):
        super().__init__(message)
        self.interval = interval
        self.iterations = iterations
        self.residual = residual


class OutOfDomain(VTDError, ValueError):
    pass


class ExactSolutionMissing(VTDError):
    pass


class ZeroError(VTDError, ArithmeticError):
    """An error value is too small for an order estimate to mean anything."""


class UnknownCase(VTDError, KeyError):
    pass
