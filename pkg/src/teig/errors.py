"""Exception types shared across the package."""


class TeigError(Exception):
    """Base class for all errors raised by this package."""


# coeff
class ValidationError(TeigError):
    """A medium fails one of the structural hypotheses."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonSymmetric(ValidationError):
    pass


class EllipticityViolation(ValidationError):
    pass


class ContrastViolation(ValidationError):
    pass


class ZeroLambda(TeigError, ValueError):
    pass


# specfun
class AccuracyLoss(TeigError, ArithmeticError):
    pass


# halfspace / cauchy_grid
class WedgeViolation(TeigError, ValueError):
    pass


class DegenerateContrast(TeigError, ValueError):
    pass


class UnsupportedAnisotropy(TeigError, ValueError):
    pass


class SingularSystem(TeigError, ArithmeticError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class RankTestAmbiguous(TeigError, ArithmeticError):
    pass


# disk_spectrum
class ContourThroughZero(TeigError, ArithmeticError):
    pass


class PhaseTrackingUnstable(TeigError, ArithmeticError):
    pass


class NonConvergence(TeigError, ArithmeticError):
    pass


class EmptySpectrum(TeigError, ValueError):
    pass


# weyl / trace_lab
class NotPositiveDefinite(TeigError, ValueError):
    pass


class QuadratureNotConverged(TeigError, ArithmeticError):
    pass


class NotInModifiedResolventSet(TeigError, ArithmeticError):
    pass


# cli
class UsageError(TeigError):
    pass


class ProfileNotFound(UsageError):
    pass


class AcceptanceFailure(TeigError):
    pass
