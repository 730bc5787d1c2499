"""Exception hierarchy shared by every module of the package."""


class NonlocalTrafficError(Exception):
    """Base class for all errors raised by this package."""


class InvalidKernel(NonlocalTrafficError, ValueError):
    pass


class ResolutionError(NonlocalTrafficError, ValueError):
    pass


class TruncationError(NonlocalTrafficError, RuntimeError):
    pass


class GridError(NonlocalTrafficError, ValueError):
    pass


class DomainError(NonlocalTrafficError, ValueError):
    pass


class StabilityError(NonlocalTrafficError, ValueError):
    pass


class NumericalBlowup(NonlocalTrafficError, FloatingPointError):
    pass


class MaximumPrincipleViolation(NonlocalTrafficError, AssertionError):
    pass


class UnsupportedModel(NonlocalTrafficError, NotImplementedError):
    pass


class DomainExit(NonlocalTrafficError):
    """A characteristic left the computational domain.

    The part of the path traced before the exit is kept in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class PathOrderError(NonlocalTrafficError, ValueError):
    pass


class SupportError(NonlocalTrafficError, ValueError):
    pass


class FitError(NonlocalTrafficError, ValueError):
    pass


class ScaleError(NonlocalTrafficError, ValueError):
    pass


class ConfigError(NonlocalTrafficError, ValueError):
    pass
