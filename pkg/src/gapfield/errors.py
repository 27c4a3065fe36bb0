"""Exception hierarchy shared by all modules."""


class GapFieldError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GapFieldError, ValueError):
    """An input lies outside the domain of an operation."""


class NearZoneError(DomainError):
    """A target is too close to a boundary for plain trapezoid evaluation."""


class ConvergenceError(GapFieldError, ArithmeticError):
    """An iterative procedure failed to converge."""


class AccuracyError(GapFieldError, ArithmeticError):
    """A computed quantity violates its accuracy invariant.

    ``measured`` carries the offending value so callers can report it.
    """

    def __init__(self, message, measured=None):
        super().__init__(message)
        self.measured = measured


class AssemblyError(GapFieldError):
    """A discretized system is singular or inconsistent."""


class ConfigError(GapFieldError, ValueError):
    """Invalid experiment configuration."""


class OracleError(GapFieldError):
    """The image-series oracle did not converge."""
