"""Exception hierarchy shared by all modules."""


class LevyDriftError(Exception):
    """Base class for every error raised by this package."""


class ArgumentError(LevyDriftError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(ArgumentError):
    """A function was evaluated outside its domain (e.g. the kernel at y = 0)."""


class PreconditionError(ArgumentError):
    """A documented precondition of an operation does not hold."""


class ResolutionError(PreconditionError):
    """The grid is too coarse for the requested construction."""


class NumericalError(LevyDriftError, ArithmeticError):
    """A numerical procedure failed (non-convergence, NaN, overflow)."""


class QuadratureError(NumericalError):
    """A quadrature did not reach its tolerance."""


class ConfigError(ArgumentError):
    """An experiment configuration failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
