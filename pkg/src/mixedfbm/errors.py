"""Exception types shared across the package."""


class MixedFbmError(Exception):
    """Base class for all package errors."""


class DomainError(MixedFbmError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class DivergenceError(DomainError):
    """A special-function evaluation diverges for the given parameters."""


class SingularityError(DomainError):
    """Pointwise evaluation was requested exactly on a singular set."""


class NumericsError(MixedFbmError, ArithmeticError):
    """A quadrature or linear-algebra step failed to reach its tolerance."""


class ExceptionalHorizonError(NumericsError):
    """The horizon T appears to sit at an eigenvalue of the integral operator."""


class ConfigError(MixedFbmError, ValueError):
    """Invalid run configuration (CLI or programmatic)."""
