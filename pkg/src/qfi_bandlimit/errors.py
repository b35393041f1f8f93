"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class TruncationError(ValueError):
    """The requested basis truncation cannot represent the operator."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to converge or lost consistency."""


class ConsistencyError(ValueError):
    """Two inputs that must describe the same configuration disagree."""


class StateError(RuntimeError):
    """An object is missing data required by the requested operation."""


class CutoffError(ValueError):
    """Eigenvalue retention left no states to work with."""


class UsageError(ValueError):
    """Invalid command-line or configuration input."""


class UnsupportedProfileError(DomainError):
    """The spectral profile is outside what the solver handles (e.g. asymmetric)."""
