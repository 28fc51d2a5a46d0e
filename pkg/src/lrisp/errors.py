"""Exception hierarchy shared across the package."""


class LrispError(Exception):
    """Base class for all package errors."""


class DomainError(LrispError, ValueError):
    """Input outside the mathematical domain of an operation."""


class OutOfDomainError(DomainError):
    """Query outside a localized oracle's angular cap."""


class QuadratureError(LrispError, RuntimeError):
    """Adaptive quadrature or tail fit failed to reach tolerance.

    Carries a ``diagnostics`` dict (truncation radius, fitted exponent,
    error indicators) to aid debugging.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class ConditioningError(LrispError, RuntimeError):
    """Least-squares design too ill-conditioned to trust."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class SeparationError(LrispError, RuntimeError):
    """Ray data incompatible with the homogeneous-component model class."""


class InversionError(LrispError, RuntimeError):
    """Radon inversion failed to converge across band doublings."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NumericalError(LrispError, ArithmeticError):
    """A numerically impossible situation was hit (e.g. vanishing symbol)."""


class ConfigError(LrispError, ValueError):
    """Invalid run configuration (schema violation, bad field values)."""
