class NormClustError(Exception):
    """Base class for all errors raised by normclust."""


class DomainError(NormClustError, ValueError):
    """An argument lies outside the domain of the operation."""


class NotANormError(DomainError):
    """A norm oracle violates a property required of symmetric monotone norms."""


class BudgetExceeded(NormClustError):
    """An enumeration would exceed its configured cap."""

    def __init__(self, what, required, cap):
        self.what = what
        self.required = required
        self.cap = cap
        super().__init__(f"{what}: {required} states required, cap is {cap}")


class ConfigurationError(NormClustError):
    """A required pluggable subroutine is missing."""
