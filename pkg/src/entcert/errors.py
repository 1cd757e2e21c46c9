"""Semantic exception hierarchy shared across the package."""


class EntcertError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EntcertError):
    """Malformed or inconsistent input data (dimension mismatch, bad probabilities, ...)."""


class BudgetExceededError(EntcertError):
    """An exact enumeration would exceed the configured size budget."""


class GateFailedError(EntcertError):
    """A certification validity gate (n or kappa) is not satisfied."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class NullEventError(EntcertError):
    """Attempt to condition on an event of (numerically) zero probability."""


class SamplingError(EntcertError):
    """Correlated-sampling precondition violated or randomness stream exhausted."""
