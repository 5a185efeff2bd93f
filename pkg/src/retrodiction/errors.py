"""Exception hierarchy."""


class RetrodictionError(Exception):
    """Base class for all package errors."""


class OperatorError(RetrodictionError, ValueError):
    """Malformed operator: wrong shape, non-finite entries, dimension mismatch."""


class DeviceError(RetrodictionError, ValueError):
    """Invalid preparation or measurement device set."""


class ProbabilityError(RetrodictionError, ValueError):
    """A requested probability is undefined (zero denominator, bad label)."""


class IntegrationError(RetrodictionError, RuntimeError):
    """Numerical failure while integrating a master equation."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ScenarioError(RetrodictionError, ValueError):
    """Scenario file could not be parsed or validated."""
