"""Retrodictive open-system dynamics.

Backward evolution of measurement device operators and retrodictive density
operators under Lindblad-form master equations, with the probability calculus
for preparation and measurement devices and a closed-form driven two-level
atom for cross-checking.
"""

from .errors import (
    DeviceError,
    IntegrationError,
    OperatorError,
    ProbabilityError,
    RetrodictionError,
    ScenarioError,
)

__version__ = "0.1.0"

__all__ = [
    "DeviceError",
    "IntegrationError",
    "OperatorError",
    "ProbabilityError",
    "RetrodictionError",
    "ScenarioError",
]
