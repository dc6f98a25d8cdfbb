"""Exception types and small argument checks shared across modules."""

from __future__ import annotations

import math


class DomainError(ValueError):
    """An argument lies outside the domain of the model."""


class OutOfWindowError(DomainError):
    """Requested time is outside the satellite visibility window."""


class MismatchError(ValueError):
    """A tier was paired with a variant that does not apply to it."""


class ConfigurationError(ValueError):
    """Required configuration fields are missing or contradictory."""


class ScenarioError(ValueError):
    """A scenario violates one or more invariants.

    ``violations`` lists every problem found, not only the first.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def check_finite(name, value):
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


def check_positive(name, value):
    value = check_finite(name, value)
    if value <= 0:
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return value


def check_non_negative(name, value):
    value = check_finite(name, value)
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return value


def check_interval(name, value, lo, hi):
    """Closed-interval check, returns the value as float."""
    value = check_finite(name, value)
    if not lo <= value <= hi:
        raise DomainError(f"{name} must lie in [{lo}, {hi}], got {value!r}")
    return value


def check_probability(name, value):
    return check_interval(name, value, 0.0, 1.0)
