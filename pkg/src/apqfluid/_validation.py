"""Input validation helpers shared by the simulators and estimators."""

from __future__ import annotations

import numbers

import numpy as np


class ParameterError(ValueError):
    """A model parameter violates its documented precondition."""


class ValidationError(ValueError):
    """A structured input (phase-type representation, generator, log) is malformed."""


class InsufficientDataError(ValueError):
    """Too few samples remain to compute the requested quantity."""


def check_positive(value, name: str) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ParameterError(f"{name} must be a positive finite real, got {value!r}")
    return float(value)


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_significance(value) -> float:
    if not isinstance(value, numbers.Real) or not 0.0 < value < 1.0:
        raise ParameterError(f"significance must lie in (0, 1), got {value!r}")
    return float(value)


def check_points(X, name: str = "X") -> np.ndarray:
    """Coerce ``X`` to a finite float array of shape (n, 2)."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise InsufficientDataError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def check_sample(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float).ravel()
    if arr.size == 0:
        raise ParameterError(f"{name} must be non-empty")
    return arr


class ConfigurationError(ValueError):
    """Two inputs that must describe matched models do not."""
