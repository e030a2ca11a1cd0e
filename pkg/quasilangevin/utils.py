from typing import Any, Iterable, List, Optional, Tuple

import numpy as np


class QuasiLangevinError(Exception):
    """Base exception for all package errors."""

    exit_code = 1


class UsageError(QuasiLangevinError):
    """Invalid arguments: inverted bounds, unsupported orders, grid mismatches."""

    exit_code = 2


class ConfigError(UsageError):
    """Configuration rejected before (or while) a run starts.

    Carries every problem found as ``(path, message)`` pairs so that a caller
    can report them all at once.
    """

    def __init__(self, errors: Iterable[Tuple[str, str]]):
        self.errors: List[Tuple[str, str]] = list(errors)
        message = "; ".join(f"{path}: {msg}" if path else msg for path, msg in self.errors)
        super().__init__(message or "invalid configuration")


class PositivityError(UsageError):
    """A quasi-probability that must be a density took negative values."""


class NumericalStabilityError(QuasiLangevinError):
    """Norm drift, edge leakage or a diverging kernel normalization."""

    exit_code = 3


class AccuracyError(NumericalStabilityError):
    """A discretization is too coarse for the requested accuracy."""


class SignCollapseError(QuasiLangevinError):
    """The signed ensemble cancelled out: mean sign below the floor."""

    exit_code = 4

    def __init__(self, message: str, diagnostics: Optional[Any] = None):
        super().__init__(message)
        self.diagnostics = diagnostics


def require_positive(name: str, value: float) -> float:
    """
    Validate that a scalar parameter is finite and strictly positive.

    Args:
        name: Parameter name used in the error message
        value: Value to check

    Returns:
        float: The value as a float

    Raises:
        UsageError: If the value is not finite or not > 0
    """
    value = require_finite(name, value)
    if value <= 0:
        raise UsageError(f"{name} must be > 0, got {value}")
    return value


def require_non_negative(name: str, value: float) -> float:
    """Validate that a scalar parameter is finite and >= 0."""
    value = require_finite(name, value)
    if value < 0:
        raise UsageError(f"{name} must be >= 0, got {value}")
    return value


def require_finite(name: str, value: float) -> float:
    """Validate that a scalar parameter is a finite real number."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be a real number, got {value!r}")
    if not np.isfinite(value):
        raise UsageError(f"{name} must be finite, got {value}")
    return value


def require_int(name: str, value: int, minimum: int = 0) -> int:
    """
    Validate an integer count parameter.

    Args:
        name: Parameter name used in the error message
        value: Value to check (bools are rejected)
        minimum: Smallest accepted value

    Raises:
        UsageError: If the value is not an integer or is below the minimum
    """
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise UsageError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise UsageError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
