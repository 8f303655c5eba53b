"""Small input-validation helpers used by estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


def check_positive(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ConfigError(f"{name} must be a positive finite number, got {value}")
    return value


def check_nonnegative(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0.0:
        raise ConfigError(f"{name} must be a nonnegative finite number, got {value}")
    return value


def check_in_interval(name, value, lo, hi, *, lo_open=False, hi_open=False):
    value = float(value)
    ok = np.isfinite(value)
    ok = ok and (value > lo if lo_open else value >= lo)
    ok = ok and (value < hi if hi_open else value <= hi)
    if not ok:
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        raise ConfigError(f"{name} must lie in {left}{lo}, {hi}{right}, got {value}")
    return value


def as_positive_array(name: str, values) -> np.ndarray:
    """Coerce to a 1-d float array of positive finite entries."""
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ConfigError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ConfigError(f"{name} must contain positive finite numbers")
    return arr


def as_spot_strike_array(name: str, X) -> np.ndarray:
    """Coerce to an (n, 2) array of positive (spot, strike) rows."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigError(f"{name} must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ConfigError(f"{name} must contain positive finite numbers")
    return arr
