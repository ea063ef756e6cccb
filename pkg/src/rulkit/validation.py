"""Input-validation helpers used by the estimators and pipeline stages."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DataFormatError, NotFittedError


def as_float_matrix(x, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting anything else."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ConfigError(f"{name} must be 2-dimensional, got ndim={arr.ndim}")
    return arr


def as_float_vector(x, name: str = "y") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be 1-dimensional, got ndim={arr.ndim}")
    return arr


def as_window_tensor(x, name: str = "X") -> np.ndarray:
    """Coerce to a (n_windows, window, n_features) float64 tensor."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ConfigError(
            f"{name} must have shape (n_windows, window, n_features), got ndim={arr.ndim}"
        )
    return arr


def check_consistent_length(a, b, name_a: str = "X", name_b: str = "y") -> None:
    if len(a) != len(b):
        raise ConfigError(
            f"{name_a} and {name_b} have inconsistent lengths: {len(a)} vs {len(b)}"
        )


def check_feature_count(arr: np.ndarray, expected: int, name: str = "X") -> None:
    if arr.shape[-1] != expected:
        raise ConfigError(
            f"{name} has {arr.shape[-1]} features, expected {expected}"
        )


def check_finite(arr: np.ndarray, name: str = "data") -> None:
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"{name} contains non-finite values")


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or value <= 0:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def require_fitted(obj, attribute: str) -> None:
    """Raise unless ``obj`` carries the given fitted attribute (non-None)."""
    if getattr(obj, attribute, None) is None:
        raise NotFittedError(
            f"{type(obj).__name__} is not fitted yet; call fit before this operation"
        )
