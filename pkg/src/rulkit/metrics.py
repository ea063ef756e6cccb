"""Regression metrics: MSE, RMSE, MAE, R-squared.

All four operate on flat prediction/target vectors and are exact
definitions with no clipping or reweighting. RMSE is computed as the
square root of MSE so rmse**2 == mse holds to floating-point round-off.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, NumericError
from .validation import as_float_vector, check_consistent_length, check_finite


def _prepare(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = as_float_vector(y_true, "y_true")
    p = as_float_vector(y_pred, "y_pred")
    if t.shape[0] == 0:
        raise ConfigError("metrics require at least one sample")
    check_consistent_length(t, p, "y_true", "y_pred")
    check_finite(t, "y_true")
    check_finite(p, "y_pred")
    return t, p


def mse(y_true, y_pred) -> float:
    """Mean squared error."""
    t, p = _prepare(y_true, y_pred)
    d = t - p
    with np.errstate(over="ignore"):
        return float(np.mean(d * d))


def rmse(y_true, y_pred) -> float:
    """Root mean squared error, sqrt of mse."""
    return float(np.sqrt(mse(y_true, y_pred)))


def mae(y_true, y_pred) -> float:
    """Mean absolute error."""
    t, p = _prepare(y_true, y_pred)
    return float(np.mean(np.abs(t - p)))


def r2(y_true, y_pred) -> float:
    """Coefficient of determination, 1 - SS_res / SS_tot.

    SS_tot uses the mean of y_true. A zero-variance target makes the
    ratio undefined, so that case raises rather than returning a
    sentinel. Values below zero (model worse than the mean predictor)
    are returned as-is.
    """
    t, p = _prepare(y_true, y_pred)
    centered = t - t.mean()
    ss_tot = float(np.dot(centered, centered))
    if ss_tot == 0.0:
        raise NumericError("r2 is undefined: y_true has zero variance")
    d = t - p
    ss_res = float(np.dot(d, d))
    return 1.0 - ss_res / ss_tot


def evaluate_all(y_true, y_pred) -> dict[str, float]:
    """All four metrics keyed by name, with rmse derived from mse."""
    m = mse(y_true, y_pred)
    return {
        "mse": m,
        "rmse": float(np.sqrt(m)),
        "mae": mae(y_true, y_pred),
        "r2": r2(y_true, y_pred),
    }
