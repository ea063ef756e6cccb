"""Linear-regression benchmark fitted by ridge-stabilized normal equations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .validation import (
    as_float_matrix,
    as_float_vector,
    check_consistent_length,
    check_feature_count,
    check_finite,
)

DEFAULT_RIDGE = 1e-8


@dataclass(frozen=True)
class LinearModel:
    """Weights w, intercept b, and the ridge stabilizer used to fit them."""

    w: np.ndarray
    b: float
    ridge: float = DEFAULT_RIDGE

    @property
    def n_features(self) -> int:
        return self.w.shape[0]


def fit_linear(X, y, ridge: float = DEFAULT_RIDGE) -> LinearModel:
    """Minimize sum((Xw + b - y)^2) + ridge*|w|^2, intercept unpenalized.

    Solved directly via the normal equations of the ones-augmented
    design; with at most a few dozen features the dense symmetric solve
    is exact and cheap. The tiny ridge term keeps a collinear Gram
    matrix invertible without visibly biasing the fit.
    """
    X = as_float_matrix(X, "X")
    y = as_float_vector(y, "y")
    check_consistent_length(X, y)
    check_finite(X, "X")
    check_finite(y, "y")
    n, f = X.shape
    if n <= f:
        raise ConfigError(f"need more rows than features to fit: n={n}, F={f}")
    a = np.concatenate([X, np.ones((n, 1))], axis=1)
    gram = a.T @ a
    gram[np.arange(f), np.arange(f)] += ridge
    rhs = a.T @ y
    try:
        theta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"normal equations are singular: {exc}") from exc
    if not np.all(np.isfinite(theta)):
        raise NumericError("normal equations produced non-finite coefficients")
    return LinearModel(w=theta[:f].copy(), b=float(theta[f]), ridge=ridge)


def predict_linear(model: LinearModel, X) -> np.ndarray:
    """y-hat = Xw + b."""
    X = as_float_matrix(X, "X")
    check_feature_count(X, model.n_features, "X")
    return X @ model.w + model.b
