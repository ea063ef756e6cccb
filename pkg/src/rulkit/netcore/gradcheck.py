"""Finite-difference verification of the hand-derived backward passes.

Central differences at double precision, with the dropout stream pinned
by reseeding the generator before every loss evaluation so analytic and
numeric passes see identical masks. Batch-norm running statistics are
frozen during checking so repeated evaluations stay pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .network import ForwardCache, ModelParams, NetworkSpec, mse_loss, network_backward, network_forward

DEFAULT_EPS = 1e-5
REL_ERR_FLOOR = 1e-8


@dataclass(frozen=True)
class GradCheckReport:
    """Worst-case relative error between analytic and numeric gradients."""

    max_rel_error: float
    worst_param: str
    worst_index: int
    n_checked: int
    per_param: dict[str, float]

    def passed(self, threshold: float) -> bool:
        return self.max_rel_error <= threshold


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), REL_ERR_FLOOR)


def _loss(spec: NetworkSpec, model: ModelParams, x, y, dropout_seed: int) -> float:
    rng = np.random.default_rng(dropout_seed)
    pred, _ = network_forward(
        spec, model, x, training=True, rng=rng, update_state=False
    )
    return mse_loss(pred, y)


def _check_indices(size: int, limit: int | None) -> np.ndarray:
    if limit is None or limit >= size:
        return np.arange(size)
    return np.unique(np.linspace(0, size - 1, limit).astype(np.int64))


def grad_check(
    spec: NetworkSpec,
    model: ModelParams,
    x: np.ndarray,
    y: np.ndarray,
    eps: float = DEFAULT_EPS,
    dropout_seed: int = 0,
    limit: int | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    Per element: |g_a - g_n| / max(|g_a| + |g_n|, 1e-8), perturbing the
    parameter by +-eps. ``limit`` caps checked elements per array (evenly
    spaced, deterministic) for larger models; small models check all.
    """
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps!r}")
    rng = np.random.default_rng(dropout_seed)
    pred, cache = network_forward(
        spec, model, x, training=True, rng=rng, update_state=False
    )
    grads = network_backward(spec, model, cache, y)

    per_param: dict[str, float] = {}
    worst = (0.0, "", -1)
    n_checked = 0
    for key, array in model.params.items():
        flat = array.reshape(-1)
        analytic = grads[key].reshape(-1)
        worst_here = 0.0
        for idx in _check_indices(flat.size, limit):
            original = flat[idx]
            flat[idx] = original + eps
            loss_plus = _loss(spec, model, x, y, dropout_seed)
            flat[idx] = original - eps
            loss_minus = _loss(spec, model, x, y, dropout_seed)
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            err = relative_error(float(analytic[idx]), numeric)
            n_checked += 1
            if err > worst_here:
                worst_here = err
            if err > worst[0]:
                worst = (err, key, int(idx))
        per_param[key] = worst_here
    return GradCheckReport(
        max_rel_error=worst[0],
        worst_param=worst[1],
        worst_index=worst[2],
        n_checked=n_checked,
        per_param=per_param,
    )
