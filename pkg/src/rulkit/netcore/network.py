"""Network assembly: spec validation, initialization, forward, backward.

Parameters live in an insertion-ordered dict keyed "layer{i}.{name}"
("layer{i}.fwd.wx" etc. for bidirectional layers), so optimizer steps,
serialization, and gradient checks all walk the same deterministic
layout. Batch-norm running statistics are state, not parameters: they
are advanced by training-mode forward passes, never by the optimizer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..validation import as_float_vector, as_window_tensor, check_consistent_length
from .layers import (
    BatchNorm,
    Dense,
    Dropout,
    LayerSpec,
    LstmParams,
    Recurrent,
    batchnorm_backward,
    batchnorm_forward,
    bidirectional_backward,
    bidirectional_forward,
    dense_backward,
    dense_forward,
    dropout_backward,
    dropout_forward,
    recurrent_backward,
    recurrent_forward,
)


@dataclass(frozen=True)
class NetworkSpec:
    """Ordered layer list plus the input feature width.

    Valid specs end with Dense(1, linear), contain at least one Recurrent
    layer before any Dense layer, and never place a Recurrent layer after
    the sequence has been collapsed by a Dense head.
    """

    layers: tuple[LayerSpec, ...]
    n_features: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        if not isinstance(self.n_features, int) or self.n_features < 1:
            raise ConfigError(f"n_features must be a positive integer, got {self.n_features!r}")
        last = self.layers[-1]
        if not (isinstance(last, Dense) and last.units == 1 and last.activation == "linear"):
            raise ConfigError("final layer must be Dense(1) with linear activation")
        seen_recurrent = False
        seen_dense = False
        for layer in self.layers:
            if isinstance(layer, Dense):
                if not seen_recurrent:
                    raise ConfigError("a Recurrent layer must precede any Dense layer")
                seen_dense = True
            elif isinstance(layer, Recurrent):
                if seen_dense:
                    raise ConfigError("Recurrent layers cannot follow a Dense layer")
                seen_recurrent = True

    def output_widths(self) -> tuple[int, ...]:
        """Feature width after each layer, starting from n_features."""
        widths = []
        width = self.n_features
        for layer in self.layers:
            if isinstance(layer, Recurrent):
                width = layer.units * (2 if layer.bidirectional else 1)
            elif isinstance(layer, Dense):
                width = layer.units
            widths.append(width)
        return tuple(widths)


@dataclass
class ModelParams:
    """Trainable arrays plus batch-norm running statistics."""

    params: dict[str, np.ndarray]
    state: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.params.values()))

    def copy(self) -> "ModelParams":
        return ModelParams(
            params={k: v.copy() for k, v in self.params.items()},
            state={k: v.copy() for k, v in self.state.items()},
        )

    def lstm_view(self, prefix: str) -> LstmParams:
        return LstmParams(
            wx=self.params[f"{prefix}.wx"],
            wh=self.params[f"{prefix}.wh"],
            b=self.params[f"{prefix}.b"],
        )


def _glorot(rng: np.random.Generator, shape: tuple[int, int], fan_in: int, fan_out: int):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _init_lstm(rng, out: dict, prefix: str, n_in: int, units: int) -> None:
    out[f"{prefix}.wx"] = _glorot(rng, (4 * units, n_in), n_in, units)
    out[f"{prefix}.wh"] = _glorot(rng, (4 * units, units), units, units)
    b = np.zeros(4 * units)
    b[units : 2 * units] = 1.0  # forget gate starts open so early gradients flow
    out[f"{prefix}.b"] = b


def init_params(spec: NetworkSpec, seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases except forget-gate bias 1.

    The Glorot bound uses fan_in = input width and fan_out = H (per gate),
    drawn over the full 4H block. Deterministic given (spec, seed).
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    state: dict[str, np.ndarray] = {}
    width = spec.n_features
    for idx, layer in enumerate(spec.layers):
        key = f"layer{idx}"
        if isinstance(layer, Recurrent):
            if layer.bidirectional:
                _init_lstm(rng, params, f"{key}.fwd", width, layer.units)
                _init_lstm(rng, params, f"{key}.bwd", width, layer.units)
                width = 2 * layer.units
            else:
                _init_lstm(rng, params, key, width, layer.units)
                width = layer.units
        elif isinstance(layer, BatchNorm):
            params[f"{key}.gamma"] = np.ones(width)
            params[f"{key}.beta"] = np.zeros(width)
            state[f"{key}.mean"] = np.zeros(width)
            state[f"{key}.var"] = np.ones(width)
        elif isinstance(layer, Dense):
            params[f"{key}.w"] = _glorot(rng, (layer.units, width), width, layer.units)
            params[f"{key}.b"] = np.zeros(layer.units)
            width = layer.units
    return ModelParams(params=params, state=state)


@dataclass
class ForwardCache:
    """Everything the backward pass needs from one training-mode forward."""

    layer_caches: list
    pred: np.ndarray
    training: bool


def network_forward(
    spec: NetworkSpec,
    model: ModelParams,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    update_state: bool = True,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the full stack on windows x (n, T, F); returns (pred (n,), cache).

    Training mode applies dropout, normalizes with batch statistics, and
    (unless update_state is false) advances the batch-norm running
    statistics in place.
    """
    x = as_window_tensor(x, "x")
    if x.shape[2] != spec.n_features:
        raise ConfigError(f"input has {x.shape[2]} features, spec expects {spec.n_features}")
    out = x
    caches: list = []
    for idx, layer in enumerate(spec.layers):
        key = f"layer{idx}"
        if isinstance(layer, Recurrent):
            if layer.bidirectional:
                out, cache = bidirectional_forward(
                    out, model.lstm_view(f"{key}.fwd"), model.lstm_view(f"{key}.bwd")
                )
            else:
                out, cache = recurrent_forward(out, model.lstm_view(key), "forward")
            caches.append(cache)
        elif isinstance(layer, Dropout):
            out, mask = dropout_forward(out, layer.rate, training, rng)
            caches.append(mask)
        elif isinstance(layer, BatchNorm):
            out, cache, new_mean, new_var = batchnorm_forward(
                out,
                model.params[f"{key}.gamma"],
                model.params[f"{key}.beta"],
                model.state[f"{key}.mean"],
                model.state[f"{key}.var"],
                layer.momentum,
                layer.eps,
                training,
            )
            if training and update_state:
                model.state[f"{key}.mean"] = new_mean
                model.state[f"{key}.var"] = new_var
            caches.append(cache)
        elif isinstance(layer, Dense):
            out, cache = dense_forward(
                out, model.params[f"{key}.w"], model.params[f"{key}.b"], layer.activation
            )
            caches.append(cache)
        else:
            raise ConfigError(f"unknown layer type {type(layer).__name__}")
    pred = out[:, 0]
    return pred, ForwardCache(layer_caches=caches, pred=pred, training=training)


def mse_loss(pred, target) -> float:
    """Batch mean squared error (1/B) * sum((pred - target)^2)."""
    p = as_float_vector(pred, "pred")
    t = as_float_vector(target, "target")
    check_consistent_length(p, t, "pred", "target")
    if p.shape[0] == 0:
        raise ConfigError("mse_loss needs at least one element")
    d = p - t
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean(d * d))


def network_backward(
    spec: NetworkSpec, model: ModelParams, cache: ForwardCache, targets
) -> dict[str, np.ndarray]:
    """Exact gradients of the batch MSE for every trainable parameter.

    Walks the layers in reverse, threading the upstream gradient through
    each layer's hand-derived backward; keys mirror model.params.
    """
    if not cache.training:
        raise ConfigError("backward requires a training-mode forward cache")
    t = as_float_vector(targets, "targets")
    check_consistent_length(cache.pred, t, "pred", "targets")
    if len(cache.layer_caches) != len(spec.layers):
        raise ConfigError("cache does not match the network spec")
    grads: dict[str, np.ndarray] = {}
    batch = cache.pred.shape[0]
    d_out: np.ndarray = (2.0 / batch) * (cache.pred - t)[:, None]
    for idx in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[idx]
        key = f"layer{idx}"
        layer_cache = cache.layer_caches[idx]
        if isinstance(layer, Dense):
            d_out, d_w, d_b = dense_backward(
                d_out, model.params[f"{key}.w"], layer.activation, layer_cache
            )
            grads[f"{key}.w"] = d_w
            grads[f"{key}.b"] = d_b
        elif isinstance(layer, BatchNorm):
            d_out, d_gamma, d_beta = batchnorm_backward(d_out, layer_cache)
            grads[f"{key}.gamma"] = d_gamma
            grads[f"{key}.beta"] = d_beta
        elif isinstance(layer, Dropout):
            d_out = dropout_backward(d_out, layer.rate, layer_cache)
        elif isinstance(layer, Recurrent):
            if layer.bidirectional:
                fwd = model.lstm_view(f"{key}.fwd")
                bwd = model.lstm_view(f"{key}.bwd")
                d_out, g_fwd, g_bwd = bidirectional_backward(d_out, fwd, bwd, layer_cache)
                grads[f"{key}.fwd.wx"], grads[f"{key}.fwd.wh"], grads[f"{key}.fwd.b"] = g_fwd
                grads[f"{key}.bwd.wx"], grads[f"{key}.bwd.wh"], grads[f"{key}.bwd.b"] = g_bwd
            else:
                d_out, d_wx, d_wh, d_b = recurrent_backward(
                    d_out, model.lstm_view(key), layer_cache
                )
                grads[f"{key}.wx"] = d_wx
                grads[f"{key}.wh"] = d_wh
                grads[f"{key}.b"] = d_b
    return grads


def predict(
    spec: NetworkSpec, model: ModelParams, x: np.ndarray, batch_size: int = 128
) -> np.ndarray:
    """Inference-mode predictions, chunked to bound activation memory."""
    x = as_window_tensor(x, "x")
    outs = []
    for start in range(0, x.shape[0], batch_size):
        pred, _ = network_forward(
            spec, model, x[start : start + batch_size], training=False
        )
        outs.append(pred)
    return np.concatenate(outs)
