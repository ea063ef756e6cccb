"""Layer-level forward and backward passes, all hand-derived numpy.

Gate block order inside every 4H-row LSTM parameter matrix is fixed as
[input i, forget f, candidate g, output o]; initialization, forward,
backward, and serialization all rely on that single convention.

Each forward returns (output, cache); each backward consumes its cache
and the upstream gradient and returns exact analytic gradients. All
arrays are float64: the gradient-check tolerances used to verify these
derivations are not reliably achievable in single precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import ConfigError, NumericError


@dataclass(frozen=True)
class Recurrent:
    """LSTM layer; bidirectional runs an independent cell in each direction."""

    units: int
    bidirectional: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.units, int) or self.units < 1:
            raise ConfigError(f"Recurrent units must be a positive integer, got {self.units!r}")


@dataclass(frozen=True)
class Dropout:
    """Inverted dropout: scale kept elements by 1/(1-rate) at training time."""

    rate: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate < 1.0:
            raise ConfigError(f"Dropout rate must be in [0, 1), got {self.rate!r}")


@dataclass(frozen=True)
class BatchNorm:
    """Per-channel normalization over the batch (and time) axes."""

    momentum: float = 0.9
    eps: float = 1e-5

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"BatchNorm momentum must be in [0, 1), got {self.momentum!r}")
        if self.eps <= 0.0:
            raise ConfigError(f"BatchNorm eps must be positive, got {self.eps!r}")


@dataclass(frozen=True)
class Dense:
    """Affine layer; collapses a sequence to its last time step on entry."""

    units: int
    activation: str = "linear"

    def __post_init__(self) -> None:
        if not isinstance(self.units, int) or self.units < 1:
            raise ConfigError(f"Dense units must be a positive integer, got {self.units!r}")
        if self.activation not in ("linear", "relu"):
            raise ConfigError(
                f"Dense activation must be 'linear' or 'relu', got {self.activation!r}"
            )


LayerSpec = Recurrent | Dropout | BatchNorm | Dense


class LstmParams(NamedTuple):
    """One direction's cell parameters: wx (4H, F_in), wh (4H, H), b (4H,)."""

    wx: np.ndarray
    wh: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.wh.shape[1]


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_lstm_shapes(params: LstmParams, n_features: int) -> int:
    h = params.wh.shape[1]
    if params.wx.shape != (4 * h, n_features):
        raise ConfigError(
            f"wx shape {params.wx.shape} inconsistent with wh {params.wh.shape} "
            f"and {n_features} input features"
        )
    if params.wh.shape != (4 * h, h) or params.b.shape != (4 * h,):
        raise ConfigError(
            f"wh/b shapes {params.wh.shape}/{params.b.shape} are not (4H, H)/(4H,)"
        )
    return h


def lstm_cell_forward(
    x_t: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, params: LstmParams
) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step: gates from w_x*x + w_h*h_prev + b, then state update.

    i = sigmoid, f = sigmoid, g = tanh, o = sigmoid over the [i, f, g, o]
    row blocks; c_t = f*c_prev + i*g; h_t = o*tanh(c_t).
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    h = _check_lstm_shapes(params, x_t.shape[-1])
    if h_prev.shape[-1] != h or c_prev.shape[-1] != h:
        raise ConfigError(
            f"state width {h_prev.shape[-1]}/{c_prev.shape[-1]} does not match H={h}"
        )
    z = x_t @ params.wx.T + h_prev @ params.wh.T + params.b
    i = sigmoid(z[..., :h])
    f = sigmoid(z[..., h : 2 * h])
    g = np.tanh(z[..., 2 * h : 3 * h])
    o = sigmoid(z[..., 3 * h :])
    c_t = f * c_prev + i * g
    h_t = o * np.tanh(c_t)
    if not (np.all(np.isfinite(h_t)) and np.all(np.isfinite(c_t))):
        raise NumericError("non-finite LSTM cell state")
    return h_t, c_t


class LstmCache(NamedTuple):
    x: np.ndarray
    gates_i: np.ndarray
    gates_f: np.ndarray
    gates_g: np.ndarray
    gates_o: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


def lstm_forward(x: np.ndarray, params: LstmParams) -> tuple[np.ndarray, LstmCache]:
    """Full-sequence LSTM from zero initial state; returns all hidden states.

    The input projection for every time step is a single matrix product;
    only the recurrent term is computed step by step.
    """
    n, t_len, n_feat = x.shape
    h = _check_lstm_shapes(params, n_feat)
    zx = (x.reshape(n * t_len, n_feat) @ params.wx.T).reshape(n, t_len, 4 * h)
    zx += params.b
    gi = np.empty((n, t_len, h))
    gf = np.empty((n, t_len, h))
    gg = np.empty((n, t_len, h))
    go = np.empty((n, t_len, h))
    cs = np.empty((n, t_len, h))
    tc = np.empty((n, t_len, h))
    hs = np.empty((n, t_len, h))
    h_t = np.zeros((n, h))
    c_t = np.zeros((n, h))
    wh_t = params.wh.T
    for t in range(t_len):
        z = zx[:, t] + h_t @ wh_t
        i = sigmoid(z[:, :h])
        f = sigmoid(z[:, h : 2 * h])
        g = np.tanh(z[:, 2 * h : 3 * h])
        o = sigmoid(z[:, 3 * h :])
        c_t = f * c_t + i * g
        tanh_c = np.tanh(c_t)
        h_t = o * tanh_c
        gi[:, t], gf[:, t], gg[:, t], go[:, t] = i, f, g, o
        cs[:, t], tc[:, t], hs[:, t] = c_t, tanh_c, h_t
    if not np.all(np.isfinite(hs)):
        raise NumericError("non-finite LSTM hidden states")
    return hs, LstmCache(x, gi, gf, gg, go, cs, tc, hs)


def lstm_backward(
    d_h: np.ndarray, params: LstmParams, cache: LstmCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backpropagation through time for one direction.

    d_h is the upstream gradient on every hidden state (n, T, H). The
    time loop accumulates pre-activation gradients dz; the parameter
    gradients then come from three whole-sequence matrix products.
    Returns (dx, d_wx, d_wh, d_b).
    """
    x, gi, gf, gg, go, cs, tc, hs = cache
    n, t_len, h = d_h.shape
    dz = np.empty((n, t_len, 4 * h))
    dh_next = np.zeros((n, h))
    dc_next = np.zeros((n, h))
    wh = params.wh
    for t in range(t_len - 1, -1, -1):
        dh = d_h[:, t] + dh_next
        i, f, g, o = gi[:, t], gf[:, t], gg[:, t], go[:, t]
        tanh_c = tc[:, t]
        do = dh * tanh_c
        dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
        c_prev = cs[:, t - 1] if t > 0 else np.zeros((n, h))
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz_t = dz[:, t]
        dz_t[:, :h] = di * i * (1.0 - i)
        dz_t[:, h : 2 * h] = df * f * (1.0 - f)
        dz_t[:, 2 * h : 3 * h] = dg * (1.0 - g * g)
        dz_t[:, 3 * h :] = do * o * (1.0 - o)
        dh_next = dz_t @ wh
        dc_next = dc * f
    h_prev = np.concatenate([np.zeros((n, 1, h)), hs[:, :-1]], axis=1)
    dz_flat = dz.reshape(n * t_len, 4 * h)
    d_wx = dz_flat.T @ x.reshape(n * t_len, -1)
    d_wh = dz_flat.T @ h_prev.reshape(n * t_len, h)
    d_b = dz_flat.sum(axis=0)
    dx = (dz_flat @ params.wx).reshape(x.shape)
    return dx, d_wx, d_wh, d_b


def recurrent_forward(
    seq: np.ndarray, params: LstmParams, direction: str = "forward"
) -> tuple[np.ndarray, tuple]:
    """Run one direction over a sequence, zero initial state.

    The backward direction processes t = T..1 and writes each output back
    at its original time index, implemented as flip, forward run, flip.
    """
    if direction not in ("forward", "backward"):
        raise ConfigError(f"direction must be 'forward' or 'backward', got {direction!r}")
    if direction == "backward":
        hs_rev, cache = lstm_forward(seq[:, ::-1], params)
        return hs_rev[:, ::-1], (direction, cache)
    hs, cache = lstm_forward(seq, params)
    return hs, (direction, cache)


def recurrent_backward(
    d_out: np.ndarray, params: LstmParams, cache: tuple
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    direction, inner = cache
    if direction == "backward":
        dx_rev, d_wx, d_wh, d_b = lstm_backward(
            np.ascontiguousarray(d_out[:, ::-1]), params, inner
        )
        return dx_rev[:, ::-1], d_wx, d_wh, d_b
    return lstm_backward(d_out, params, inner)


def bidirectional_forward(
    seq: np.ndarray, fwd_params: LstmParams, bwd_params: LstmParams
) -> tuple[np.ndarray, tuple]:
    """Both directions over the sequence, outputs concatenated [fwd H | bwd H]."""
    if fwd_params.hidden != bwd_params.hidden:
        raise ConfigError(
            f"direction widths differ: {fwd_params.hidden} vs {bwd_params.hidden}"
        )
    h_fwd, cache_fwd = recurrent_forward(seq, fwd_params, "forward")
    h_bwd, cache_bwd = recurrent_forward(seq, bwd_params, "backward")
    return np.concatenate([h_fwd, h_bwd], axis=2), (cache_fwd, cache_bwd)


def bidirectional_backward(
    d_out: np.ndarray, fwd_params: LstmParams, bwd_params: LstmParams, cache: tuple
):
    cache_fwd, cache_bwd = cache
    h = fwd_params.hidden
    dx_f, dwx_f, dwh_f, db_f = recurrent_backward(d_out[:, :, :h], fwd_params, cache_fwd)
    dx_b, dwx_b, dwh_b, db_b = recurrent_backward(d_out[:, :, h:], bwd_params, cache_bwd)
    return dx_f + dx_b, (dwx_f, dwh_f, db_f), (dwx_b, dwh_b, db_b)


def dropout_forward(
    x: np.ndarray, rate: float, training: bool, rng: np.random.Generator | None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout with an independent mask per element.

    Inference mode and rate 0 are exact identities; rate 0 draws nothing
    from the generator, so enabling a no-op dropout layer cannot shift
    any downstream random stream.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate!r}")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("training-mode dropout with rate > 0 requires an rng")
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate), keep


def dropout_backward(d_out: np.ndarray, rate: float, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return d_out
    return d_out * mask / (1.0 - rate)


class BatchNormCache(NamedTuple):
    x_hat: np.ndarray
    inv_std: np.ndarray
    gamma: np.ndarray
    n: int


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    momentum: float,
    eps: float,
    training: bool,
) -> tuple[np.ndarray, BatchNormCache | None, np.ndarray, np.ndarray]:
    """Normalize per channel over all leading axes (batch, and time if present).

    Training uses batch statistics (population variance) and returns
    running statistics advanced by the momentum rule new = momentum*old +
    (1-momentum)*batch; inference normalizes with the running statistics
    unchanged. Returns (y, cache, running_mean, running_var).
    """
    channels = x.shape[-1]
    flat = x.reshape(-1, channels)
    if training:
        n = flat.shape[0]
        if n < 2:
            raise NumericError("batch normalization needs more than one value per channel")
        mean = flat.mean(axis=0)
        var = flat.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (flat - mean) * inv_std
        y = gamma * x_hat + beta
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
        cache = BatchNormCache(x_hat=x_hat, inv_std=inv_std, gamma=gamma, n=n)
        return y.reshape(x.shape), cache, new_mean, new_var
    inv_std = 1.0 / np.sqrt(running_var + eps)
    y = gamma * (flat - running_mean) * inv_std + beta
    return y.reshape(x.shape), None, running_mean, running_var


def batchnorm_backward(
    d_out: np.ndarray, cache: BatchNormCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Training-mode gradients through the batch statistics.

    Returns (dx, d_gamma, d_beta).
    """
    x_hat, inv_std, gamma, n = cache
    d_flat = d_out.reshape(-1, d_out.shape[-1])
    d_gamma = (d_flat * x_hat).sum(axis=0)
    d_beta = d_flat.sum(axis=0)
    d_xhat = d_flat * gamma
    dx = (inv_std / n) * (
        n * d_xhat - d_xhat.sum(axis=0) - x_hat * (d_xhat * x_hat).sum(axis=0)
    )
    return dx.reshape(d_out.shape), d_gamma, d_beta


class DenseCache(NamedTuple):
    x2d: np.ndarray
    z: np.ndarray | None
    in_shape: tuple


def dense_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, activation: str
) -> tuple[np.ndarray, DenseCache]:
    """Affine map y = x w^T + b on 2-D input.

    A 3-D sequence input is collapsed to its final time step first: the
    head regresses one value per window, so only the last hidden state
    feeds it.
    """
    in_shape = x.shape
    x2d = x[:, -1, :] if x.ndim == 3 else x
    z = x2d @ w.T + b
    if activation == "relu":
        return np.maximum(z, 0.0), DenseCache(x2d=x2d, z=z, in_shape=in_shape)
    return z, DenseCache(x2d=x2d, z=None, in_shape=in_shape)


def dense_backward(
    d_out: np.ndarray, w: np.ndarray, activation: str, cache: DenseCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, d_w, d_b); dx matches the original (possibly 3-D) input."""
    x2d, z, in_shape = cache
    dz = d_out * (z > 0.0) if activation == "relu" else d_out
    d_w = dz.T @ x2d
    d_b = dz.sum(axis=0)
    dx2d = dz @ w
    if len(in_shape) == 3:
        dx = np.zeros(in_shape)
        dx[:, -1, :] = dx2d
        return dx, d_w, d_b
    return dx2d, d_w, d_b
