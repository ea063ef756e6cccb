"""Adam optimizer, schedulers, unit-level splitting, and the training loop.

Everything is deterministic given (config, data, seed): the unit split,
parameter init, epoch shuffles, and dropout masks each consume their own
seeded stream, so two runs with the same inputs produce bit-identical
training histories.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .dataset import EngineSeriesSet
from .errors import ConfigError, NumericError
from .netcore.network import (
    ModelParams,
    NetworkSpec,
    mse_loss,
    network_backward,
    network_forward,
    predict,
)

IMPROVEMENT_THRESHOLD = 1e-7


@dataclass
class AdamState:
    """First/second moments per parameter plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: dict[str, np.ndarray], alpha: float = 1e-3) -> AdamState:
    if alpha <= 0:
        raise ConfigError(f"learning rate must be positive, got {alpha!r}")
    return AdamState(
        m={k: np.zeros_like(a) for k, a in params.items()},
        v={k: np.zeros_like(a) for k, a in params.items()},
        alpha=alpha,
    )


def adam_step(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; arrays are updated in place.

    t increments first, then m-hat = m/(1-b1^t), v-hat = v/(1-b2^t),
    theta -= alpha * m-hat / (sqrt(v-hat) + eps).
    """
    if set(grads) != set(params):
        raise ConfigError("gradient keys do not match parameter keys")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for key, theta in params.items():
        g = grads[key]
        if g.shape != theta.shape:
            raise ConfigError(
                f"gradient shape {g.shape} does not match parameter {key} {theta.shape}"
            )
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        theta -= state.alpha * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def reduce_lr_on_plateau(
    val_losses,
    alpha0: float,
    factor: float = 0.5,
    patience: int = 5,
    min_alpha: float = 1e-6,
    threshold: float = IMPROVEMENT_THRESHOLD,
) -> float:
    """Learning rate after replaying the validation history from alpha0.

    A loss counts as an improvement only when it beats the best seen by
    more than ``threshold``; after ``patience`` consecutive non-improving
    epochs the rate is multiplied by ``factor`` (floored at min_alpha)
    and the patience counter resets.
    """
    if not 0.0 < factor < 1.0:
        raise ConfigError(f"plateau factor must be in (0, 1), got {factor!r}")
    if patience < 1:
        raise ConfigError(f"plateau patience must be >= 1, got {patience!r}")
    alpha = alpha0
    best = np.inf
    wait = 0
    for loss in val_losses:
        if loss < best - threshold:
            best = loss
            wait = 0
        else:
            wait += 1
            if wait >= patience:
                alpha = max(alpha * factor, min_alpha)
                wait = 0
    return alpha


def early_stop_check(
    val_losses, patience: int, threshold: float = IMPROVEMENT_THRESHOLD
) -> tuple[bool, int]:
    """(stop, best_epoch) after the recorded validation history.

    Stops once ``patience`` consecutive epochs fail to improve on the
    best loss by more than ``threshold``; best_epoch is the exact argmin
    regardless of the threshold.
    """
    if patience < 1:
        raise ConfigError(f"early-stop patience must be >= 1, got {patience!r}")
    losses = list(val_losses)
    if not losses:
        raise ConfigError("early_stop_check needs a non-empty history")
    best = np.inf
    wait = 0
    stop = False
    for loss in losses:
        if loss < best - threshold:
            best = loss
            wait = 0
        else:
            wait += 1
            if wait >= patience:
                stop = True
                break
    return stop, int(np.argmin(losses))


def split_by_unit(
    series: EngineSeriesSet, validation_fraction: float, seed
) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint (train_unit_ids, validation_unit_ids), shuffled by seed.

    The last ceil(fraction * n_units) of the shuffled order are held out.
    Splitting whole units (never rows or windows) keeps any part of a
    validation engine's life out of the training set.
    """
    if not 0.0 < validation_fraction < 1.0:
        raise ConfigError(
            f"validation fraction must be in (0, 1), got {validation_fraction!r}"
        )
    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(series.unit_ids)
    n_val = int(np.ceil(validation_fraction * series.n_units))
    if n_val >= series.n_units:
        raise ConfigError(
            f"validation fraction {validation_fraction} leaves no training units"
        )
    train_ids = np.sort(shuffled[: series.n_units - n_val])
    val_ids = np.sort(shuffled[series.n_units - n_val :])
    return train_ids, val_ids


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on besides the data itself."""

    spec_id: str
    window: int = 30
    stride: int = 1
    batch_size: int = 128
    max_epochs: int = 100
    alpha: float = 1e-3
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    min_alpha: float = 1e-6
    early_stop_patience: int = 10
    validation_fraction: float = 0.2
    mask_mode: str = "both"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.window < 1 or self.stride < 1:
            raise ConfigError("window and stride must be >= 1")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size!r}")
        if self.max_epochs < 1:
            raise ConfigError(f"max epochs must be >= 1, got {self.max_epochs!r}")
        if self.alpha <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.alpha!r}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError(
                f"validation fraction must be in (0, 1), got {self.validation_fraction!r}"
            )
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ConfigError("patience values must be >= 1")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ConfigError(
                f"plateau factor must be in (0, 1), got {self.plateau_factor!r}"
            )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TrainingHistory:
    """Per-epoch train loss, validation loss, and the learning rate used."""

    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def n_epochs(self) -> int:
        return len(self.val_loss)


def history_to_csv(history: TrainingHistory) -> str:
    """CSV with shortest round-trip float formatting, so identical runs
    produce byte-identical files."""
    lines = ["epoch,train_loss,val_loss,lr"]
    for i in range(history.n_epochs):
        lines.append(
            f"{i},{history.train_loss[i]!r},{history.val_loss[i]!r},{history.lr[i]!r}"
        )
    return "\n".join(lines) + "\n"


def train_network(
    spec: NetworkSpec,
    model: ModelParams,
    config: TrainConfig,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    rng: np.random.Generator,
) -> tuple[ModelParams, TrainingHistory]:
    """Mini-batch Adam with plateau reduction and early stopping.

    ``rng`` drives the epoch shuffles and dropout masks. The returned
    model is the snapshot from the epoch with minimum validation loss
    (exact argmin), whether or not early stopping fired. Epoch train loss
    is the batch-size-weighted mean of batch losses.
    """
    n = x_train.shape[0]
    if n == 0 or x_val.shape[0] == 0:
        raise ConfigError("training and validation sets must be non-empty")
    state = init_adam(model.params, alpha=config.alpha)
    history = TrainingHistory()
    best_val = np.inf
    best_model = model.copy()
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            xb = x_train[batch]
            yb = y_train[batch]
            try:
                pred, cache = network_forward(spec, model, xb, training=True, rng=rng)
            except NumericError as exc:
                raise NumericError(
                    f"epoch {epoch}, batch {start // config.batch_size}: {exc}"
                ) from exc
            batch_loss = mse_loss(pred, yb)
            if not np.isfinite(batch_loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {start // config.batch_size}"
                )
            grads = network_backward(spec, model, cache, yb)
            adam_step(model.params, grads, state)
            loss_sum += batch_loss * batch.size
        train_loss = loss_sum / n
        val_pred = predict(spec, model, x_val, batch_size=config.batch_size)
        val_loss = mse_loss(val_pred, y_val)
        if not np.isfinite(val_loss):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        history.train_loss.append(float(train_loss))
        history.val_loss.append(float(val_loss))
        history.lr.append(float(state.alpha))
        if val_loss < best_val:
            best_val = val_loss
            best_model = model.copy()
        state.alpha = reduce_lr_on_plateau(
            history.val_loss,
            config.alpha,
            factor=config.plateau_factor,
            patience=config.plateau_patience,
            min_alpha=config.min_alpha,
        )
        stop, best_epoch = early_stop_check(history.val_loss, config.early_stop_patience)
        history.best_epoch = best_epoch
        if stop:
            break
    return best_model, history
