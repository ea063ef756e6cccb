"""Model registry, end-to-end training/evaluation, and the estimator facade.

Five benchmark configurations are registered by id: a linear-regression
baseline ("lr") and four recurrent stacks. Training fits the
preprocessing pipeline on the training units only, windows both splits,
and dispatches to the closed-form or iterative fitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .baseline import LinearModel, fit_linear, predict_linear
from .dataset import EngineSeriesSet, select_units
from .errors import ConfigError, DataFormatError
from .metrics import evaluate_all, mse, r2
from .netcore.layers import BatchNorm, Dense, Dropout, LayerSpec, Recurrent
from .netcore.network import ModelParams, NetworkSpec, init_params
from .netcore.network import predict as network_predict
from .preprocess import PreprocessPipeline, WindowedDataset, make_final_windows, make_windows
from .training import TrainConfig, TrainingHistory, split_by_unit, train_network
from .validation import require_fitted

SPEC_IDS = ("lr", "lstm128", "blstm128", "blstm_dropout", "blstm_dropout_bn")

_ARCHITECTURES: dict[str, tuple[LayerSpec, ...]] = {
    "lstm128": (
        Recurrent(128),
        Dense(1),
    ),
    "blstm128": (
        Recurrent(128, bidirectional=True),
        Dense(1),
    ),
    "blstm_dropout": (
        Recurrent(128, bidirectional=True),
        Dropout(0.2),
        Recurrent(128, bidirectional=True),
        Dropout(0.2),
        Dense(1),
    ),
    "blstm_dropout_bn": (
        Recurrent(512, bidirectional=True),
        Dropout(0.4),
        BatchNorm(),
        Recurrent(256, bidirectional=True),
        Dropout(0.4),
        BatchNorm(),
        Recurrent(128, bidirectional=True),
        Dropout(0.4),
        Dense(11),
        Dense(1),
    ),
}


def check_spec_id(spec_id: str) -> str:
    if spec_id not in SPEC_IDS:
        raise ConfigError(
            f"unknown spec id {spec_id!r}; valid ids: {', '.join(SPEC_IDS)}"
        )
    return spec_id


def build_layers(spec_id: str) -> tuple[LayerSpec, ...] | None:
    """Layer stack for a spec id; None for the linear baseline."""
    check_spec_id(spec_id)
    return _ARCHITECTURES.get(spec_id)


def default_config(spec_id: str, **overrides) -> TrainConfig:
    """TrainConfig with per-spec defaults; the linear baseline uses T = 1."""
    check_spec_id(spec_id)
    if spec_id == "lr":
        overrides.setdefault("window", 1)
    return TrainConfig(spec_id=spec_id, **overrides)


@dataclass
class TrainedModel:
    """A fitted model plus everything needed to reuse or persist it."""

    spec_id: str
    config: TrainConfig
    pipeline: PreprocessPipeline
    history: TrainingHistory
    network_spec: NetworkSpec | None = None
    params: ModelParams | None = None
    linear: LinearModel | None = None

    @property
    def kind(self) -> str:
        return "linear" if self.linear is not None else "network"

    def predict_windows(self, x: np.ndarray) -> np.ndarray:
        """Predict RUL for prepared windows (n, T, F)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "linear":
            return predict_linear(self.linear, x.reshape(x.shape[0], -1))
        return network_predict(
            self.network_spec, self.params, x, batch_size=self.config.batch_size
        )


def _window_split(
    pipeline: PreprocessPipeline, subset: EngineSeriesSet, config: TrainConfig
) -> WindowedDataset:
    return make_windows(
        pipeline.transform(subset), subset, window=config.window, stride=config.stride
    )


def train_model(config: TrainConfig, series: EngineSeriesSet) -> TrainedModel:
    """Fit one registered configuration on a labeled series set.

    The unit split, parameter init, and training loop each draw from
    independent child streams of config.seed, so the whole run is
    reproducible from (config, data).
    """
    check_spec_id(config.spec_id)
    if not series.labeled:
        raise ConfigError("training needs a RUL-labeled series; call attach_linear_rul")
    seed_split, seed_init, seed_loop = np.random.SeedSequence(config.seed).spawn(3)
    train_ids, val_ids = split_by_unit(series, config.validation_fraction, seed_split)
    train_sub = select_units(series, train_ids)
    val_sub = select_units(series, val_ids)
    pipeline = PreprocessPipeline(mask_mode=config.mask_mode).fit(train_sub)
    train_w = _window_split(pipeline, train_sub, config)
    val_w = _window_split(pipeline, val_sub, config)

    if config.spec_id == "lr":
        x_train = train_w.X.reshape(train_w.n_windows, -1)
        x_val = val_w.X.reshape(val_w.n_windows, -1)
        linear = fit_linear(x_train, train_w.y)
        history = TrainingHistory(
            train_loss=[mse(train_w.y, predict_linear(linear, x_train))],
            val_loss=[mse(val_w.y, predict_linear(linear, x_val))],
            lr=[0.0],
            best_epoch=0,
        )
        return TrainedModel(
            spec_id=config.spec_id,
            config=config,
            pipeline=pipeline,
            history=history,
            linear=linear,
        )

    net_spec = NetworkSpec(
        layers=_ARCHITECTURES[config.spec_id], n_features=pipeline.mask_.n_features
    )
    model = init_params(net_spec, seed_init)
    rng = np.random.default_rng(seed_loop)
    best_model, history = train_network(
        net_spec, model, config, train_w.X, train_w.y, val_w.X, val_w.y, rng
    )
    return TrainedModel(
        spec_id=config.spec_id,
        config=config,
        pipeline=pipeline,
        history=history,
        network_spec=net_spec,
        params=best_model,
    )


@dataclass(frozen=True)
class EvaluationResult:
    """Per-unit predictions plus the four aggregate metrics."""

    metrics: dict[str, float]
    unit_id: np.ndarray
    y_true: np.ndarray
    y_pred: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.y_true - self.y_pred

    @property
    def n(self) -> int:
        return self.y_true.shape[0]


def evaluate_model(
    trained: TrainedModel, test_series: EngineSeriesSet, true_ruls
) -> EvaluationResult:
    """Table-style evaluation: one final-window prediction per test unit.

    true_ruls holds the actual remaining cycles per unit, ordered by
    ascending unit id (the RUL-file convention). Negative predictions are
    reported as-is.
    """
    y_true = np.asarray(true_ruls, dtype=np.float64).reshape(-1)
    if y_true.shape[0] != test_series.n_units:
        raise DataFormatError(
            f"RUL file lists {y_true.shape[0]} units, test set has {test_series.n_units}"
        )
    features = trained.pipeline.transform(test_series)
    final = make_final_windows(features, test_series, window=trained.config.window)
    y_pred = trained.predict_windows(final.X)
    return EvaluationResult(
        metrics=evaluate_all(y_true, y_pred),
        unit_id=final.unit_id,
        y_true=y_true,
        y_pred=y_pred,
    )


class RulRegressor(RegressorMixin, BaseEstimator):
    """Estimator facade over the registry: fit on a labeled series set,
    predict one RUL per unit of any compatible series set."""

    def __init__(
        self,
        spec_id: str = "blstm_dropout",
        window: int = 30,
        stride: int = 1,
        batch_size: int = 128,
        max_epochs: int = 100,
        alpha: float = 1e-3,
        plateau_factor: float = 0.5,
        plateau_patience: int = 5,
        min_alpha: float = 1e-6,
        early_stop_patience: int = 10,
        validation_fraction: float = 0.2,
        mask_mode: str = "both",
        seed: int = 0,
    ):
        self.spec_id = spec_id
        self.window = window
        self.stride = stride
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.alpha = alpha
        self.plateau_factor = plateau_factor
        self.plateau_patience = plateau_patience
        self.min_alpha = min_alpha
        self.early_stop_patience = early_stop_patience
        self.validation_fraction = validation_fraction
        self.mask_mode = mask_mode
        self.seed = seed

    def fit(self, X: EngineSeriesSet, y=None) -> "RulRegressor":
        config = TrainConfig(**self.get_params())
        self.model_ = train_model(config, X)
        return self

    def predict(self, X: EngineSeriesSet) -> np.ndarray:
        require_fitted(self, "model_")
        trained = self.model_
        features = trained.pipeline.transform(X)
        final = make_final_windows(features, X, window=trained.config.window)
        return trained.predict_windows(final.X)

    def score(self, X: EngineSeriesSet, y) -> float:
        return r2(np.asarray(y, dtype=np.float64).reshape(-1), self.predict(X))
