"""Remaining-useful-life prediction engine for NASA CMAPSS FD001 data.

From-scratch recurrent networks (LSTM/BLSTM with full backpropagation
through time), a linear baseline, the preprocessing pipeline they share,
and the training/evaluation loop that benchmarks them.
"""

from .baseline import LinearModel, fit_linear, predict_linear
from .dataset import (
    COLUMN_NAMES,
    DatasetSummary,
    EngineSeriesSet,
    attach_linear_rul,
    load_rul,
    load_series,
    parse_rul_text,
    parse_series_text,
    select_units,
    serialize_series,
    summarize,
)
from .metrics import evaluate_all, mae, mse, r2, rmse
from .models import (
    SPEC_IDS,
    EvaluationResult,
    RulRegressor,
    TrainedModel,
    build_layers,
    default_config,
    evaluate_model,
    train_model,
)
from .netcore import (
    BatchNorm,
    Dense,
    Dropout,
    GradCheckReport,
    LstmParams,
    ModelParams,
    NetworkSpec,
    Recurrent,
    grad_check,
    init_params,
)
from .persistence import load_model, save_model
from .preprocess import (
    FeatureMask,
    MinMaxScaler,
    PowerTransform,
    PreprocessPipeline,
    WindowedDataset,
    build_feature_mask,
    correlation_matrix,
    eq1_prune_decision,
    make_final_windows,
    make_windows,
)
from .training import (
    AdamState,
    TrainConfig,
    TrainingHistory,
    adam_step,
    early_stop_check,
    init_adam,
    reduce_lr_on_plateau,
    split_by_unit,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BatchNorm",
    "COLUMN_NAMES",
    "DatasetSummary",
    "Dense",
    "Dropout",
    "EngineSeriesSet",
    "EvaluationResult",
    "FeatureMask",
    "GradCheckReport",
    "LinearModel",
    "LstmParams",
    "MinMaxScaler",
    "ModelParams",
    "NetworkSpec",
    "PowerTransform",
    "PreprocessPipeline",
    "Recurrent",
    "RulRegressor",
    "SPEC_IDS",
    "TrainConfig",
    "TrainedModel",
    "TrainingHistory",
    "WindowedDataset",
    "adam_step",
    "attach_linear_rul",
    "build_feature_mask",
    "build_layers",
    "correlation_matrix",
    "default_config",
    "early_stop_check",
    "eq1_prune_decision",
    "evaluate_all",
    "evaluate_model",
    "fit_linear",
    "grad_check",
    "init_adam",
    "init_params",
    "load_model",
    "load_rul",
    "load_series",
    "mae",
    "make_final_windows",
    "make_windows",
    "mse",
    "parse_rul_text",
    "parse_series_text",
    "predict_linear",
    "r2",
    "reduce_lr_on_plateau",
    "rmse",
    "save_model",
    "select_units",
    "serialize_series",
    "split_by_unit",
    "summarize",
    "train_model",
    "__version__",
]
