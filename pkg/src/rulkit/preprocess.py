"""Feature pruning, scaling, power transformation, and window construction.

The model-input pipeline is: feature mask -> Min-Max scaling -> Yeo-Johnson
power transform, fitted once on training data and then applied unchanged to
any split. Window construction turns the transformed per-unit sequences
into fixed-length (T, F) blocks for sequence regressors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin

from .dataset import COLUMN_NAMES, DatasetSummary, EngineSeriesSet
from .errors import ConfigError
from .validation import (
    as_float_matrix,
    check_feature_count,
    check_finite,
    check_positive_int,
    require_fitted,
)

TAG_EXPLICIT = "explicit-list"
TAG_EQ1 = "eq1-criterion"
TAG_INDEX = "target-or-index"

MASK_MODES = ("canonical", "eq1", "both")

# Columns dropped by hand after correlation analysis, plus identifier
# columns. This list is the manual-selection ground truth; the variance
# criterion below cross-checks it and additionally catches any constant
# column the list does not mention.
CANONICAL_DROP: tuple[str, ...] = (
    "unit_id",
    "op_setting_1",
    "op_setting_2",
    "sensor_1",
    "sensor_5",
    "sensor_6",
    "sensor_9",
    "sensor_10",
    "sensor_14",
    "sensor_16",
    "sensor_18",
    "sensor_19",
)


def eq1_prune_decision(mean: float, std: float, n_unique: int) -> bool:
    """Low-variance prune rule: remove iff std <= 0.005*|mean| and n_unique <= 5.

    Both conditions must hold (conjunction). |mean| keeps the threshold
    meaningful for near-zero or negative-mean columns.
    """
    return bool(std <= 0.005 * abs(mean) and n_unique <= 5)


@dataclass(frozen=True)
class FeatureMask:
    """Ordered kept-column names plus a reason tag per dropped column.

    Kept and dropped partition the 26 raw columns; unit_id and cycle are
    never kept because they identify rows rather than measure anything.
    """

    kept: tuple[str, ...]
    dropped: dict[str, tuple[str, ...]]
    mode: str

    def __post_init__(self) -> None:
        names = set(self.kept) | set(self.dropped)
        if names != set(COLUMN_NAMES) or set(self.kept) & set(self.dropped):
            raise ConfigError("mask must partition the column set")
        if "unit_id" in self.kept or "cycle" in self.kept:
            raise ConfigError("unit_id and cycle can never be model inputs")

    @property
    def n_features(self) -> int:
        return len(self.kept)

    @property
    def kept_indices(self) -> tuple[int, ...]:
        return tuple(COLUMN_NAMES.index(n) for n in self.kept)

    def apply(self, data) -> np.ndarray:
        """Select kept columns from an EngineSeriesSet or raw (n, 26) array."""
        values = data.values if isinstance(data, EngineSeriesSet) else np.asarray(data)
        if values.ndim != 2 or values.shape[1] != len(COLUMN_NAMES):
            raise ConfigError(
                f"expected (n, {len(COLUMN_NAMES)}) data, got {values.shape}"
            )
        return np.array(values[:, self.kept_indices], dtype=np.float64)


def build_feature_mask(summary: DatasetSummary, mode: str = "both") -> FeatureMask:
    """Decide kept vs dropped columns from training-data statistics.

    canonical: the fixed drop list plus cycle. eq1: the variance rule
    plus the identifier columns. both: union of the two.
    """
    if mode not in MASK_MODES:
        raise ConfigError(f"mask mode must be one of {MASK_MODES}, got {mode!r}")
    reasons: dict[str, list[str]] = {"unit_id": [TAG_INDEX], "cycle": [TAG_INDEX]}
    if mode in ("canonical", "both"):
        for name in CANONICAL_DROP:
            reasons.setdefault(name, []).append(TAG_EXPLICIT)
    if mode in ("eq1", "both"):
        for i, name in enumerate(summary.column_names):
            if eq1_prune_decision(summary.mean[i], summary.std[i], summary.n_unique[i]):
                reasons.setdefault(name, []).append(TAG_EQ1)
    kept = tuple(n for n in COLUMN_NAMES if n not in reasons)
    if not any(n.startswith("sensor_") for n in kept):
        raise ConfigError(f"mask mode {mode!r} would drop every sensor column")
    dropped = {n: tuple(sorted(tags)) for n, tags in reasons.items()}
    return FeatureMask(kept=kept, dropped=dropped, mode=mode)


class MinMaxScaler(TransformerMixin, BaseEstimator):
    """Per-feature affine map x' = (x - min) / (max - min) fitted on training data.

    Constant features map to 0.0. Transform does not clip, so values seen
    only at test time may fall outside [0, 1]; extremes near failure carry
    the degradation signal and must survive scaling.
    """

    def fit(self, X, y=None) -> "MinMaxScaler":
        X = as_float_matrix(X, "X")
        check_finite(X, "X")
        self.min_ = X.min(axis=0)
        self.max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def _denom(self) -> np.ndarray:
        span = self.max_ - self.min_
        return np.where(span > 0.0, span, 1.0), span > 0.0

    def transform(self, X) -> np.ndarray:
        require_fitted(self, "min_")
        X = as_float_matrix(X, "X")
        check_feature_count(X, self.n_features_in_, "X")
        check_finite(X, "X")
        denom, varying = self._denom()
        out = (X - self.min_) / denom
        out[:, ~varying] = 0.0
        return out

    def inverse_transform(self, X) -> np.ndarray:
        require_fitted(self, "min_")
        X = as_float_matrix(X, "X")
        check_feature_count(X, self.n_features_in_, "X")
        denom, varying = self._denom()
        return np.where(varying, X * denom, 0.0) + self.min_


def yeo_johnson(x: np.ndarray, lam: float) -> np.ndarray:
    """Yeo-Johnson map, strictly monotone increasing for every lambda.

    Uses expm1/log1p so values of lambda near (but not exactly) the branch
    points stay accurate.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    if lam != 0.0:
        out[pos] = np.expm1(lam * np.log1p(x[pos])) / lam
    else:
        out[pos] = np.log1p(x[pos])
    neg = ~pos
    if lam != 2.0:
        out[neg] = -np.expm1((2.0 - lam) * np.log1p(-x[neg])) / (2.0 - lam)
    else:
        out[neg] = -np.log1p(-x[neg])
    return out


def yeo_johnson_llf(x: np.ndarray, lam: float) -> float:
    """Profile log-likelihood of lambda for a single feature (up to a constant).

    llf = -n/2 * ln(var(psi)) + (lam - 1) * sum(sign(x) * ln(|x| + 1))
    with the population variance of the transformed values.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    psi = yeo_johnson(x, lam)
    var = psi.var()
    if not np.isfinite(var) or var <= 0.0:
        return -math.inf
    return float(-0.5 * n * np.log(var) + (lam - 1.0) * np.sum(np.sign(x) * np.log1p(np.abs(x))))


def _golden_section_max(f, lo: float, hi: float, tol: float) -> float:
    """Maximize a unimodal function on [lo, hi] to interval width tol."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


LAMBDA_RANGE = (-5.0, 5.0)
LAMBDA_TOL = 1e-6


def _fit_lambda(x: np.ndarray) -> float:
    """Best Yeo-Johnson exponent for one feature: coarse grid, then refine."""
    if np.all(x == x[0]):
        return 1.0
    grid = np.linspace(LAMBDA_RANGE[0], LAMBDA_RANGE[1], 41)
    scores = np.array([yeo_johnson_llf(x, lam) for lam in grid])
    best = int(np.argmax(scores))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    return _golden_section_max(lambda lam: yeo_johnson_llf(x, lam), lo, hi, LAMBDA_TOL)


class PowerTransform(TransformerMixin, BaseEstimator):
    """Per-feature Yeo-Johnson transform with maximum-likelihood exponents.

    Yeo-Johnson rather than Box-Cox because the scaled inputs contain
    exact zeros. Lambdas are searched over [-5, 5]; a constant feature
    gets the identity exponent 1.
    """

    def fit(self, X, y=None) -> "PowerTransform":
        X = as_float_matrix(X, "X")
        check_finite(X, "X")
        self.lambdas_ = np.array([_fit_lambda(X[:, j]) for j in range(X.shape[1])])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        require_fitted(self, "lambdas_")
        X = as_float_matrix(X, "X")
        check_feature_count(X, self.n_features_in_, "X")
        check_finite(X, "X")
        out = np.empty_like(X)
        for j, lam in enumerate(self.lambdas_):
            out[:, j] = yeo_johnson(X[:, j], float(lam))
        return out


def fit_minmax(train: np.ndarray) -> MinMaxScaler:
    return MinMaxScaler().fit(train)


def transform_minmax(scaler: MinMaxScaler, data: np.ndarray) -> np.ndarray:
    return scaler.transform(data)


def fit_power(train: np.ndarray) -> PowerTransform:
    return PowerTransform().fit(train)


def apply_power(pt: PowerTransform, data: np.ndarray) -> np.ndarray:
    return pt.transform(data)


def correlation_matrix(X) -> np.ndarray:
    """Pearson correlations between features.

    Rows/columns of constant features are NaN (undefined) rather than
    fabricated; well-defined diagonal entries are exactly 1.
    """
    X = as_float_matrix(X, "X")
    check_finite(X, "X")
    if X.shape[0] < 2:
        raise ConfigError("correlation needs at least 2 rows")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / X.shape[0]
    std = np.sqrt(np.diag(cov))
    varying = std > 0.0
    denom = np.outer(std, std)
    denom[~np.outer(varying, varying)] = 1.0
    corr = cov / denom
    corr[~varying, :] = np.nan
    corr[:, ~varying] = np.nan
    corr = np.clip(corr, -1.0, 1.0)
    idx = np.flatnonzero(varying)
    corr[idx, idx] = 1.0
    return corr


class PreprocessPipeline(TransformerMixin, BaseEstimator):
    """mask -> Min-Max -> power transform, fitted once on training data."""

    def __init__(self, mask_mode: str = "both"):
        self.mask_mode = mask_mode

    def fit(self, series: EngineSeriesSet, y=None) -> "PreprocessPipeline":
        from .dataset import summarize

        summary = summarize(series)
        self.mask_ = build_feature_mask(summary, self.mask_mode)
        feats = self.mask_.apply(series)
        self.scaler_ = MinMaxScaler().fit(feats)
        self.power_ = PowerTransform().fit(self.scaler_.transform(feats))
        return self

    def transform(self, series) -> np.ndarray:
        require_fitted(self, "mask_")
        feats = self.mask_.apply(series)
        return self.power_.transform(self.scaler_.transform(feats))

    @property
    def feature_names_(self) -> tuple[str, ...]:
        require_fitted(self, "mask_")
        return self.mask_.kept


PIPELINE_FORMAT_VERSION = 1


def pipeline_to_config(pipe: PreprocessPipeline) -> dict:
    """Serializable description of a fitted pipeline (JSON-safe types only)."""
    require_fitted(pipe, "mask_")
    return {
        "format_version": PIPELINE_FORMAT_VERSION,
        "mask_mode": pipe.mask_mode,
        "kept": list(pipe.mask_.kept),
        "dropped": {k: list(v) for k, v in pipe.mask_.dropped.items()},
        "minmax": {"min": pipe.scaler_.min_.tolist(), "max": pipe.scaler_.max_.tolist()},
        "power": {"lambda": pipe.power_.lambdas_.tolist()},
    }


def pipeline_from_config(config: dict) -> PreprocessPipeline:
    """Rebuild a fitted pipeline from pipeline_to_config output."""
    version = config.get("format_version")
    if version != PIPELINE_FORMAT_VERSION:
        raise ConfigError(
            f"unsupported pipeline format_version {version!r}, "
            f"expected {PIPELINE_FORMAT_VERSION}"
        )
    pipe = PreprocessPipeline(mask_mode=config["mask_mode"])
    pipe.mask_ = FeatureMask(
        kept=tuple(config["kept"]),
        dropped={k: tuple(v) for k, v in config["dropped"].items()},
        mode=config["mask_mode"],
    )
    scaler = MinMaxScaler()
    scaler.min_ = np.asarray(config["minmax"]["min"], dtype=np.float64)
    scaler.max_ = np.asarray(config["minmax"]["max"], dtype=np.float64)
    scaler.n_features_in_ = scaler.min_.shape[0]
    pipe.scaler_ = scaler
    power = PowerTransform()
    power.lambdas_ = np.asarray(config["power"]["lambda"], dtype=np.float64)
    power.n_features_in_ = power.lambdas_.shape[0]
    pipe.power_ = power
    n = (len(pipe.mask_.kept), scaler.n_features_in_, power.n_features_in_)
    if len(set(n)) != 1:
        raise ConfigError(f"inconsistent feature counts in pipeline config: {n}")
    return pipe


@dataclass(frozen=True)
class WindowedDataset:
    """Fixed-length windows X (n, T, F) with RUL targets y at each window's end.

    unit_id, last_cycle, and padded record each window's provenance;
    (unit_id, last_cycle) pairs are unique and no window spans two units.
    """

    X: np.ndarray
    y: np.ndarray
    unit_id: np.ndarray
    last_cycle: np.ndarray
    padded: np.ndarray

    @property
    def n_windows(self) -> int:
        return self.X.shape[0]

    @property
    def window_length(self) -> int:
        return self.X.shape[1]

    @property
    def n_features(self) -> int:
        return self.X.shape[2]


def make_final_windows(
    features: np.ndarray, series: EngineSeriesSet, window: int = 30
) -> WindowedDataset:
    """One window per unit, ending at that unit's last observed cycle.

    This is the test-time protocol: each test engine gets a single RUL
    prediction from its most recent ``window`` cycles, left-padded by
    repeating the earliest record when the unit is shorter. For an
    unlabeled series y is NaN.
    """
    features = as_float_matrix(features, "features")
    if features.shape[0] != series.n_rows:
        raise ConfigError(
            f"features have {features.shape[0]} rows, series has {series.n_rows}"
        )
    check_positive_int(window, "window")
    n = series.n_units
    xs = np.empty((n, window, features.shape[1]))
    ys = np.full(n, np.nan)
    lasts = np.empty(n, dtype=np.int64)
    pads = np.zeros(n, dtype=bool)
    for i in range(n):
        sl = series.unit_slice(i)
        feat = features[sl]
        length = feat.shape[0]
        if length >= window:
            xs[i] = feat[length - window :]
        else:
            xs[i, : window - length] = feat[0]
            xs[i, window - length :] = feat
            pads[i] = True
        lasts[i] = length
        if series.labeled:
            ys[i] = series.rul[sl][-1]
    return WindowedDataset(
        X=xs,
        y=ys,
        unit_id=series.unit_ids.astype(np.int64).copy(),
        last_cycle=lasts,
        padded=pads,
    )


def make_windows(
    features: np.ndarray,
    series: EngineSeriesSet,
    window: int = 30,
    stride: int = 1,
    pad_short: bool = True,
) -> WindowedDataset:
    """Slice per-unit sequences into (window, F) blocks ending at successive cycles.

    Windows end at cycles window, window+stride, ... within each unit, and
    y is the RUL at the final cycle. A unit shorter than the window yields
    one left-padded window (earliest record repeated) when pad_short is
    set, otherwise no windows.
    """
    features = as_float_matrix(features, "features")
    if features.shape[0] != series.n_rows:
        raise ConfigError(
            f"features have {features.shape[0]} rows, series has {series.n_rows}"
        )
    if not series.labeled:
        raise ConfigError("series must carry RUL labels before windowing")
    check_positive_int(window, "window")
    check_positive_int(stride, "stride")

    xs, ys, uids, lasts, pads = [], [], [], [], []
    for i in range(series.n_units):
        sl = series.unit_slice(i)
        feat = features[sl]
        rul = series.rul[sl]
        length = feat.shape[0]
        uid = int(series.unit_ids[i])
        if length >= window:
            ends = np.arange(window, length + 1, stride)
            view = sliding_window_view(feat, window, axis=0)
            xs.append(view[ends - window].transpose(0, 2, 1))
            ys.append(rul[ends - 1])
            uids.append(np.full(ends.size, uid, dtype=np.int64))
            lasts.append(ends.astype(np.int64))
            pads.append(np.zeros(ends.size, dtype=bool))
        elif pad_short:
            padding = np.repeat(feat[:1], window - length, axis=0)
            xs.append(np.concatenate([padding, feat])[None])
            ys.append(rul[-1:])
            uids.append(np.array([uid], dtype=np.int64))
            lasts.append(np.array([length], dtype=np.int64))
            pads.append(np.array([True]))
    if not xs:
        raise ConfigError(
            "no windows produced: every unit is shorter than the window "
            "and padding is disabled"
        )
    return WindowedDataset(
        X=np.ascontiguousarray(np.concatenate(xs), dtype=np.float64),
        y=np.concatenate(ys).astype(np.float64),
        unit_id=np.concatenate(uids),
        last_cycle=np.concatenate(lasts),
        padded=np.concatenate(pads),
    )
