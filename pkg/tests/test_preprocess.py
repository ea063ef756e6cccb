"""Tests for feature pruning, scaling, power transform, and windowing."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulkit.dataset import COLUMN_NAMES, attach_linear_rul, summarize
from rulkit.errors import ConfigError, DataFormatError, NotFittedError
from rulkit.preprocess import (
    CANONICAL_DROP,
    MinMaxScaler,
    PowerTransform,
    PreprocessPipeline,
    build_feature_mask,
    correlation_matrix,
    eq1_prune_decision,
    fit_minmax,
    fit_power,
    make_final_windows,
    make_windows,
    pipeline_from_config,
    pipeline_to_config,
    transform_minmax,
    yeo_johnson,
    yeo_johnson_llf,
)

from conftest import make_synthetic_series

# The 12 input channels left after combining the fixed drop list with the
# low-variance rule (which additionally removes the constant op_setting_3).
EXPECTED_KEPT = (
    "sensor_2",
    "sensor_3",
    "sensor_4",
    "sensor_7",
    "sensor_8",
    "sensor_11",
    "sensor_12",
    "sensor_13",
    "sensor_15",
    "sensor_17",
    "sensor_20",
    "sensor_21",
)


# --- low-variance prune rule ---


def test_prune_removes_constant_column():
    assert eq1_prune_decision(10.0, 0.0, 1) is True


def test_prune_keeps_low_std_many_values():
    # std passes the threshold but 6 distinct values > 5: keep.
    assert eq1_prune_decision(10.0, 0.04, 6) is False


def test_prune_removes_low_std_few_values():
    assert eq1_prune_decision(10.0, 0.04, 5) is True


def test_prune_keeps_high_std_few_values():
    assert eq1_prune_decision(10.0, 1.0, 2) is False


@given(
    mean=st.floats(-1e4, 1e4, allow_nan=False),
    std=st.floats(0, 1e4, allow_nan=False),
    n_unique=st.integers(1, 1000),
)
@settings(max_examples=200, deadline=None)
def test_prune_is_a_conjunction(mean, std, n_unique):
    expected = (std <= 0.005 * abs(mean)) and (n_unique <= 5)
    assert eq1_prune_decision(mean, std, n_unique) is expected


# --- feature mask ---


def test_mask_both_keeps_expected_twelve(synth_series):
    mask = build_feature_mask(summarize(synth_series), mode="both")
    assert mask.kept == EXPECTED_KEPT
    assert mask.n_features == 12


def test_mask_tags(synth_series):
    mask = build_feature_mask(summarize(synth_series), mode="both")
    assert mask.dropped["cycle"] == ("target-or-index",)
    assert mask.dropped["unit_id"] == ("explicit-list", "target-or-index")
    # Constant setting is caught by the variance rule only.
    assert mask.dropped["op_setting_3"] == ("eq1-criterion",)
    # A constant sensor on the fixed list carries both reasons.
    assert mask.dropped["sensor_1"] == ("eq1-criterion", "explicit-list")
    # A varying sensor on the fixed list carries only the list reason.
    assert mask.dropped["sensor_9"] == ("explicit-list",)


def test_mask_canonical_ignores_statistics(synth_series):
    mask = build_feature_mask(summarize(synth_series), mode="canonical")
    assert set(mask.dropped) == set(CANONICAL_DROP) | {"cycle"}
    # op_setting_3 is constant but not on the list, so canonical keeps it.
    assert "op_setting_3" in mask.kept
    assert mask.n_features == 13


def test_mask_eq1_only_drops_constants(synth_series):
    mask = build_feature_mask(summarize(synth_series), mode="eq1")
    # Varying sensors on the fixed list survive under the variance rule alone.
    assert "sensor_9" in mask.kept
    assert "op_setting_3" not in mask.kept
    assert "unit_id" in mask.dropped and "cycle" in mask.dropped


def test_mask_unknown_mode_raises(synth_series):
    with pytest.raises(ConfigError):
        build_feature_mask(summarize(synth_series), mode="all")


def test_mask_apply_selects_columns(synth_series):
    mask = build_feature_mask(summarize(synth_series), mode="both")
    out = mask.apply(synth_series)
    assert out.shape == (synth_series.n_rows, 12)
    col = COLUMN_NAMES.index("sensor_2")
    assert np.array_equal(out[:, 0], synth_series.values[:, col])


# --- min-max scaling ---


def test_minmax_endpoints_and_midpoint():
    scaler = fit_minmax(np.array([[2.0], [4.0], [6.0]]))
    out = transform_minmax(scaler, np.array([[2.0], [4.0], [6.0]]))
    assert out.ravel().tolist() == [0.0, 0.5, 1.0]


def test_minmax_test_rows_may_exceed_range():
    scaler = fit_minmax(np.array([[2.0], [4.0], [6.0]]))
    assert transform_minmax(scaler, np.array([[8.0]]))[0, 0] == pytest.approx(1.5)


def test_minmax_constant_feature_maps_to_zero():
    scaler = fit_minmax(np.array([[5.0], [5.0]]))
    out = transform_minmax(scaler, np.array([[5.0], [7.0]]))
    assert out[0, 0] == 0.0


def test_minmax_inverse_round_trip():
    rng = np.random.default_rng(0)
    train = rng.normal(size=(50, 4))
    scaler = MinMaxScaler().fit(train)
    back = scaler.inverse_transform(scaler.transform(train))
    assert np.allclose(back, train, atol=1e-12)


def test_minmax_requires_fit_first():
    with pytest.raises(NotFittedError):
        MinMaxScaler().transform(np.zeros((2, 2)))


def test_minmax_feature_count_mismatch():
    scaler = fit_minmax(np.zeros((3, 2)))
    with pytest.raises(ConfigError):
        transform_minmax(scaler, np.zeros((3, 3)))


def test_minmax_rejects_non_finite():
    with pytest.raises(DataFormatError):
        fit_minmax(np.array([[1.0], [np.nan]]))


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=40))
@settings(max_examples=100, deadline=None)
def test_minmax_training_rows_land_in_unit_interval(values):
    train = np.asarray(values)[:, None]
    out = transform_minmax(fit_minmax(train), train)
    assert np.all(out >= -1e-12) and np.all(out <= 1 + 1e-12)


# --- Yeo-Johnson transform ---


def test_yeo_johnson_identity_branch():
    x = np.array([0.0, 0.5, 2.0])
    assert np.allclose(yeo_johnson(x, 1.0), x)


def test_yeo_johnson_log_branch():
    # lambda = 0, x = e - 1 -> ln(e) = 1.
    assert yeo_johnson(np.array([np.e - 1.0]), 0.0)[0] == pytest.approx(1.0, rel=1e-15)


def test_yeo_johnson_negative_branches():
    x = np.array([-0.5])
    assert yeo_johnson(x, 1.0)[0] == pytest.approx(-0.5)
    # lambda = 2 negative branch: -log1p(-x).
    assert yeo_johnson(x, 2.0)[0] == pytest.approx(-0.4054651081081644, rel=1e-14)


def test_yeo_johnson_continuity_at_branch_lambdas():
    x = np.array([-2.0, -0.3, 0.0, 0.4, 3.0])
    for lam in (0.0, 2.0):
        near = yeo_johnson(x, lam + 1e-9)
        assert np.allclose(yeo_johnson(x, lam), near, atol=1e-7)


@given(
    lam=st.floats(-5, 5, allow_nan=False),
    a=st.floats(-50, 50, allow_nan=False),
    delta=st.floats(1e-3, 10, allow_nan=False),
)
@settings(max_examples=200, deadline=None)
def test_yeo_johnson_strictly_monotone(lam, a, delta):
    lo, hi = yeo_johnson(np.array([a, a + delta]), lam)
    assert lo < hi


def test_fitted_lambda_reduces_right_skew():
    sample = np.array([0.0, 0.01, 0.02, 0.05, 0.1, 1.0])
    pt = fit_power(sample[:, None])
    lam = float(pt.lambdas_[0])
    assert -5.0 <= lam <= 5.0

    def skew(v):
        c = v - v.mean()
        return float(np.mean(c**3) / np.mean(c**2) ** 1.5)

    after = yeo_johnson(sample, lam)
    assert abs(skew(after)) < abs(skew(sample))


def test_fitted_lambda_matches_reference_optimizer():
    # Independent check: scipy maximizes the same profile likelihood.
    stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(42)
    x = rng.lognormal(0.0, 0.8, 200)
    ours = float(fit_power(x[:, None]).lambdas_[0])
    reference = float(stats.yeojohnson_normmax(x))
    assert ours == pytest.approx(reference, abs=1e-5)
    assert yeo_johnson_llf(x, ours) >= yeo_johnson_llf(x, reference) - 1e-9


def test_fit_power_constant_column_gets_identity_lambda():
    pt = fit_power(np.full((10, 1), 0.3))
    assert float(pt.lambdas_[0]) == 1.0


def test_power_transform_applies_per_column_lambda():
    rng = np.random.default_rng(1)
    train = np.column_stack([rng.uniform(0, 1, 60), rng.lognormal(0, 1, 60)])
    pt = PowerTransform().fit(train)
    out = pt.transform(train)
    for j in range(2):
        assert np.allclose(out[:, j], yeo_johnson(train[:, j], float(pt.lambdas_[j])))


def test_power_requires_fit_first():
    with pytest.raises(NotFittedError):
        PowerTransform().transform(np.zeros((2, 2)))


# --- correlation matrix ---


def test_correlation_hand_value():
    X = np.column_stack([[1.0, 2.0, 3.0], [1.0, 2.0, 4.0]])
    C = correlation_matrix(X)
    assert C.shape == (2, 2)
    assert C[0, 0] == 1.0 and C[1, 1] == 1.0
    assert C[0, 1] == pytest.approx(0.9819805060619656, rel=1e-12)
    assert C[0, 1] == C[1, 0]


def test_correlation_constant_column_is_nan():
    X = np.column_stack([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]])
    C = correlation_matrix(X)
    assert np.isnan(C[0, 1]) and np.isnan(C[1, 1])
    assert C[0, 0] == 1.0


def test_correlation_bounded():
    rng = np.random.default_rng(7)
    C = correlation_matrix(rng.normal(size=(30, 5)))
    assert np.all(C <= 1.0) and np.all(C >= -1.0)


# --- windowing ---


def _unit_series(length, seed=0):
    series = make_synthetic_series(n_units=1, min_len=length, max_len=length, seed=seed)
    return attach_linear_rul(series)


def test_windows_end_cycles_and_targets():
    series = _unit_series(5)
    feats = np.arange(5, dtype=np.float64)[:, None]
    ds = make_windows(feats, series, window=3, stride=1)
    assert ds.n_windows == 3
    assert ds.last_cycle.tolist() == [3, 4, 5]
    # RUL at the window's final cycle: max_cycle - last_cycle.
    assert ds.y.tolist() == [2.0, 1.0, 0.0]
    assert not ds.padded.any()
    assert np.array_equal(ds.X[0, :, 0], [0.0, 1.0, 2.0])
    assert np.array_equal(ds.X[2, :, 0], [2.0, 3.0, 4.0])


def test_windows_stride_two():
    series = _unit_series(7)
    feats = np.arange(7, dtype=np.float64)[:, None]
    ds = make_windows(feats, series, window=3, stride=2)
    assert ds.last_cycle.tolist() == [3, 5, 7]


def test_short_unit_left_padded():
    series = _unit_series(2)
    feats = np.array([[10.0], [20.0]])
    ds = make_windows(feats, series, window=4)
    assert ds.n_windows == 1
    assert bool(ds.padded[0]) is True
    # Earliest record repeated on the left.
    assert ds.X[0, :, 0].tolist() == [10.0, 10.0, 10.0, 20.0]
    assert ds.y[0] == 0.0
    assert ds.last_cycle[0] == 2


def test_short_unit_dropped_when_padding_disabled():
    long = _unit_series(8, seed=1)
    feats = np.arange(8, dtype=np.float64)[:, None]
    ds = make_windows(feats, long, window=4, pad_short=False)
    assert ds.n_windows == 5
    short = _unit_series(2)
    with pytest.raises(ConfigError):
        make_windows(np.zeros((2, 1)), short, window=4, pad_short=False)


def test_window_length_one_keeps_every_row(synth_labeled):
    feats = np.zeros((synth_labeled.n_rows, 3))
    ds = make_windows(feats, synth_labeled, window=1)
    assert ds.X.shape == (synth_labeled.n_rows, 1, 3)
    assert np.array_equal(ds.y, synth_labeled.rul.astype(float))


def test_windows_require_labels(synth_series):
    with pytest.raises(ConfigError):
        make_windows(np.zeros((synth_series.n_rows, 2)), synth_series, window=3)


@given(length=st.integers(1, 60), window=st.integers(1, 40), stride=st.integers(1, 5))
@settings(max_examples=120, deadline=None)
def test_window_count_formula(length, window, stride):
    series = _unit_series(length)
    feats = np.zeros((length, 2))
    ds = make_windows(feats, series, window=window, stride=stride)
    if length >= window:
        expected = (length - window) // stride + 1
    else:
        expected = 1
    assert ds.n_windows == expected
    # Provenance pairs are unique and windows never span units.
    pairs = set(zip(ds.unit_id.tolist(), ds.last_cycle.tolist()))
    assert len(pairs) == ds.n_windows


def test_final_windows_one_per_unit(synth_labeled):
    feats = np.random.default_rng(0).normal(size=(synth_labeled.n_rows, 4))
    ds = make_final_windows(feats, synth_labeled, window=30)
    assert ds.n_windows == synth_labeled.n_units
    assert np.array_equal(ds.unit_id, synth_labeled.unit_ids)
    assert np.array_equal(ds.last_cycle, synth_labeled.unit_lengths)
    assert np.array_equal(ds.padded, synth_labeled.unit_lengths < 30)
    # Last time step equals each unit's final feature row.
    for i in range(ds.n_windows):
        final_row = feats[synth_labeled.unit_slice(i)][-1]
        assert np.array_equal(ds.X[i, -1], final_row)
        assert ds.y[i] == synth_labeled.rul[synth_labeled.unit_slice(i)][-1]


def test_final_windows_unlabeled_targets_are_nan(synth_series):
    feats = np.zeros((synth_series.n_rows, 2))
    ds = make_final_windows(feats, synth_series, window=10)
    assert np.all(np.isnan(ds.y))


# --- end-to-end pipeline ---


def test_pipeline_fit_transform_shape(synth_labeled):
    pipe = PreprocessPipeline(mask_mode="both").fit(synth_labeled)
    out = pipe.transform(synth_labeled)
    assert out.shape == (synth_labeled.n_rows, 12)
    assert pipe.feature_names_ == EXPECTED_KEPT
    assert np.all(np.isfinite(out))


def test_pipeline_requires_fit(synth_labeled):
    with pytest.raises(NotFittedError):
        PreprocessPipeline().transform(synth_labeled)


def test_pipeline_config_round_trip(synth_labeled):
    pipe = PreprocessPipeline(mask_mode="both").fit(synth_labeled)
    config = json.loads(json.dumps(pipeline_to_config(pipe)))
    clone = pipeline_from_config(config)
    a = pipe.transform(synth_labeled)
    b = clone.transform(synth_labeled)
    assert np.array_equal(a, b)
    assert clone.feature_names_ == pipe.feature_names_
