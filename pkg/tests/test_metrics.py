"""Tests for the regression metric suite."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rulkit.errors import ConfigError, DataFormatError, NumericError
from rulkit.metrics import evaluate_all, mae, mse, r2, rmse

Y3 = np.array([1.0, 2.0, 3.0])
P3 = np.array([2.0, 4.0, 6.0])


def test_mse_hand_value():
    # (1 + 4 + 9) / 3
    assert mse(Y3, P3) == pytest.approx(14.0 / 3.0, rel=1e-15)


def test_rmse_is_root_of_mse():
    assert rmse(Y3, P3) == pytest.approx(math.sqrt(14.0 / 3.0), rel=1e-15)


def test_mae_hand_value():
    assert mae(Y3, P3) == pytest.approx(2.0, rel=1e-15)


def test_r2_perfect_prediction_is_one():
    assert r2(Y3, Y3) == 1.0


def test_r2_mean_prediction_is_zero():
    pred = np.full(3, Y3.mean())
    assert r2(Y3, pred) == pytest.approx(0.0, abs=1e-15)


def test_r2_can_be_negative():
    # Predicting worse than the mean must be reported as-is.
    assert r2(Y3, np.array([10.0, -10.0, 10.0])) < 0.0


def test_r2_zero_variance_target_raises():
    with pytest.raises(NumericError):
        r2(np.array([5.0, 5.0, 5.0]), P3)


def test_length_mismatch_raises():
    with pytest.raises(ConfigError):
        mse(Y3, P3[:2])


def test_non_finite_raises():
    with pytest.raises(DataFormatError):
        mae(np.array([1.0, np.nan]), np.array([1.0, 2.0]))


def test_empty_input_raises():
    with pytest.raises((ConfigError, DataFormatError)):
        mse(np.array([]), np.array([]))


def test_evaluate_all_keys_and_consistency():
    out = evaluate_all(Y3, P3)
    assert set(out) == {"mse", "rmse", "mae", "r2"}
    assert out["rmse"] == math.sqrt(out["mse"])
    assert all(isinstance(v, float) for v in out.values())


finite_vectors = hnp.arrays(
    dtype=np.float64,
    shape=st.integers(min_value=2, max_value=32),
    elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
)


@given(data=st.data())
@settings(max_examples=100, deadline=None)
def test_metric_identities_property(data):
    y = data.draw(finite_vectors)
    p = data.draw(
        hnp.arrays(
            dtype=np.float64,
            shape=y.shape,
            elements=st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
        )
    )
    m = mse(y, p)
    assert m >= 0.0
    # rmse squared equals mse to within a final-digit rounding.
    assert rmse(y, p) ** 2 == pytest.approx(m, rel=1e-15, abs=1e-300)
    # Jensen: mean(|e|) <= sqrt(mean(e^2)).
    assert mae(y, p) <= rmse(y, p) * (1 + 1e-12) + 1e-300
    if np.ptp(y) > 1e-9:
        assert r2(y, y) == 1.0
