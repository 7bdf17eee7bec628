"""Sample autocovariance, autocorrelation and cross-covariance estimators."""
from __future__ import annotations

import numpy as np
import pytest

from app.services.errors import DimensionError, LagTooLargeError, OffGridLagError, ToolkitError
from app.services.estimators import (
    LagSet,
    grid_multiplier,
    sample_acf,
    sample_acvf,
    sample_cross_cov,
    sample_mean,
    snap_lag,
)
from app.services.mcarma import SamplePath, simulate
from app.services.streams import RandomStream


@pytest.fixture
def short_path() -> SamplePath:
    return SamplePath(0.5, [[1.0], [2.0], [3.0], [4.0]])


def test_snap_lag_floors_to_the_grid() -> None:
    assert snap_lag(0.015, 0.01) == pytest.approx(0.01)
    assert snap_lag(0.3, 0.1) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        snap_lag(1.0, 0.0)


def test_off_grid_lag_names_the_explicit_fix() -> None:
    with pytest.raises(OffGridLagError, match="snap_lag"):
        grid_multiplier(0.015, 0.01)
    with pytest.raises(OffGridLagError):
        grid_multiplier(-0.01, 0.01)
    # floating point noise on an exact multiple is accepted
    assert grid_multiplier(0.3, 0.1) == 3


def test_lag_set_sorts_and_deduplicates() -> None:
    lags = LagSet.from_lags([1.0, 0.0, 0.5, 1.0], 0.5)
    assert lags.multipliers == (0, 1, 2)
    assert lags.lags == (0.0, 0.5, 1.0)
    assert len(lags) == 3
    with pytest.raises(ValueError):
        LagSet.from_lags([], 0.5)
    with pytest.raises(ValueError):
        LagSet.from_multipliers([-1], 0.5)


def test_lag_beyond_the_sample_is_rejected(short_path) -> None:
    with pytest.raises(LagTooLargeError):
        sample_acvf(short_path, LagSet.from_lags([2.0], 0.5))
    # n - 1 steps is the largest admissible lag
    assert sample_acvf(short_path, LagSet.from_lags([1.5], 0.5)).gamma(1.5)[0, 0] == pytest.approx(-0.5625)


def test_mean_adjusted_autocovariance(short_path) -> None:
    estimate = sample_acvf(short_path, LagSet.from_lags([0.0, 0.5], 0.5))
    assert estimate.gamma(0.0)[0, 0] == pytest.approx(1.25)
    assert estimate.gamma(0.5)[0, 0] == pytest.approx(0.3125)
    assert estimate.mean_adjusted and estimate.n == 4


def test_raw_autocovariance_keeps_the_divisor(short_path) -> None:
    estimate = sample_acvf(short_path, LagSet.from_lags([0.0, 0.5], 0.5), mean_adjusted=False)
    assert estimate.gamma(0.0)[0, 0] == pytest.approx(7.5)
    assert estimate.gamma(0.5)[0, 0] == pytest.approx(5.0)


def test_sample_autocorrelation(short_path) -> None:
    values = sample_acf(short_path, LagSet.from_lags([0.5], 0.5))
    assert list(values) == [0.5]
    assert values[0.5] == pytest.approx(0.25)


def test_autocorrelation_is_scalar_only() -> None:
    path = SamplePath(1.0, np.arange(10.0).reshape(5, 2))
    with pytest.raises(DimensionError):
        sample_acf(path, LagSet.from_lags([1.0], 1.0))


def test_constant_path_has_no_autocorrelation() -> None:
    path = SamplePath(1.0, np.ones((6, 1)))
    with pytest.raises(ToolkitError):
        sample_acf(path, LagSet.from_lags([1.0], 1.0))


def test_grid_step_must_match_the_path(short_path) -> None:
    with pytest.raises(OffGridLagError):
        sample_acvf(short_path, LagSet.from_lags([0.0], 0.25))


def test_rows_are_lexicographic() -> None:
    path = SamplePath(1.0, [[1.0, 0.0], [0.0, 2.0], [3.0, 1.0]])
    estimate = sample_acvf(path, LagSet.from_lags([1.0, 0.0], 1.0))
    rows = list(estimate.rows())
    assert [(lag, i, j) for lag, i, j, _ in rows] == [
        (0.0, 1, 1), (0.0, 1, 2), (0.0, 2, 1), (0.0, 2, 2),
        (1.0, 1, 1), (1.0, 1, 2), (1.0, 2, 1), (1.0, 2, 2),
    ]
    gamma0 = estimate.gamma(0.0)
    assert np.allclose(gamma0, gamma0.T)


def test_cross_covariance_picks_one_entry() -> None:
    rng = np.random.default_rng(1)
    path = SamplePath(0.1, rng.standard_normal((50, 2)))
    lags = LagSet.from_lags([0.0, 0.2], 0.1)
    estimate = sample_acvf(path, lags)
    cross = sample_cross_cov(path, 1, 2, lags)
    assert cross[0.2] == pytest.approx(estimate.gamma(0.2)[0, 1])
    assert sample_cross_cov(path, 2, 1, lags)[0.2] == pytest.approx(estimate.gamma(0.2)[1, 0])
    with pytest.raises(DimensionError):
        sample_cross_cov(path, 0, 1, lags)


def test_sample_mean_is_compensated() -> None:
    data = np.array([[1e16], [1.0], [-1e16], [1.0]])
    assert sample_mean(SamplePath(1.0, data))[0] == pytest.approx(0.5)


def _double_loop_acvf(data: np.ndarray, k: int, mean_adjusted: bool) -> np.ndarray:
    n, d = data.shape
    mean = data.mean(axis=0) if mean_adjusted else np.zeros(d)
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            total = 0.0
            for t in range(n - k):
                total += (data[t, i] - mean[i]) * (data[t + k, j] - mean[j])
            out[i, j] = total / n
    return out


@pytest.mark.parametrize("n, d", [(2, 1), (17, 1), (60, 2), (100, 3)])
@pytest.mark.parametrize("mean_adjusted", [True, False])
def test_matches_a_literal_double_loop(n, d, mean_adjusted) -> None:
    rng = np.random.default_rng(n * 10 + d)
    path = SamplePath(0.25, rng.normal(1.0, 2.0, size=(n, d)))
    lags = LagSet.from_multipliers(range(0, n, max(1, n // 7)), 0.25)
    estimate = sample_acvf(path, lags, mean_adjusted=mean_adjusted)
    for k, lag in lags:
        assert np.allclose(estimate.gamma(lag), _double_loop_acvf(path.observations, k, mean_adjusted), rtol=0, atol=1e-12)


@pytest.mark.slow
def test_error_shrinks_as_the_horizon_grows(ou_model) -> None:
    # γ(0) = 1/2 and the limit variance of √(nΔ)(γ̂(0) - γ(0)) is 1/2
    delta = 0.05
    lags = LagSet.from_lags([0.0], delta)
    medians = []
    for horizon in (250, 1000, 4000):
        n = int(horizon / delta)
        errors = [
            abs(sample_acvf(simulate(ou_model, n, delta, RandomStream(31, r)), lags).gamma(0.0)[0, 0] - 0.5)
            for r in range(60)
        ]
        median = float(np.median(errors))
        assert median <= 2.0 * np.sqrt(0.5 / horizon)
        medians.append(median)
    assert medians[0] > medians[1] > medians[2]


@pytest.mark.slow
def test_mean_adjustment_is_negligible_at_the_root_horizon_scale(ou_model) -> None:
    delta = 0.1
    lags = LagSet.from_lags([0.5], delta)
    medians = []
    for n in (1_000, 10_000, 100_000):
        gaps = []
        for r in range(60):
            path = simulate(ou_model, n, delta, RandomStream(41, r))
            adjusted = sample_acvf(path, lags).gamma(0.5)[0, 0]
            raw = sample_acvf(path, lags, mean_adjusted=False).gamma(0.5)[0, 0]
            gaps.append(np.sqrt(n * delta) * abs(adjusted - raw))
        medians.append(float(np.median(gaps)))
    assert medians[0] > medians[1] > medians[2]
