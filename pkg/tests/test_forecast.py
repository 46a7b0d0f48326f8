"""Bootstrap forecaster tests: shapes, stream isolation, calibration."""

import numpy as np
import pytest

from driftrl.forecast import (
    FORECAST_METHODS,
    ForecastRequest,
    ForecastSamples,
    forecast,
    load_forecast_csv,
    point_mean,
    point_median,
    save_forecast_csv,
)
from driftrl.numkit import Rng


def periodic_context(period=8, cycles=8):
    one = np.sin(2 * np.pi * np.arange(period) / period)
    return np.tile(one, cycles)


class TestForecast:
    def test_shape_contract(self):
        req = ForecastRequest([periodic_context(), periodic_context() + 1], 5, 7)
        for method in FORECAST_METHODS:
            out = forecast(method, req, Rng(0))
            assert out.samples.shape == (2, 7, 5)
            assert np.all(np.isfinite(out.samples))

    def test_seasonal_naive_exact_on_pure_period(self):
        ctx = periodic_context(period=8, cycles=8)
        req = ForecastRequest([ctx], 8, 5)
        out = forecast("seasonal-naive-bootstrap", req, Rng(1))
        # Zero residual spread: every sample path repeats the last season.
        for j in range(5):
            np.testing.assert_allclose(out.samples[0, j], ctx[-8:], atol=1e-9)

    def test_path_stream_isolation(self):
        ctx = periodic_context() + 0.1 * Rng(2).gaussian_vec(64)
        small = forecast("seasonal-naive-bootstrap", ForecastRequest([ctx], 4, 1), Rng(3))
        big = forecast("seasonal-naive-bootstrap", ForecastRequest([ctx], 4, 100), Rng(3))
        np.testing.assert_array_equal(small.samples[0, 0], big.samples[0, 0])

    def test_ar_recovers_coefficient(self):
        ctx = 5.0 * 0.9 ** np.arange(32)  # x_{t+1} = 0.9 x_t, noiseless
        out = forecast("ar-bootstrap", ForecastRequest([ctx], 1, 200), Rng(4))
        point = out.samples[0, :, 0].mean()
        assert point == pytest.approx(0.9 * ctx[-1], abs=1e-6)

    def test_degenerate_context_constant(self):
        out = forecast("ar-bootstrap", ForecastRequest([np.full(32, 2.5)], 3, 10), Rng(5))
        np.testing.assert_allclose(out.samples[0], 2.5, atol=1e-6)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            forecast("prophet", ForecastRequest([periodic_context()], 2, 2), Rng(0))

    def test_context_too_short(self):
        with pytest.raises(ValueError):
            ForecastRequest([np.array([1.0])], 2, 2)

    def test_dim_independence(self):
        # Per-dim child streams are keyed by position, so dim d's output
        # depends only on its own context when streams are matched.
        a, b = periodic_context(), periodic_context(6) * 2
        fwd = forecast("ar-bootstrap", ForecastRequest([a, b], 3, 4), Rng(7))
        solo = forecast("ar-bootstrap", ForecastRequest([a], 3, 4), Rng(7))
        np.testing.assert_array_equal(fwd.samples[0], solo.samples[0])


class TestPointSummaries:
    def test_single_path(self):
        s = ForecastSamples(np.arange(6.0).reshape(1, 1, 6))
        np.testing.assert_array_equal(point_mean(s), point_median(s))

    def test_two_paths(self):
        s = ForecastSamples(np.stack([np.zeros(3), np.full(3, 2.0)])[None])
        np.testing.assert_allclose(point_mean(s)[0], 1.0)
        np.testing.assert_allclose(point_median(s)[0], 1.0)

    def test_clt_bound(self):
        mu, sigma, n = 3.0, 2.0, 10_000
        draws = mu + sigma * Rng(8).gaussian_vec(n)
        s = ForecastSamples(draws.reshape(1, n, 1))
        assert abs(point_mean(s)[0, 0] - mu) < 3 * sigma / 100

    def test_at_step(self):
        arr = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4)
        s = ForecastSamples(arr)
        step2 = s.at_step(2)
        assert step2.shape == (3, 2)
        np.testing.assert_array_equal(step2[:, 0], arr[0, :, 2])


def test_calibration_coverage():
    # 80% interval of the bootstrap samples should cover the truth in
    # [65%, 95%] of cells for a noisy sine.
    rng = Rng(11)
    hits = total = 0
    for trial in range(25):
        full = np.sin(2 * np.pi * np.arange(80) / 8) + 0.2 * rng.child(trial).gaussian_vec(80)
        ctx, future = full[:64], full[64:72]
        out = forecast("seasonal-naive-bootstrap",
                       ForecastRequest([ctx], 8, 200), rng.child(1000 + trial))
        lo = np.quantile(out.samples[0], 0.1, axis=0)
        hi = np.quantile(out.samples[0], 0.9, axis=0)
        hits += int(np.sum((future >= lo) & (future <= hi)))
        total += 8
    assert 0.65 <= hits / total <= 0.95


def test_csv_round_trip(tmp_path):
    samples = ForecastSamples(Rng(12).gaussian_vec(2 * 5 * 3).reshape(2, 5, 3))
    path = str(tmp_path / "fc.csv")
    save_forecast_csv(samples, path)
    loaded = load_forecast_csv(path, 2, 5, 3)
    np.testing.assert_allclose(loaded.samples, samples.samples, atol=1e-15)
