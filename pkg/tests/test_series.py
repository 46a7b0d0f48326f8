"""Series ingestion, normalization, and synthetic generators."""

import numpy as np
import pytest

from driftrl.numkit import Rng
from driftrl.series import (
    SYNTH_KINDS,
    Series,
    affine_scale_transform,
    context_stats,
    load_series_csv,
    normalize,
    synth_series,
)


class TestLoad:
    def test_plain_values(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("1\n2\n3\n")
        assert load_series_csv(str(p)).values.tolist() == [1.0, 2.0, 3.0]

    def test_empty_file(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty series"):
            load_series_csv(str(p))

    def test_header_skip(self, tmp_path):
        p = tmp_path / "h.csv"
        p.write_text("value\n1.5\n2.5\n")
        assert load_series_csv(str(p), skip_header=True).values.tolist() == [1.5, 2.5]

    def test_named_column(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("date,value\na,3\nb,4\n")
        assert load_series_csv(str(p), column="value").values.tolist() == [3.0, 4.0]

    def test_comments_ignored(self, tmp_path):
        p = tmp_path / "k.csv"
        p.write_text("# comment\n7\n# another\n8\n")
        assert load_series_csv(str(p)).values.tolist() == [7.0, 8.0]

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_series_csv("/nonexistent/series.csv")

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("1\nfoo\n")
        with pytest.raises(ValueError):
            load_series_csv(str(p))


class TestNormalize:
    def test_documented_example(self):
        out, _ = normalize(Series(np.array([0.0, 5.0, 10.0])), 3)
        np.testing.assert_allclose(out.values, [-0.5, 0.0, 0.5])

    def test_constant_context_rejected(self):
        with pytest.raises(ValueError, match="constant context"):
            normalize(Series(np.array([2.0, 2.0, 2.0, 5.0])), 3)

    def test_order_preserved(self):
        vals = Rng(0).gaussian_vec(100)
        out, _ = normalize(Series(vals), 50)
        assert np.all(np.argsort(out.values) == np.argsort(vals))

    def test_stats_from_context_prefix_only(self):
        vals = np.concatenate([np.arange(10.0), [1000.0, -1000.0]])
        s1 = context_stats(Series(vals), 10)
        mutated = vals.copy()
        mutated[10:] = [5e6, -5e6]
        s2 = context_stats(Series(mutated), 10)
        assert (s1.mean, s1.lo, s1.hi) == (s2.mean, s2.lo, s2.hi)

    def test_round_trip(self):
        vals = Rng(3).gaussian_vec(200) * 7 + 2
        out, stats = normalize(Series(vals), 64)
        np.testing.assert_allclose(stats.invert(out.values), vals, atol=1e-12)


class TestAffineScale:
    def test_mean_maps_to_one(self):
        vals = np.array([1.0, 2.0, 3.0])
        out = affine_scale_transform(Series(vals), 0.5, 3)
        assert out.values[1] == pytest.approx(1.0, abs=1e-12)

    def test_beta_zero_constant_one(self):
        out = affine_scale_transform(Series(np.array([1.0, 5.0, 9.0])), 0.0, 3)
        np.testing.assert_allclose(out.values, 1.0)

    def test_strictly_positive(self):
        vals = Rng(1).gaussian_vec(100) * 10
        out = affine_scale_transform(Series(vals), 0.5, 50)
        assert np.all(out.values > 0.0)

    def test_matches_formula(self):
        vals = np.array([0.0, 4.0, 8.0, 2.0])
        beta = 0.5
        out = affine_scale_transform(Series(vals), beta, 4)
        mean, lo, hi = vals[:4].mean(), 0.0, 8.0
        expected = 1 - beta + beta * np.exp((vals - mean) / (2 * (hi - lo)))
        np.testing.assert_allclose(out.values, expected, rtol=1e-12)


class TestSynth:
    def test_all_kinds_exist(self):
        for kind in SYNTH_KINDS:
            s = synth_series(kind, 100, Rng(0))
            assert len(s.values) == 100
            assert np.all(np.isfinite(s.values))

    def test_seasonal_zero_noise_periodic(self):
        s = synth_series("seasonal", 60, Rng(1), period=12, noise=0.0)
        np.testing.assert_allclose(s.values[:48], s.values[12:60], atol=1e-12)

    def test_random_walk_zero_step(self):
        s = synth_series("random-walk", 50, Rng(2), step_std=0.0)
        assert np.ptp(s.values) == 0.0

    def test_same_seed_identical(self):
        for kind in SYNTH_KINDS:
            a = synth_series(kind, 64, Rng(9))
            b = synth_series(kind, 64, Rng(9))
            np.testing.assert_array_equal(a.values, b.values)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            synth_series("fourier-chaos", 10, Rng(0))


def test_series_finiteness_enforced():
    with pytest.raises(ValueError):
        Series(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        Series(np.array([]))
