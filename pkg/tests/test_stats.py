import math

import numpy as np
import pytest
from scipy.special import ndtr

from knocksim.rng import RandomStream
from knocksim.stats import (
    Ecdf,
    autocorrelation,
    ecdf,
    fitting_error,
    group_error_summary,
    ks_statistic,
    rel_freq_histogram,
    white_noise_band,
)


class TestAutocorrelation:
    def test_alternating_series(self):
        assert autocorrelation([1.0, -1.0, 1.0, -1.0], 1) == pytest.approx(-0.75, abs=1e-15)

    def test_lag_zero_is_one(self):
        assert autocorrelation([0.3, 1.2, -0.4, 2.0], 0) == 1.0

    def test_matches_brute_force(self):
        x = RandomStream(1, 0).normal(200)
        mean = sum(x) / len(x)
        for k in (1, 2, 7):
            num = sum((x[i] - mean) * (x[i + k] - mean) for i in range(len(x) - k))
            den = sum((v - mean) ** 2 for v in x)
            assert autocorrelation(x, k) == pytest.approx(num / den, rel=1e-12)

    def test_white_noise_small_lag_one(self):
        x = RandomStream(2, 0).normal(10_000)
        assert abs(autocorrelation(x, 1)) < 0.04

    def test_bounded_by_one(self):
        x = RandomStream(3, 0).uniform(50)
        for k in range(50):
            assert abs(autocorrelation(x, k)) <= 1.0 + 1e-12

    def test_constant_series_error(self):
        with pytest.raises(ValueError, match="zero variance"):
            autocorrelation([2.0, 2.0, 2.0], 1)

    @pytest.mark.parametrize("k", [-1, 4, 10])
    def test_bad_lag_error(self, k):
        with pytest.raises(ValueError):
            autocorrelation([1.0, 2.0, 3.0, 4.0], k)


class TestWhiteNoiseBand:
    def test_n300(self):
        assert white_noise_band(300, 0.95) == pytest.approx(0.11316, abs=5e-5)

    def test_n10000(self):
        assert white_noise_band(10_000, 0.95) == pytest.approx(0.0196, abs=1e-4)

    def test_three_sigma(self):
        assert white_noise_band(100, 0.9973) == pytest.approx(0.3, abs=0.001)

    def test_returns_builtin_float(self):
        assert type(white_noise_band(300)) is float

    @pytest.mark.parametrize("level", [0.0, 1.0, -0.5, 1.5])
    def test_level_range(self, level):
        with pytest.raises(ValueError):
            white_noise_band(100, level)

    def test_n_too_small(self):
        with pytest.raises(ValueError):
            white_noise_band(1, 0.95)


class TestEcdf:
    def test_single_step(self):
        F = ecdf([0.0])
        assert F(0.0) == 1.0
        assert F(-0.1) == 0.0

    def test_counting(self):
        F = ecdf([1.0, 2.0, 3.0])
        assert F(2.0) == pytest.approx(2.0 / 3.0)
        assert F(0.5) == 0.0
        assert F(3.0) == 1.0

    def test_right_continuous(self):
        F = ecdf([1.0, 1.0, 2.0])
        assert F(1.0) == pytest.approx(2.0 / 3.0)
        assert F(np.nextafter(1.0, 0.0)) == 0.0

    def test_vectorized_eval(self):
        F = ecdf([1.0, 2.0])
        np.testing.assert_allclose(F(np.array([0.0, 1.0, 1.5, 2.5])), [0.0, 0.5, 0.5, 1.0])

    def test_normal_median(self):
        F = ecdf(RandomStream(4, 0).normal(100_000))
        assert F(0.0) == pytest.approx(0.5, abs=0.01)

    def test_unsorted_input_sorted(self):
        F = ecdf([3.0, 1.0, 2.0])
        np.testing.assert_array_equal(F.sorted_points, [1.0, 2.0, 3.0])

    def test_empty_error(self):
        with pytest.raises(ValueError):
            ecdf([])


class TestRelFreqHistogram:
    def test_boundary_convention(self):
        h = rel_freq_histogram([0.5], 2, (0.0, 1.0))
        np.testing.assert_array_equal(h.rel_freq, [0.0, 1.0])
        np.testing.assert_allclose(h.bin_edges, [0.0, 0.5, 1.0])

    def test_all_at_lo(self):
        h = rel_freq_histogram([0.0, 0.0, 0.0], 4, (0.0, 1.0))
        np.testing.assert_array_equal(h.rel_freq, [1.0, 0.0, 0.0, 0.0])

    def test_outside_range_clipped_to_edge_bins(self):
        h = rel_freq_histogram([-5.0, 0.2, 7.0, 9.0], 2, (0.0, 1.0))
        np.testing.assert_allclose(h.rel_freq, [0.5, 0.5])

    def test_uniform_fill(self):
        u = RandomStream(5, 0).uniform(10_000)
        h = rel_freq_histogram(u, 10, (0.0, 1.0))
        assert np.all(np.abs(h.rel_freq - 0.1) < 0.02)

    def test_sums_to_one(self):
        x = RandomStream(6, 0).normal(777)
        h = rel_freq_histogram(x, 13, (-2.0, 2.0))
        assert abs(h.rel_freq.sum() - 1.0) < 1e-12

    def test_bad_args(self):
        with pytest.raises(ValueError):
            rel_freq_histogram([], 2, (0.0, 1.0))
        with pytest.raises(ValueError):
            rel_freq_histogram([0.5], 0, (0.0, 1.0))
        with pytest.raises(ValueError):
            rel_freq_histogram([0.5], 2, (1.0, 1.0))


class TestFittingError:
    def test_identity(self):
        assert fitting_error([0.1, 0.9], [0.1, 0.9]) == 0.0

    def test_hand_value(self):
        e = fitting_error([0.2, 0.5, 0.9], [0.1, 0.5, 0.7])
        assert e == pytest.approx(math.sqrt(0.05), rel=1e-12)

    def test_no_normalization_by_length(self):
        # same pointwise gaps, doubled length -> error scales by sqrt(2)
        e1 = fitting_error([0.0, 0.0], [0.1, 0.1])
        e2 = fitting_error([0.0] * 4, [0.1] * 4)
        assert e2 == pytest.approx(e1 * math.sqrt(2.0), rel=1e-12)

    def test_brute_force_ecdf_vs_cdf(self):
        x = np.sort(RandomStream(7, 0).normal(300))
        o = ecdf(x)(x)
        o_hat = ndtr(x)
        want = math.sqrt(sum((a - b) ** 2 for a, b in zip(o.tolist(), o_hat.tolist())))
        assert fitting_error(o, o_hat) == pytest.approx(want, rel=1e-12)

    def test_metric_properties(self):
        r = RandomStream(8, 0)
        for _ in range(20):
            a, b, c = r.normal(6), r.normal(6), r.normal(6)
            dab, dba = fitting_error(a, b), fitting_error(b, a)
            assert dab == dba
            assert dab >= 0.0
            assert fitting_error(a, c) <= dab + fitting_error(b, c) + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            fitting_error([0.1], [0.1, 0.2])


class TestKsStatistic:
    def test_identical_two_sample(self):
        x = RandomStream(9, 0).normal(100)
        assert ks_statistic(x, ecdf(x)) == 0.0

    def test_single_point_vs_normal_cdf(self):
        assert ks_statistic([0.0], lambda x: ndtr(np.asarray(x))) == pytest.approx(0.5, abs=1e-12)

    def test_matches_brute_force_two_sample(self):
        a = RandomStream(10, 0).normal(40)
        b = RandomStream(10, 1).normal(60) + 0.2
        Fa, Fb = ecdf(a), ecdf(b)
        grid = np.concatenate([a, b])
        want = max(abs(Fa(x) - Fb(x)) for x in grid)
        assert ks_statistic(a, Fb) == pytest.approx(want, rel=1e-12)

    def test_one_sample_checks_both_gaps(self):
        # all mass below the reference median: gap at x- dominates
        d = ks_statistic([10.0, 11.0], lambda x: ndtr(np.asarray(x)))
        assert d == pytest.approx(ndtr(10.0), abs=1e-12)

    def test_same_mixture_draws_small(self):
        a = RandomStream(11, 0).normal(10_000)
        b = RandomStream(11, 1).normal(10_000)
        assert ks_statistic(a, ecdf(b)) < 1.63 * math.sqrt(2.0 / 10_000)

    def test_in_unit_interval(self):
        a = RandomStream(12, 0).uniform(30)
        b = RandomStream(12, 1).normal(30)
        d = ks_statistic(a, ecdf(b))
        assert 0.0 <= d <= 1.0

    def test_increasing_transform_invariance(self):
        a = RandomStream(13, 0).normal(50)
        b = RandomStream(13, 1).normal(70)
        d0 = ks_statistic(a, ecdf(b))
        d1 = ks_statistic(np.exp(a), ecdf(np.exp(b)))
        assert d1 == pytest.approx(d0, abs=1e-15)

    def test_empty_error(self):
        with pytest.raises(ValueError):
            ks_statistic([], ecdf([1.0]))


class TestGroupErrorSummary:
    def test_degenerate(self):
        s = group_error_summary([0.4, 0.4, 0.4])
        assert s.mean == pytest.approx(0.4, abs=1e-15)
        assert s.lo == 0.4 and s.hi == 0.4
        assert s.n_groups == 3

    def test_percentile_rule(self):
        s = group_error_summary(np.arange(1.0, 101.0), level=0.98)
        assert s.lo == pytest.approx(1.99, abs=1e-10)
        assert s.hi == pytest.approx(99.01, abs=1e-10)
        assert s.mean == pytest.approx(50.5)

    def test_order_invariance(self):
        x = RandomStream(14, 0).normal(41)
        a = group_error_summary(x)
        b = group_error_summary(x[::-1].copy())
        assert a.mean == pytest.approx(b.mean, abs=1e-14)
        assert (a.lo, a.hi) == (b.lo, b.hi)

    def test_bounds_bracket_mean(self):
        x = np.abs(RandomStream(15, 0).normal(500))
        s = group_error_summary(x)
        assert s.lo <= s.mean <= s.hi
        # seeded noise: group mean lands near the true mean of |N(0,1)|
        assert s.mean == pytest.approx(math.sqrt(2.0 / math.pi), abs=0.1)

    def test_too_few_groups(self):
        with pytest.raises(ValueError):
            group_error_summary([0.4])


class TestEcdfType:
    def test_constructor_sorts(self):
        F = Ecdf(np.array([2.0, 1.0]))
        np.testing.assert_array_equal(F.sorted_points, [1.0, 2.0])
        assert F.n == 2
