import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from fiberkey.channel import FiberSpec
from fiberkey.detection import (
    DetectionRates,
    DetectorArray,
    analytic_success_probability,
    decode_argmax,
    decode_threshold,
    expected_rates,
    monte_carlo_success_probability,
    sample_frame,
    threshold_statistics,
)
from fiberkey.errors import InvalidParameterError


def _poisson_success_oracle(lambda1, lambda2, n_symbols, k_max=200):
    """Independent brute-force: correct count k beats S-1 wrong detectors."""
    total = 0.0
    for k in range(k_max):
        pmf = stats.poisson.pmf(k, lambda1) if lambda1 > 0 else float(k == 0)
        cdf_below = stats.poisson.cdf(k - 1, lambda2) if k >= 1 else 0.0
        total += pmf * cdf_below ** (n_symbols - 1)
    return total


class TestDetectorArray:
    def test_dark_rate_reproduces_click_probability(self):
        det = DetectorArray(n_symbols=4, dark_prob=7.2e-8)
        assert math.isclose(1.0 - math.exp(-det.dark_rate), 7.2e-8, rel_tol=1e-9)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_symbols=0),
            dict(n_symbols=1, efficiency=1.5),
            dict(n_symbols=1, dark_prob=1.0),
            dict(n_symbols=1, capture_correct=-0.1),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(InvalidParameterError):
            DetectorArray(**kwargs)


class TestExpectedRates:
    def test_matches_measured_focus_rate(self):
        fiber = FiberSpec(n_modes=1500, length_km=0.0)
        det = DetectorArray(n_symbols=36, efficiency=1.0)
        rates = expected_rates(0.1, 3.0, fiber, det)
        assert math.isclose(rates.lambda_correct, 0.1 * 3.0, rel_tol=1e-12)

    def test_background_modes_reproduce_measured_wrong_rate(self):
        # lambda2 = 0.005 mu^2 at alpha2=0.1, N=1500 needs g = 0.005*1499/0.9
        g = 0.005 * 1499 / 0.9
        fiber = FiberSpec(n_modes=1500, length_km=0.0)
        det = DetectorArray(n_symbols=36, efficiency=1.0, background_modes=g)
        rates = expected_rates(0.1, 1.0, fiber, det)
        assert math.isclose(rates.lambda_wrong, 0.005, rel_tol=1e-12)
        assert abs(g - 8.33) < 0.01

    def test_zero_pulse_gives_zero_rates(self):
        fiber = FiberSpec(n_modes=1500)
        det = DetectorArray(n_symbols=36)
        rates = expected_rates(0.5, 0.0, fiber, det)
        assert rates.lambda_correct == 0.0
        assert rates.lambda_wrong == 0.0

    def test_attenuation_applies(self):
        fiber = FiberSpec(n_modes=1500, attenuation_db_per_km=0.2, length_km=50.0)
        det = DetectorArray(n_symbols=36, efficiency=0.65)
        rates = expected_rates(0.7, 1.0, fiber, det)
        assert math.isclose(rates.lambda_correct, 0.7 * 0.65 * 0.1, rel_tol=1e-12)

    def test_single_mode_fiber_rejected(self):
        with pytest.raises(InvalidParameterError):
            expected_rates(0.5, 1.0, FiberSpec(n_modes=1), DetectorArray(n_symbols=2))


class TestSampleFrame:
    def test_zero_rates_zero_darks_give_empty_frames(self):
        det = DetectorArray(n_symbols=5, dark_prob=0.0)
        frame = sample_frame(DetectionRates(0.0, 0.0), det, np.random.default_rng(0))
        assert np.all(frame == 0)

    def test_sample_means_match_rates(self):
        det = DetectorArray(n_symbols=36, dark_prob=0.0)
        rates = DetectionRates(2.0, 0.1)
        rng = np.random.default_rng(1)
        n = 100_000
        totals = np.zeros(36)
        for _ in range(10):
            means = np.full(36, rates.lambda_wrong)
            means[0] = rates.lambda_correct
            totals += rng.poisson(means, size=(n // 10, 36)).sum(axis=0)
        means = totals / n
        assert abs(means[0] - 2.0) < 3.0 * math.sqrt(2.0 / n)
        wrong = means[1:]
        assert np.all(np.abs(wrong - 0.1) < 3.0 * math.sqrt(0.1 / n) + 1e-12)

    def test_dark_click_rate(self):
        p_dark = 7.2e-8
        det = DetectorArray(n_symbols=2, dark_prob=p_dark)
        rng = np.random.default_rng(2)
        gates = 10_000_000
        counts = rng.poisson(det.dark_rate, size=(gates, 2))
        clicks = int(np.sum(counts >= 1))
        expected = 2 * gates * p_dark
        assert abs(clicks - expected) <= 3.0 * math.sqrt(expected) + 3.0


class TestDecoders:
    def test_argmax_simple(self):
        assert decode_argmax(np.array([3, 0, 0, 0])) == 0

    def test_argmax_tie_is_ambiguous(self):
        assert decode_argmax(np.array([2, 2, 0])) is None

    def test_argmax_all_zero_is_ambiguous(self):
        assert decode_argmax(np.zeros(4, dtype=int)) is None

    def test_threshold_accepts_unique_super_threshold(self):
        assert decode_threshold(np.array([3, 1, 0]), 2) == 0

    def test_threshold_rejects_below(self):
        assert decode_threshold(np.array([1, 1, 0]), 2) is None

    def test_threshold_rejects_non_unique(self):
        assert decode_threshold(np.array([2, 2, 0]), 2) is None

    def test_threshold_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            decode_threshold(np.array([1, 0]), 0)

    @settings(max_examples=200, deadline=None)
    @given(
        frame=st.lists(st.integers(min_value=0, max_value=6), min_size=2, max_size=8),
        threshold=st.integers(min_value=1, max_value=5),
    )
    def test_threshold_never_accepts_what_argmax_rejects(self, frame, threshold):
        frame = np.asarray(frame)
        if decode_threshold(frame, threshold) is not None:
            assert decode_argmax(frame) is not None


class TestAnalyticSuccessProbability:
    def test_against_brute_force_oracle(self):
        for lam1, lam2, s in [(2.0, 0.1, 36), (0.5, 0.05, 36), (4.0, 0.2, 8), (0.0, 0.3, 4)]:
            oracle = _poisson_success_oracle(lam1, lam2, s)
            assert math.isclose(
                analytic_success_probability(lam1, lam2, s), oracle, abs_tol=1e-9
            )

    def test_reference_point_value(self):
        # lambda1 = 0.1 mu^2, lambda2 = 0.005 mu^2 at mu^2 = 20
        assert math.isclose(
            analytic_success_probability(2.0, 0.1, 36), 0.5602071844381351, rel_tol=1e-9
        )

    def test_single_symbol_always_succeeds(self):
        assert analytic_success_probability(3.7, 9.1, 1) == 1.0
        assert analytic_success_probability(0.0, 0.0, 1) == 1.0

    def test_monte_carlo_agreement(self):
        p = analytic_success_probability(2.0, 0.1, 36)
        est, se = monte_carlo_success_probability(
            2.0, 0.1, 36, np.random.default_rng(3), 1_000_000
        )
        assert abs(est - p) < 3.0 * se

    def test_saturates_to_one_at_strong_signal(self):
        grid = [5.0, 10.0, 20.0, 50.0]
        values = [
            analytic_success_probability(lam, 0.005 * lam / 0.1, 36) for lam in grid
        ]
        assert all(b >= a for a, b in zip(values, values[1:]))
        assert values[-1] > 0.999

    def test_monotone_in_rates_and_symbols(self):
        lams = [0.1, 0.5, 1.0, 2.0, 5.0]
        for s in (2, 36):
            up = [analytic_success_probability(l, 0.05, s) for l in lams]
            assert all(b >= a for a, b in zip(up, up[1:]))
            down = [analytic_success_probability(1.0, l, s) for l in lams]
            assert all(b <= a for a, b in zip(down, down[1:]))
        more_symbols = [analytic_success_probability(1.0, 0.05, s) for s in (2, 8, 36)]
        assert all(b <= a for a, b in zip(more_symbols, more_symbols[1:]))


class TestThresholdStatistics:
    def test_threshold_one_matches_single_click_analytics(self):
        # threshold 1 accepts exactly the frames where a single detector
        # clicked at all; both rates follow in closed form
        lam1, lam2, s = 1.5, 0.08, 12
        p_correct_alone = (1.0 - math.exp(-lam1)) * math.exp(-(s - 1) * lam2)
        p_wrong_alone = (
            (1.0 - math.exp(-lam2)) * math.exp(-lam1) * math.exp(-(s - 2) * lam2)
        )
        p_accept = p_correct_alone + (s - 1) * p_wrong_alone
        stats_ = threshold_statistics(lam1, lam2, s, 1, np.random.default_rng(4), 400_000)
        assert abs(stats_.accept_rate - p_accept) < 3.0 * stats_.accept_stderr
        conditional = p_correct_alone / p_accept
        assert abs(stats_.success_given_accept - conditional) < 3.0 * max(
            stats_.success_stderr, 1e-6
        )

    def test_no_light_never_accepts(self):
        stats_ = threshold_statistics(0.0, 0.0, 8, 2, np.random.default_rng(5), 10_000)
        assert stats_.accept_rate == 0.0
        assert stats_.n_accepted == 0

    def test_thresholding_filters_errors(self):
        rng = np.random.default_rng(6)
        for mu2 in (2.0, 10.0, 30.0):
            lam1, lam2 = 0.1 * mu2, 0.005 * mu2
            baseline = analytic_success_probability(lam1, lam2, 36)
            for threshold in (2, 3):
                stats_ = threshold_statistics(lam1, lam2, 36, threshold, rng, 200_000)
                if stats_.n_accepted > 100:
                    assert stats_.success_given_accept >= baseline

    def test_accept_rate_rises_with_pulse_energy(self):
        rng = np.random.default_rng(7)
        accept = []
        for mu2 in (2.0, 10.0, 30.0, 60.0):
            stats_ = threshold_statistics(0.1 * mu2, 0.005 * mu2, 36, 3, rng, 200_000)
            accept.append(stats_.accept_rate)
        assert all(b > a for a, b in zip(accept, accept[1:]))
