"""Bob's photon-counting detectors, decoding strategies and their statistics.

Counting is Poissonian: the correct detector sees lambda_1 mean photons per
gate, every wrong detector lambda_2, and dark counts add an extra rate of
-ln(1 - p_dark) so that the no-click probability at zero signal is exactly
1 - p_dark.  The analytic probability that the correct detector records a
strict maximum is

    p = e^{-lambda_1} sum_k [F(k - 1)]^(S-1) lambda_1^k / k!

with F the Poisson CDF at lambda_2 and F(-1) = 0; ties never count as a
success, matching the strict inequality inside the product.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import count_argmax_hits, count_threshold_outcomes
from .channel import FiberSpec, attenuation_factor
from .errors import InvalidParameterError

_MC_CHUNK = 200_000


@dataclass(frozen=True)
class DetectorArray:
    """Bob's S gated single-photon detectors.

    ``capture_correct`` is the fraction of focused power the correct
    detector area actually collects; ``background_modes`` is the effective
    number of speckle modes a detector integrates for background light.
    """

    n_symbols: int
    efficiency: float = 1.0
    dark_prob: float = 0.0
    capture_correct: float = 1.0
    background_modes: float = 1.0

    def __post_init__(self):
        if self.n_symbols < 1:
            raise InvalidParameterError("n_symbols must be >= 1")
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidParameterError("efficiency must be in [0, 1]")
        if not 0.0 <= self.dark_prob < 1.0:
            raise InvalidParameterError("dark_prob must be in [0, 1)")
        if self.capture_correct < 0 or self.background_modes < 0:
            raise InvalidParameterError("capture and background factors must be >= 0")

    @property
    def dark_rate(self) -> float:
        """Poisson rate reproducing the per-gate dark click probability."""
        return -math.log1p(-self.dark_prob)


@dataclass(frozen=True)
class DetectionRates:
    """Mean detected photons per gate at the correct / each wrong detector."""

    lambda_correct: float
    lambda_wrong: float

    def __post_init__(self):
        if not (
            math.isfinite(self.lambda_correct)
            and math.isfinite(self.lambda_wrong)
            and self.lambda_correct >= 0
            and self.lambda_wrong >= 0
        ):
            raise InvalidParameterError("rates must be finite and >= 0")


def expected_rates(
    alpha2: float, mu2: float, fiber: FiberSpec, detector: DetectorArray
) -> DetectionRates:
    """Detected-photon rates for a pulse of mean photon number mu2.

    lambda_1 = c1 * alpha^2 * mu^2 * d * 10^(-aL/10);
    lambda_2 spreads the unfocused fraction over the N-1 remaining modes
    and collects ``background_modes`` of them per detector.  Dark counts
    are added at sampling time, not here.
    """
    if not 0.0 <= alpha2 <= 1.0:
        raise InvalidParameterError("alpha2 must be in [0, 1]")
    if mu2 < 0:
        raise InvalidParameterError("mu2 must be >= 0")
    if fiber.n_modes < 2:
        raise InvalidParameterError("need at least 2 fiber modes")
    reach = mu2 * detector.efficiency * attenuation_factor(
        fiber.attenuation_db_per_km, fiber.length_km
    )
    lam1 = detector.capture_correct * alpha2 * reach
    lam2 = detector.background_modes * (1.0 - alpha2) / (fiber.n_modes - 1) * reach
    return DetectionRates(lambda_correct=lam1, lambda_wrong=lam2)


def sample_frame(
    rates: DetectionRates,
    detector: DetectorArray,
    rng: np.random.Generator,
    correct_index: int = 0,
) -> np.ndarray:
    """One photon-count frame: Poisson counts at all S detectors."""
    means = np.full(detector.n_symbols, rates.lambda_wrong + detector.dark_rate)
    means[correct_index] = rates.lambda_correct + detector.dark_rate
    return rng.poisson(means)


def decode_argmax(frame: np.ndarray) -> int | None:
    """Index of the strict maximum count; None when tied or all-zero."""
    frame = np.asarray(frame)
    best = int(np.argmax(frame))
    top = frame[best]
    if top <= 0 or int(np.sum(frame == top)) != 1:
        return None
    return best


def decode_threshold(frame: np.ndarray, threshold: int) -> int | None:
    """Accept only frames where exactly one detector reaches the threshold."""
    if threshold < 1:
        raise InvalidParameterError("threshold must be >= 1")
    frame = np.asarray(frame)
    over = np.flatnonzero(frame >= threshold)
    if over.shape[0] != 1:
        return None
    return int(over[0])


def _log_poisson_pmf(k: int, lam: float) -> float:
    return -lam + k * math.log(lam) - math.lgamma(k + 1)


def analytic_success_probability(lambda1: float, lambda2: float, n_symbols: int) -> float:
    """Probability that the correct detector holds the strict maximum count.

    The series over the correct-detector count k is truncated once the
    remaining Poisson tail of lambda_1 drops below 1e-12, far below any
    tolerance used downstream.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise InvalidParameterError("rates must be >= 0")
    if n_symbols < 1:
        raise InvalidParameterError("n_symbols must be >= 1")
    if n_symbols == 1:
        return 1.0
    total = 0.0
    tail = 1.0  # Poisson(lambda1) mass not yet consumed
    cdf2 = 0.0  # F(k - 1) for the wrong-detector count
    k = 0
    while tail > 1e-12:
        pmf1 = math.exp(_log_poisson_pmf(k, lambda1)) if lambda1 > 0 else float(k == 0)
        if k >= 1:
            if lambda2 > 0:
                cdf2 += math.exp(_log_poisson_pmf(k - 1, lambda2))
            else:
                cdf2 = 1.0
        total += (cdf2 ** (n_symbols - 1)) * pmf1
        tail -= pmf1
        k += 1
        if k > 100_000:
            break
    return min(1.0, max(0.0, total))


@dataclass(frozen=True)
class ThresholdStats:
    """Monte Carlo acceptance/success statistics for a threshold strategy."""

    accept_rate: float
    accept_stderr: float
    success_given_accept: float
    success_stderr: float
    n_trials: int
    n_accepted: int

    @property
    def rejection_rate(self) -> float:
        return 1.0 - self.accept_rate


def _sample_count_matrix(lambda1, lambda2, n_symbols, rng, n):
    means = np.full(n_symbols, lambda2)
    means[0] = lambda1
    return rng.poisson(means, size=(n, n_symbols))


def monte_carlo_success_probability(
    lambda1: float,
    lambda2: float,
    n_symbols: int,
    rng: np.random.Generator,
    n_trials: int,
) -> tuple[float, float]:
    """(estimate, stderr) of the strict-argmax success rate from sampled frames."""
    if n_trials < 1:
        raise InvalidParameterError("n_trials must be >= 1")
    hits = 0
    done = 0
    while done < n_trials:
        n = min(_MC_CHUNK, n_trials - done)
        counts = _sample_count_matrix(lambda1, lambda2, n_symbols, rng, n)
        hits += count_argmax_hits(counts, 0)
        done += n
    p = hits / n_trials
    return p, math.sqrt(max(p * (1.0 - p), 0.0) / n_trials)


def threshold_statistics(
    lambda1: float,
    lambda2: float,
    n_symbols: int,
    threshold: int,
    rng: np.random.Generator,
    n_trials: int,
) -> ThresholdStats:
    """Monte Carlo acceptance and conditional success for a threshold decoder.

    A frame is accepted when exactly one detector reaches the threshold;
    success additionally requires that detector to be the correct one.
    """
    if threshold < 1:
        raise InvalidParameterError("threshold must be >= 1")
    if n_trials < 1:
        raise InvalidParameterError("n_trials must be >= 1")
    accepted = 0
    hits = 0
    done = 0
    while done < n_trials:
        n = min(_MC_CHUNK, n_trials - done)
        counts = _sample_count_matrix(lambda1, lambda2, n_symbols, rng, n)
        acc, hit = count_threshold_outcomes(counts, threshold, 0)
        accepted += acc
        hits += hit
        done += n
    accept_rate = accepted / n_trials
    accept_se = math.sqrt(max(accept_rate * (1.0 - accept_rate), 0.0) / n_trials)
    if accepted > 0:
        success = hits / accepted
        success_se = math.sqrt(max(success * (1.0 - success), 0.0) / accepted)
    else:
        success = 0.0
        success_se = 0.0
    return ThresholdStats(
        accept_rate=accept_rate,
        accept_stderr=accept_se,
        success_given_accept=success,
        success_stderr=success_se,
        n_trials=n_trials,
        n_accepted=accepted,
    )
