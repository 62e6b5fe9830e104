"""Information-theoretic security quantities of the key-establishment link.

Everything is reported in bits.  Bob's information per detected photon
follows from the two-valued click distribution of an imperfectly focused
channel; Eve's information is bounded three ways: a closed form for
single-photon intensity measurements ((1 - gamma)/ln 2, independent of the
mode count), a Monte Carlo estimate of the Gaussian-mixture entropy for
shot-noise-limited field measurements, and a max-entropy closed-form upper
bound on the same quantity.  Practical click probabilities fold in loss,
detector efficiency and dark counts and yield the secure and
post-interception qudit error rates; the secure photon budget is the
largest pulse energy for which Eve's information stays below Bob's.

Differential entropies use shot-noise units (one photon of noise variance
per mode), so only entropy differences are physical; all reported values
are such differences.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import log1p_mixture_ratio
from .adversary import eve_phase_fidelity
from .errors import InvalidParameterError, UndefinedProbabilityError

EULER_GAMMA = 0.5772156649015329
LN2 = math.log(2.0)

_MC_CHUNK = 250_000
_BUDGET_CAP = 2.0 ** 30


@dataclass(frozen=True)
class ClickDistribution:
    """P(click on b | s sent) for b == s and for each wrong detector."""

    p_correct: float
    p_wrong: float

    def __post_init__(self):
        if not (0.0 <= self.p_correct <= 1.0 and 0.0 <= self.p_wrong <= 1.0):
            raise InvalidParameterError("click probabilities must be in [0, 1]")


def click_distribution(alpha2: float, n_modes: int, n_symbols: int) -> ClickDistribution:
    """Conditional click distribution of a channel focused with fidelity alpha^2.

    The focused fraction alpha^2 lands on the correct detector; the rest
    spreads evenly over the N - 1 remaining modes, of which S - 1 carry
    wrong detectors.  Normalization p_correct + (S-1) p_wrong = 1 holds by
    construction.
    """
    if not 0.0 <= alpha2 <= 1.0:
        raise InvalidParameterError("alpha2 must be in [0, 1]")
    if n_modes < 2:
        raise InvalidParameterError("n_modes must be >= 2")
    if not 1 <= n_symbols <= n_modes:
        raise InvalidParameterError("need 1 <= n_symbols <= n_modes")
    if n_symbols == 1:
        # a single detector: any click is the correct one
        return ClickDistribution(p_correct=1.0, p_wrong=0.0)
    wrong_share = (1.0 - alpha2) / (n_modes - 1)
    denom = alpha2 + wrong_share * (n_symbols - 1)
    return ClickDistribution(p_correct=alpha2 / denom, p_wrong=wrong_share / denom)


def bob_entropy(alpha2: float, n_modes: int, n_symbols: int) -> float:
    """Bob's information per detected photon, log2 S minus the click-noise entropy."""
    dist = click_distribution(alpha2, n_modes, n_symbols)
    h = math.log2(n_symbols)
    if dist.p_wrong > 0.0:
        h += (n_symbols - 1) * dist.p_wrong * math.log2(dist.p_wrong)
    if dist.p_correct > 0.0:
        h += dist.p_correct * math.log2(dist.p_correct)
    return max(0.0, h)


@dataclass(frozen=True)
class EntropyEstimate:
    """A (possibly Monte Carlo) entropy value in bits.

    ``raw`` keeps the unclamped estimate when a small negative value was
    clamped to zero; it equals ``value`` otherwise.
    """

    value: float
    stderr: float
    raw: float

    @classmethod
    def exact(cls, value: float) -> "EntropyEstimate":
        return cls(value=value, stderr=0.0, raw=value)


def single_photon_eve_entropy(
    n_modes: int,
    method: str = "closed_form",
    samples: int = 2000,
    rng: np.random.Generator | None = None,
) -> EntropyEstimate:
    """Eve's information per intercepted single photon.

    closed_form returns (1 - gamma)/ln 2 ~ 0.61 bit, the large-N ensemble
    average, independent of the mode count.  monte_carlo draws channels
    with i.i.d. exponential mode intensities, normalizes each realization,
    and averages log2 N - H(pixel | symbol); the unconditional pixel
    distribution is uniform on ensemble average, so the information gain is
    the conditional-entropy deficit.  The Monte Carlo path is the authority
    for small mode counts where the closed form's large-N assumption bites.
    """
    if n_modes < 2:
        raise InvalidParameterError("n_modes must be >= 2")
    if method == "closed_form":
        return EntropyEstimate.exact((1.0 - EULER_GAMMA) / LN2)
    if method != "monte_carlo":
        raise InvalidParameterError(f"unknown method {method!r}")
    if rng is None:
        raise InvalidParameterError("monte_carlo needs an explicit rng")
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    log_n = math.log2(n_modes)
    values = np.empty(samples)
    done = 0
    chunk = max(1, _MC_CHUNK // n_modes)
    while done < samples:
        m = min(chunk, samples - done)
        intensities = rng.exponential(1.0, size=(m, n_modes))
        probs = intensities / intensities.sum(axis=1, keepdims=True)
        h_cond = -np.sum(probs * np.log2(probs), axis=1)
        values[done : done + m] = log_n - h_cond
        done += m
    value = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return EntropyEstimate(value=value, stderr=stderr, raw=value)


def coherent_eve_entropy_bound(mu2: float, n_symbols: int) -> float:
    """Closed-form upper bound on Eve's field-measurement information.

    min[(S/2) log2(1 + 2 mu^2 (S-1)/S^2), log2 S]: the first term bounds
    the mixture entropy by a Gaussian of matched variance, the second by
    the information actually sent.
    """
    if mu2 < 0:
        raise InvalidParameterError("mu2 must be >= 0")
    if n_symbols < 2:
        raise InvalidParameterError("n_symbols must be >= 2")
    s = float(n_symbols)
    gauss = 0.5 * s * math.log2(1.0 + 2.0 * mu2 * (s - 1.0) / (s * s))
    return min(gauss, math.log2(s))


def coherent_eve_entropy_mc(
    mu2: float,
    n_symbols: int,
    samples: int,
    rng: np.random.Generator,
) -> EntropyEstimate:
    """Monte Carlo estimate of Eve's field-measurement information.

    Eve's symbol-basis measurement is mu e_s plus unit complex Gaussian
    noise per component; her information is the entropy of that S-component
    mixture minus the per-component Gaussian entropy.  Sampling E from the
    mixture and evaluating -log2 P(E) with log-sum-exp stabilization, the
    chi-square part of the exponent has known mean S and integrates out
    exactly, leaving per-sample values

        log2 S - log2(1 + sum_{s' != s} e^{-2 mu^2 - 2 mu (x_s - x_s')})

    with x the real noise quadratures at the symbol slots.  The estimator
    is unbiased with far smaller variance than the raw log-density average;
    estimates within one standard error below zero are clamped to 0 (the
    raw value is kept in ``raw``).
    """
    if mu2 < 0:
        raise InvalidParameterError("mu2 must be >= 0")
    if n_symbols < 2:
        raise InvalidParameterError("n_symbols must be >= 2")
    if samples < 2:
        raise InvalidParameterError("samples must be >= 2")
    mu = math.sqrt(mu2)
    log_s = math.log2(n_symbols)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(_MC_CHUNK, samples - done)
        sent = rng.integers(0, n_symbols, size=m)
        x = math.sqrt(0.5) * rng.standard_normal((m, n_symbols))
        ratios = log1p_mixture_ratio(x, sent, mu)
        vals = log_s - ratios / LN2
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    stderr = math.sqrt(var / samples)
    value = mean
    if value < 0.0 and -value <= stderr:
        value = 0.0
    return EntropyEstimate(value=value, stderr=stderr, raw=mean)


def practical_click_probability(
    alpha2: float,
    mu2: float,
    n_modes: int,
    n_symbols: int,
    efficiency: float,
    dark_prob: float,
    attenuation_db_per_km: float,
    length_km: float,
) -> float:
    """Probability that a detected symbol is the sent one, with loss and darks.

    P = (a^2 m + p_d) / (a^2 m + (1-a^2)(S-1)/(N-1) m + S p_d) with
    m = mu^2 d 10^(-aL/10): focused signal against spread background and
    dark counts on all S gates.
    """
    if not 0.0 <= alpha2 <= 1.0:
        raise InvalidParameterError("alpha2 must be in [0, 1]")
    if mu2 < 0 or efficiency < 0 or dark_prob < 0:
        raise InvalidParameterError("mu2, efficiency and dark_prob must be >= 0")
    if n_modes < 2:
        raise InvalidParameterError("n_modes must be >= 2")
    if n_symbols < 1:
        raise InvalidParameterError("n_symbols must be >= 1")
    if attenuation_db_per_km < 0 or length_km < 0:
        raise InvalidParameterError("attenuation and length must be >= 0")
    reach = mu2 * efficiency * 10.0 ** (-attenuation_db_per_km * length_km / 10.0)
    signal = alpha2 * reach
    background = (1.0 - alpha2) / (n_modes - 1) * (n_symbols - 1) * reach
    denom = signal + background + n_symbols * dark_prob
    if denom <= 0.0:
        raise UndefinedProbabilityError("no signal and no dark counts: P(b|s) undefined")
    return (signal + dark_prob) / denom


def qer_secure(
    alpha2: float,
    mu2: float,
    n_modes: int,
    n_symbols: int,
    efficiency: float,
    dark_prob: float,
    attenuation_db_per_km: float,
    length_km: float,
) -> float:
    """Qudit error rate of the undisturbed link, 1 - P(b | s = b)."""
    return 1.0 - practical_click_probability(
        alpha2,
        mu2,
        n_modes,
        n_symbols,
        efficiency,
        dark_prob,
        attenuation_db_per_km,
        length_km,
    )


def qer_interception(
    alpha2: float,
    mu2: float,
    n_modes: int,
    n_symbols: int,
    efficiency: float,
    dark_prob: float,
    attenuation_db_per_km: float,
    length_km: float,
    beta2: float,
) -> float:
    """Qudit error rate after a full intercept-resend: fidelity drops to beta^2 alpha^2."""
    if not 0.0 <= beta2 <= 1.0:
        raise InvalidParameterError("beta2 must be in [0, 1]")
    return 1.0 - practical_click_probability(
        beta2 * alpha2,
        mu2,
        n_modes,
        n_symbols,
        efficiency,
        dark_prob,
        attenuation_db_per_km,
        length_km,
    )


@dataclass(frozen=True)
class PhotonBudget:
    """Largest pulse energy keeping Eve's information below Bob's.

    ``saturated`` flags the regime where Bob's information reaches log2 S,
    which Eve's bounded information never crosses: the budget is then
    unbounded and ``mu2`` is infinite.
    """

    mu2: float
    ci_low: float
    ci_high: float
    method: str
    saturated: bool = False


def secure_photon_budget(
    alpha2: float,
    n_modes: int,
    n_symbols: int,
    method: str = "bound",
    rng: np.random.Generator | None = None,
    samples: int = 100_000,
    tol: float = 0.1,
) -> PhotonBudget:
    """Bisect for the largest mu^2 with H_E(mu^2) < H_B.

    Both H_E methods are monotone non-decreasing in mu^2, so bisection
    applies; the Monte Carlo evaluator reuses one fixed noise seed across
    evaluations (common random numbers), which preserves monotonicity
    empirically and makes the search deterministic.  The confidence
    interval reflects the Monte Carlo standard error through the local
    slope; for the closed-form bound it is just the bisection tolerance.
    """
    if method not in ("bound", "monte_carlo"):
        raise InvalidParameterError(f"unknown method {method!r}")
    h_bob = bob_entropy(alpha2, n_modes, n_symbols)
    if h_bob <= 0.0:
        return PhotonBudget(mu2=0.0, ci_low=0.0, ci_high=0.0, method=method)
    if h_bob >= math.log2(n_symbols) - 1e-12:
        return PhotonBudget(
            mu2=math.inf, ci_low=math.inf, ci_high=math.inf, method=method, saturated=True
        )

    if method == "bound":
        stderr_of = None

        def h_eve(mu2):
            return coherent_eve_entropy_bound(mu2, n_symbols)

    else:
        if rng is None:
            raise InvalidParameterError("monte_carlo needs an explicit rng")
        noise_seed = int(rng.integers(0, 2**63 - 1))
        cache = {}

        def _evaluate(mu2):
            if mu2 not in cache:
                cache[mu2] = coherent_eve_entropy_mc(
                    mu2, n_symbols, samples, np.random.default_rng(noise_seed)
                )
            return cache[mu2]

        def h_eve(mu2):
            return _evaluate(mu2).raw

        def stderr_of(mu2):
            return _evaluate(mu2).stderr

    lo, hi = 0.0, 1.0
    while h_eve(hi) < h_bob:
        lo = hi
        hi *= 2.0
        if hi > _BUDGET_CAP:
            return PhotonBudget(
                mu2=math.inf,
                ci_low=math.inf,
                ci_high=math.inf,
                method=method,
                saturated=True,
            )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h_eve(mid) < h_bob:
            lo = mid
        else:
            hi = mid
    mu2 = 0.5 * (lo + hi)

    if stderr_of is None:
        return PhotonBudget(mu2=mu2, ci_low=max(0.0, mu2 - tol), ci_high=mu2 + tol, method=method)
    # Propagate 3 standard errors through the local slope of H_E(mu2).
    step = max(tol, 0.05 * mu2)
    slope = (h_eve(mu2 + step) - h_eve(max(0.0, mu2 - step))) / (
        mu2 + step - max(0.0, mu2 - step)
    )
    half = tol + (3.0 * stderr_of(mu2) / slope if slope > 0 else 0.0)
    return PhotonBudget(
        mu2=mu2, ci_low=max(0.0, mu2 - half), ci_high=mu2 + half, method="monte_carlo"
    )


def throughput_estimate(symbol_rate_hz: float, h_bob: float) -> float:
    """Raw secure bit rate: symbol rate times bits per symbol."""
    if symbol_rate_hz < 0 or h_bob < 0:
        raise InvalidParameterError("symbol rate and entropy must be >= 0")
    return symbol_rate_hz * h_bob


@dataclass(frozen=True)
class SecurityReport:
    """All security figures of one link configuration, in fixed fields."""

    h_bob_bits: float
    h_eve_single_bits: float
    h_eve_coherent_bound_bits: float
    h_eve_coherent_mc_bits: float
    h_eve_coherent_mc_stderr_bits: float
    beta2: float
    qer_secure: float
    qer_interception: float
    secure_mu2: float
    secure_mu2_ci_low: float
    secure_mu2_ci_high: float
    secure_mu2_saturated: bool
    throughput_bits_per_s: float

    def __post_init__(self):
        entropies = (
            self.h_bob_bits,
            self.h_eve_single_bits,
            self.h_eve_coherent_bound_bits,
            self.h_eve_coherent_mc_bits,
        )
        if any(h < 0 for h in entropies):
            raise InvalidParameterError("entropies must be >= 0")
        if not (0.0 <= self.qer_secure <= 1.0 and 0.0 <= self.qer_interception <= 1.0):
            raise InvalidParameterError("QER values must be in [0, 1]")

    FIELDS = (
        "h_bob_bits",
        "h_eve_single_bits",
        "h_eve_coherent_bound_bits",
        "h_eve_coherent_mc_bits",
        "h_eve_coherent_mc_stderr_bits",
        "beta2",
        "qer_secure",
        "qer_interception",
        "secure_mu2",
        "secure_mu2_ci_low",
        "secure_mu2_ci_high",
        "secure_mu2_saturated",
        "throughput_bits_per_s",
    )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}

    def to_text(self) -> str:
        lines = []
        for name in self.FIELDS:
            value = getattr(self, name)
            lines.append(f"{name}: {value!r}")
        return "\n".join(lines) + "\n"


def security_report(
    alpha2: float,
    mu2: float,
    n_modes: int,
    n_symbols: int,
    efficiency: float,
    dark_prob: float,
    attenuation_db_per_km: float,
    length_km: float,
    rng: np.random.Generator,
    symbol_rate_hz: float = 97e3,
    mc_samples: int = 100_000,
    budget_method: str = "monte_carlo",
) -> SecurityReport:
    """Assemble the full security report for one parameter set."""
    h_bob = bob_entropy(alpha2, n_modes, n_symbols)
    beta2 = eve_phase_fidelity(mu2, n_modes)
    h_mc = (
        coherent_eve_entropy_mc(mu2, n_symbols, mc_samples, rng)
        if mu2 > 0
        else EntropyEstimate.exact(0.0)
    )
    budget = secure_photon_budget(
        alpha2, n_modes, n_symbols, method=budget_method, rng=rng, samples=mc_samples
    )
    common = (n_modes, n_symbols, efficiency, dark_prob, attenuation_db_per_km, length_km)
    return SecurityReport(
        h_bob_bits=h_bob,
        h_eve_single_bits=single_photon_eve_entropy(n_modes).value,
        h_eve_coherent_bound_bits=coherent_eve_entropy_bound(mu2, n_symbols),
        h_eve_coherent_mc_bits=h_mc.value,
        h_eve_coherent_mc_stderr_bits=h_mc.stderr,
        beta2=beta2,
        qer_secure=qer_secure(alpha2, mu2, *common),
        qer_interception=qer_interception(alpha2, mu2, *common, beta2),
        secure_mu2=budget.mu2,
        secure_mu2_ci_low=budget.ci_low,
        secure_mu2_ci_high=budget.ci_high,
        secure_mu2_saturated=budget.saturated,
        throughput_bits_per_s=throughput_estimate(symbol_rate_hz, h_bob),
    )
