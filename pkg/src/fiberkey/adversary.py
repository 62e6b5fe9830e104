"""Eavesdropper measurement models and attack primitives.

Two interception front-ends are modeled: a single-photon intensity
measurement (one click per symbol, pixel drawn from the mode intensities)
and a shot-noise-limited field measurement that sees every mode amplitude
plus one photon of complex Gaussian noise.  The field-measurement accuracy
limits the fidelity of anything Eve can resend to beta^2 = mu^2/(mu^2+2N),
so an intercept-resend attack degrades the focusing fidelity from alpha^2
to alpha^2 beta^2.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

EVE_PHASE_FIDELITY_DOC = "beta^2 = mu^2 / (mu^2 + 2N)"


class InterceptKind(str, enum.Enum):
    INTENSITY_SINGLE_PHOTON = "intensity_single_photon"
    HOMODYNE_FIELD = "homodyne_field"


@dataclass(frozen=True)
class InterceptModel:
    kind: InterceptKind = InterceptKind.HOMODYNE_FIELD
    tap_fraction: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.tap_fraction <= 1.0:
            raise InvalidParameterError("tap_fraction must be in (0, 1]")
        object.__setattr__(self, "kind", InterceptKind(self.kind))


def eve_phase_fidelity(mu2: float, n_modes: int) -> float:
    """Best possible field-measurement fidelity, beta^2 = mu^2/(mu^2 + 2N)."""
    if mu2 < 0:
        raise InvalidParameterError("mu2 must be >= 0")
    if n_modes < 1:
        raise InvalidParameterError("n_modes must be >= 1")
    return mu2 / (mu2 + 2.0 * n_modes)


def intercept_intensity(
    tm_to_eve, symbol_field: np.ndarray, rng: np.random.Generator
) -> int:
    """Pixel index of a single-photon click on Eve's camera.

    Eve has one pixel per mode; propagating the symbol field to her tap
    point, a single photon collapses onto pixel e with probability
    |E_e|^2 / sum |E|^2.
    """
    field_at_eve = tm_to_eve.entries @ np.asarray(symbol_field)
    weights = np.abs(field_at_eve) ** 2
    total = float(weights.sum())
    if total <= 0.0:
        raise InvalidParameterError("zero field at interceptor: invalid channel column")
    return int(rng.choice(weights.shape[0], p=weights / total))


def intercept_homodyne(field_at_eve: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Field measurement with one photon of shot noise per mode.

    Adds i.i.d. circular complex Gaussian noise with unit variance per mode
    (0.5 per quadrature); a unitary change of mode basis leaves the noise
    statistics unchanged.
    """
    field_at_eve = np.asarray(field_at_eve, dtype=complex)
    n = field_at_eve.shape[0]
    noise = math.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return field_at_eve + noise


def intercept_resend_effect(alpha2: float, mu2: float, n_modes: int) -> float:
    """Effective focusing fidelity after a full intercept-resend: alpha^2 beta^2."""
    if not 0.0 <= alpha2 <= 1.0:
        raise InvalidParameterError("alpha2 must be in [0, 1]")
    return alpha2 * eve_phase_fidelity(mu2, n_modes)


def resend_field(
    true_field: np.ndarray, beta2: float, rng: np.random.Generator
) -> np.ndarray:
    """Field Eve sends on after measuring: the true field mixed with speckle.

    The resent field has weight beta on the true symbol field and
    sqrt(1 - beta^2) on an independent fully developed speckle of the same
    total power, so its overlap with Bob's target carries the factor
    beta^2 while the total energy is preserved on average.
    """
    if not 0.0 <= beta2 <= 1.0:
        raise InvalidParameterError("beta2 must be in [0, 1]")
    true_field = np.asarray(true_field, dtype=complex)
    n = true_field.shape[0]
    power = float(np.sum(np.abs(true_field) ** 2))
    speckle = math.sqrt(power / (2.0 * n)) * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n)
    )
    return math.sqrt(beta2) * true_field + math.sqrt(1.0 - beta2) * speckle


@dataclass(frozen=True)
class PnsBudgetCheck:
    secure: bool
    margin: float


def pns_budget_check(mu2_sent: float, secure_mu2: float) -> PnsBudgetCheck:
    """Photon-number-splitting guard: the pulse must stay below the budget.

    Security requires strict inequality; the boundary itself is not secure.
    """
    if mu2_sent < 0 or secure_mu2 < 0:
        raise InvalidParameterError("photon numbers must be >= 0")
    return PnsBudgetCheck(secure=mu2_sent < secure_mu2, margin=secure_mu2 - mu2_sent)
