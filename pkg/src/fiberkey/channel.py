"""Multimode-fiber channel model.

The fiber is a random linear scrambler: a complex transmission matrix maps
input segment fields to output mode fields.  Two matrix ensembles are
supported: i.i.d. circular complex Gaussian entries with E[|t|^2] = 1/n_out
(lossless on ensemble average, per-entry intensities exponential), and Haar
unitary (exactly energy conserving).  Geometry helpers compute the guided
mode count from the normalized frequency and the dispersion-limited fiber
length from the usable spectral bandwidth.
"""
import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError

SPEED_OF_LIGHT_M_PER_S = 299792458.0


class MatrixModel(str, enum.Enum):
    GAUSSIAN_IID = "gaussian_iid"
    HAAR_UNITARY = "haar_unitary"


def mode_count(core_diameter_m: float, na: float, wavelength_m: float) -> int:
    """Number of guided modes of a step-index fiber, round(V^2 / 2).

    V = pi * d_core * NA / wavelength is the normalized frequency.  The
    result is clamped to at least 1; a warning flags the degenerate regime
    where the formula rounds to zero.
    """
    if core_diameter_m <= 0 or na <= 0 or wavelength_m <= 0:
        raise InvalidParameterError("core diameter, NA and wavelength must be > 0")
    if na >= 1:
        raise InvalidParameterError(f"numerical aperture must be < 1, got {na}")
    v = math.pi * core_diameter_m * na / wavelength_m
    n = round(v * v / 2.0)
    if n < 1:
        warnings.warn(
            f"degenerate fiber geometry (V={v:.3g}): clamping mode count to 1",
            stacklevel=2,
        )
        return 1
    return int(n)


def normalized_frequency(core_diameter_m: float, na: float, wavelength_m: float) -> float:
    """V = pi * d_core * NA / wavelength."""
    if core_diameter_m <= 0 or na <= 0 or wavelength_m <= 0:
        raise InvalidParameterError("core diameter, NA and wavelength must be > 0")
    return math.pi * core_diameter_m * na / wavelength_m


@dataclass(frozen=True)
class FiberSpec:
    """Geometry and loss parameters of the transmission fiber.

    ``n_modes`` may be given explicitly (e.g. the desk-scale defaults) or
    left as None to derive it from the geometry via :func:`mode_count`.
    """

    core_diameter_m: float = 50e-6
    na: float = 0.22
    n_core: float = 1.45
    wavelength_m: float = 633e-9
    attenuation_db_per_km: float = 0.2
    length_km: float = 0.0
    n_modes: int | None = None

    def __post_init__(self):
        if not (0 < self.na < self.n_core):
            raise InvalidParameterError(
                f"require 0 < NA < n_core, got NA={self.na}, n_core={self.n_core}"
            )
        if self.core_diameter_m <= 0 or self.wavelength_m <= 0:
            raise InvalidParameterError("core diameter and wavelength must be > 0")
        if self.attenuation_db_per_km < 0 or self.length_km < 0:
            raise InvalidParameterError("attenuation and length must be >= 0")
        if self.n_modes is None:
            object.__setattr__(
                self,
                "n_modes",
                mode_count(self.core_diameter_m, self.na, self.wavelength_m),
            )
        elif self.n_modes < 1:
            raise InvalidParameterError("n_modes must be >= 1")

    @property
    def transmittance(self) -> float:
        return attenuation_factor(self.attenuation_db_per_km, self.length_km)


@dataclass(frozen=True)
class TransmissionMatrix:
    """Complex linear map from input segments to output modes."""

    entries: np.ndarray = field(repr=False)
    model: MatrixModel = MatrixModel.GAUSSIAN_IID

    @property
    def n_out(self) -> int:
        return self.entries.shape[0]

    @property
    def n_in(self) -> int:
        return self.entries.shape[1]


def draw_transmission_matrix(
    n_out: int,
    n_in: int,
    model: MatrixModel | str,
    rng: np.random.Generator,
    normalize_columns: bool = False,
) -> TransmissionMatrix:
    """Draw a random transmission matrix from the requested ensemble.

    gaussian_iid entries are circular complex Gaussian with
    E[|t|^2] = 1/n_out, so n_out * |t|^2 is Exp(1) distributed.  With
    ``normalize_columns`` each column is rescaled to unit total intensity
    (exact energy conservation per launched symbol).  haar_unitary requires
    a square shape and uses the QR construction with phase-fixed diagonal.
    """
    model = MatrixModel(model)
    if n_out < 1 or n_in < 1:
        raise InvalidParameterError("matrix dimensions must be >= 1")
    if model is MatrixModel.HAAR_UNITARY:
        if n_out != n_in:
            raise DimensionMismatchError(
                f"haar_unitary requires a square matrix, got {n_out}x{n_in}"
            )
        z = (rng.standard_normal((n_out, n_in)) + 1j * rng.standard_normal((n_out, n_in)))
        q, r = np.linalg.qr(z)
        diag = np.diagonal(r)
        q = q * (diag / np.abs(diag))
        return TransmissionMatrix(entries=q, model=model)
    scale = 1.0 / math.sqrt(2.0 * n_out)
    entries = scale * (
        rng.standard_normal((n_out, n_in)) + 1j * rng.standard_normal((n_out, n_in))
    )
    if normalize_columns:
        entries = entries / np.linalg.norm(entries, axis=0, keepdims=True)
    return TransmissionMatrix(entries=entries, model=model)


def propagate(tm: TransmissionMatrix, field_in: np.ndarray) -> np.ndarray:
    """Output mode field T @ field_in.

    The squared norm of a field is its mean photon number, so Haar-unitary
    propagation conserves the photon budget exactly.
    """
    field_in = np.asarray(field_in)
    if field_in.shape[0] != tm.n_in:
        raise DimensionMismatchError(
            f"field length {field_in.shape[0]} != matrix n_in {tm.n_in}"
        )
    return tm.entries @ field_in


def attenuation_factor(attenuation_db_per_km: float, length_km: float) -> float:
    """Power transmittance 10^(-a L / 10) of a fiber span."""
    if attenuation_db_per_km < 0 or length_km < 0:
        raise InvalidParameterError("attenuation and length must be >= 0")
    return 10.0 ** (-attenuation_db_per_km * length_km / 10.0)


def max_fiber_length_km(bandwidth_hz: float, na: float, n_core: float) -> float:
    """Modal-dispersion-limited fiber length for a given spectral bandwidth.

    L = c / (n_core * df * (1/cos(NA/n_core) - 1)), returned in km.  The
    mapping from a target bit rate to the bandwidth df is left to the
    caller (the symbol rate of the phase modulator is the natural choice).
    """
    if bandwidth_hz <= 0 or na <= 0 or n_core <= 0:
        raise InvalidParameterError("bandwidth, NA and n_core must be > 0")
    if na >= n_core:
        raise InvalidParameterError("require NA < n_core")
    spread = 1.0 / math.cos(na / n_core) - 1.0
    return SPEED_OF_LIGHT_M_PER_S / (n_core * bandwidth_hz * spread) / 1000.0
