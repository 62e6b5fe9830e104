"""End-to-end key-establishment sessions.

A session runs three phases over one seeded random stream: (1) secure
calibration, whose randomized probe order and summed-frame contrast check
either yield reconstructed focusing rows or an abort; (2) communication,
where Alice launches uniformly random symbols as focusing masks, an
optional interceptor measures and resends, and Bob decodes photon-count
frames, reporting undecodable positions for discarding; (3) error
estimation on a random sample of the kept key, compared against the
predicted error rate of the undisturbed link plus a slack.  Error
correction and privacy amplification are out of scope: key material passes
through a no-op boundary with the measured error rate attached.

The transcript records every classical-channel message in order, with
opaque random probe tokens so the log itself leaks no schedule information,
and is byte-identical across runs with the same configuration and seed.
"""
import json
from dataclasses import dataclass

import numpy as np

from . import calibration as cal
from . import detection as det
from .adversary import InterceptModel, eve_phase_fidelity, resend_field
from .channel import FiberSpec, MatrixModel, TransmissionMatrix, draw_transmission_matrix
from .errors import InsufficientKeyError, InvalidParameterError, UndefinedFidelityError
from .security import qer_secure

KEPT = "kept"
DISCARDED = "discarded"
SAMPLED = "sampled"

DECODE_ARGMAX = "argmax"
DECODE_THRESHOLD = "threshold"

PHASE_CALIBRATION = "calibration"
PHASE_COMMUNICATION = "communication"


# --- classical-channel messages -------------------------------------------

@dataclass(frozen=True)
class CalibIntensityReport:
    probe_id: str
    counts: tuple
    kind = "calib_intensity_report"


@dataclass(frozen=True)
class CalibComplete:
    kind = "calib_complete"


@dataclass(frozen=True)
class DiscardList:
    indices: tuple
    kind = "discard_list"


@dataclass(frozen=True)
class SampleRequest:
    indices: tuple
    kind = "sample_request"


@dataclass(frozen=True)
class SampleReveal:
    symbols: tuple
    kind = "sample_reveal"


@dataclass(frozen=True)
class ErrorEstimate:
    qer: float
    kind = "error_estimate"


@dataclass(frozen=True)
class Abort:
    reason: str
    kind = "abort"


_MESSAGE_TYPES = {
    cls.kind: cls
    for cls in (
        CalibIntensityReport,
        CalibComplete,
        DiscardList,
        SampleRequest,
        SampleReveal,
        ErrorEstimate,
        Abort,
    )
}


def message_to_wire(msg) -> dict:
    wire = {"type": msg.kind}
    for name in getattr(msg, "__dataclass_fields__", {}):
        value = getattr(msg, name)
        if isinstance(value, tuple):
            value = list(value)
        wire[name] = value
    return wire


def message_from_wire(wire: dict):
    kind = wire.get("type")
    cls = _MESSAGE_TYPES.get(kind)
    if cls is None:
        raise InvalidParameterError(f"unknown message type {kind!r}")
    kwargs = {}
    for name in cls.__dataclass_fields__:
        value = wire[name]
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


# --- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class EveConfig:
    model: InterceptModel
    active_in: frozenset = frozenset({PHASE_COMMUNICATION})

    def __post_init__(self):
        phases = frozenset(self.active_in)
        unknown = phases - {PHASE_CALIBRATION, PHASE_COMMUNICATION}
        if unknown:
            raise InvalidParameterError(f"unknown attack phases: {sorted(unknown)}")
        object.__setattr__(self, "active_in", phases)


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to reproduce a session, including the master seed.

    Symbols are always drawn uniformly: a non-uniform source would let an
    interceptor accumulate statistics per symbol, so there is deliberately
    no knob for it.
    """

    fiber: FiberSpec
    calibration: cal.CalibrationConfig
    detector: det.DetectorArray
    mu2: float
    n_symbols_to_send: int
    seed: int
    matrix_model: MatrixModel = MatrixModel.HAAR_UNITARY
    mask_mode: str = cal.FULL_FIELD
    decode: str = DECODE_ARGMAX
    threshold: int = 2
    sample_fraction: float = 0.25
    qer_slack: float = 0.05
    calibration_photon_noise: bool = True
    contrast_threshold: float = 0.5
    eve: EveConfig | None = None

    def __post_init__(self):
        if self.mu2 < 0:
            raise InvalidParameterError("mu2 must be >= 0")
        if self.n_symbols_to_send < 1:
            raise InvalidParameterError("n_symbols_to_send must be >= 1")
        if not 0.0 < self.sample_fraction <= 0.5:
            raise InvalidParameterError("sample_fraction must be in (0, 0.5]")
        if self.qer_slack < 0:
            raise InvalidParameterError("qer_slack must be >= 0")
        if self.decode not in (DECODE_ARGMAX, DECODE_THRESHOLD):
            raise InvalidParameterError(f"unknown decode strategy {self.decode!r}")
        if self.decode == DECODE_THRESHOLD and self.threshold < 1:
            raise InvalidParameterError("threshold must be >= 1")
        if self.mask_mode not in (cal.PHASE_ONLY, cal.FULL_FIELD):
            raise InvalidParameterError(f"unknown mask mode {self.mask_mode!r}")
        if self.detector.n_symbols != self.calibration.n_detectors:
            raise InvalidParameterError(
                "detector.n_symbols must match calibration.n_detectors"
            )
        if self.fiber.n_modes < self.detector.n_symbols:
            raise InvalidParameterError("need at least as many modes as symbols")
        model = MatrixModel(self.matrix_model)
        object.__setattr__(self, "matrix_model", model)
        if model is MatrixModel.HAAR_UNITARY and self.fiber.n_modes != self.calibration.n_segments:
            raise InvalidParameterError(
                "haar_unitary channel needs n_modes == n_segments"
            )

    def eve_active_in(self, phase: str) -> bool:
        return self.eve is not None and phase in self.eve.active_in


# --- phase results ----------------------------------------------------------

@dataclass
class CalibrationPhase:
    tm: TransmissionMatrix
    record: cal.CalibrationRecord
    result: cal.CalibrationResult
    detector_modes: np.ndarray
    contrast: float
    eve_detected: bool
    messages: list


@dataclass
class CommunicationPhase:
    alice_symbols: np.ndarray
    bob_symbols: np.ndarray  # -1 where undecodable
    eve_observations: int
    messages: list


@dataclass
class ErrorEstimateResult:
    qer: float
    sampled_indices: np.ndarray


@dataclass
class SessionTranscript:
    """Ordered message log plus both parties' key material and bookkeeping."""

    seed: int
    messages: list
    alice_symbols: np.ndarray
    bob_symbols: np.ndarray
    position_status: list
    alice_key: np.ndarray
    bob_key: np.ndarray
    estimated_qer: float | None
    predicted_qer: float | None
    eve_detected_in_calibration: bool
    eve_observations: int
    calibration_contrast: float | None
    aborted: bool
    abort_reason: str | None


# --- phases -----------------------------------------------------------------

def _probe_token(rng: np.random.Generator) -> str:
    return rng.bytes(8).hex()


def _measured_fidelity(tm, result, symbol, mask_mode, target_mode) -> float:
    """Fidelity of the synthesized mask on the true channel; 0 for dead rows."""
    try:
        mask = cal.synthesize_focus_mask(result, symbol, mask_mode)
        return cal.shaping_fidelity(tm, mask, target_mode)
    except UndefinedFidelityError:
        return 0.0


def run_calibration_phase(config: SessionConfig, rng: np.random.Generator) -> CalibrationPhase:
    """Draw the channel, probe it in random order, reconstruct and verify.

    When an interceptor is active during calibration, every repetition
    reaching Bob is an independent speckle; summing the reported frames
    then yields low-contrast images and the tamper check fires.  Fidelities
    in the returned result are measured against the actual channel with the
    session's mask mode.
    """
    ccfg = config.calibration
    tm = draw_transmission_matrix(
        config.fiber.n_modes, ccfg.n_segments, config.matrix_model, rng
    )
    detector_modes = np.arange(config.detector.n_symbols)
    schedule = cal.generate_schedule(ccfg, rng)
    record = cal.probe_intensities(
        tm,
        ccfg,
        schedule,
        rng,
        photon_noise=config.calibration_photon_noise,
        detector_modes=detector_modes,
        collect_frames=True,
        eve_resend=config.eve_active_in(PHASE_CALIBRATION),
    )
    messages = [
        CalibIntensityReport(
            probe_id=_probe_token(rng),
            counts=tuple(float(c) for c in row),
        )
        for row in record.counts
    ]
    verdict = cal.detect_calibration_eavesdropper(
        record.summed_frames,
        config.contrast_threshold,
        poisson_counts=record.photon_noise,
    )
    result = cal.reconstruct_rows(record, ccfg)
    if verdict.attacked:
        messages.append(Abort(reason="calibration tamper check failed"))
    else:
        measured = np.array(
            [
                _measured_fidelity(tm, result, s, config.mask_mode, int(detector_modes[s]))
                for s in range(config.detector.n_symbols)
            ]
        )
        result = cal.CalibrationResult(
            estimated_rows=result.estimated_rows, fidelity_per_symbol=measured
        )
        messages.append(CalibComplete())
    return CalibrationPhase(
        tm=tm,
        record=record,
        result=result,
        detector_modes=detector_modes,
        contrast=verdict.contrast,
        eve_detected=verdict.attacked,
        messages=messages,
    )


def _decode_frames(counts: np.ndarray, config: SessionConfig) -> np.ndarray:
    """Vectorized decoding of count frames; -1 marks undecodable positions."""
    if config.decode == DECODE_THRESHOLD:
        over = counts >= config.threshold
        n_over = over.sum(axis=1)
        decoded = np.where(n_over == 1, np.argmax(over, axis=1), -1)
        return decoded.astype(np.int64)
    top = counts.max(axis=1)
    unique = np.sum(counts == top[:, None], axis=1) == 1
    ok = unique & (top > 0)
    return np.where(ok, np.argmax(counts, axis=1), -1).astype(np.int64)


def run_communication_phase(
    config: SessionConfig, calib: CalibrationPhase, rng: np.random.Generator
) -> CommunicationPhase:
    """Send uniformly random symbols and decode Bob's photon-count frames.

    Per symbol, Alice launches the calibrated focusing mask with mu^2 mean
    photons; the fiber span attenuates, the detectors apply efficiency and
    dark counts.  A full interceptor measures every pulse (counted in
    ``eve_observations``) and resends the true field mixed with independent
    speckle at its measurement fidelity beta^2.  A partial tap only
    diverts ``tap_fraction`` of the energy.
    """
    n_sym = config.detector.n_symbols
    span = config.fiber.transmittance

    fields = np.zeros((n_sym, config.fiber.n_modes), dtype=complex)
    for s in range(n_sym):
        mask = cal.synthesize_focus_mask(calib.result, s, config.mask_mode)
        try:
            fields[s] = calib.tm.entries @ mask.to_field(config.mu2)
        except UndefinedFidelityError:
            pass  # dead row: Alice launches nothing for this symbol

    alice_symbols = rng.integers(0, n_sym, size=config.n_symbols_to_send)
    eve_active = config.eve_active_in(PHASE_COMMUNICATION)
    eve_observations = 0

    if not eve_active:
        means = config.detector.efficiency * span * np.abs(
            fields[:, calib.detector_modes]
        ) ** 2
        means[np.arange(n_sym), np.arange(n_sym)] *= config.detector.capture_correct
        counts = rng.poisson(means[alice_symbols] + config.detector.dark_rate)
    else:
        tap = config.eve.model.tap_fraction
        counts = np.empty((config.n_symbols_to_send, n_sym), dtype=np.int64)
        if tap >= 1.0:
            beta2 = eve_phase_fidelity(config.mu2, config.fiber.n_modes)
            for i, s in enumerate(alice_symbols):
                bob_field = resend_field(fields[s], beta2, rng)
                eve_observations += 1
                at_det = np.abs(bob_field[calib.detector_modes]) ** 2
                at_det[s] *= config.detector.capture_correct
                counts[i] = rng.poisson(
                    config.detector.efficiency * span * at_det
                    + config.detector.dark_rate
                )
        else:
            passed = (1.0 - tap) * span
            means = config.detector.efficiency * passed * np.abs(
                fields[:, calib.detector_modes]
            ) ** 2
            means[np.arange(n_sym), np.arange(n_sym)] *= config.detector.capture_correct
            counts = rng.poisson(means[alice_symbols] + config.detector.dark_rate)
            eve_observations = config.n_symbols_to_send

    bob_symbols = _decode_frames(counts, config)
    discard = tuple(int(i) for i in np.flatnonzero(bob_symbols < 0))
    messages = [DiscardList(indices=discard)]
    return CommunicationPhase(
        alice_symbols=alice_symbols,
        bob_symbols=bob_symbols,
        eve_observations=eve_observations,
        messages=messages,
    )


def estimate_error_rate(
    alice_key: np.ndarray,
    bob_key: np.ndarray,
    sample_fraction: float,
    rng: np.random.Generator,
) -> ErrorEstimateResult:
    """Reveal a random sample of the kept key and measure the disagreement.

    Sampled positions are consumed: they must not reappear in the final
    key.  The returned indices refer to the kept-key positions, sorted
    increasing.
    """
    alice_key = np.asarray(alice_key)
    bob_key = np.asarray(bob_key)
    if alice_key.shape != bob_key.shape:
        raise InvalidParameterError("keys must be aligned to equal length")
    n = alice_key.shape[0]
    if n == 0:
        raise InsufficientKeyError("no kept key positions to sample")
    if not 0.0 < sample_fraction <= 0.5:
        raise InvalidParameterError("sample_fraction must be in (0, 0.5]")
    k = max(1, int(round(sample_fraction * n)))
    indices = np.sort(rng.choice(n, size=k, replace=False))
    qer = float(np.mean(alice_key[indices] != bob_key[indices]))
    return ErrorEstimateResult(qer=qer, sampled_indices=indices)


def run_session(config: SessionConfig) -> SessionTranscript:
    """Compose calibration, communication and estimation into one transcript.

    The measured sample error rate is accepted when it does not exceed the
    undisturbed-link prediction by more than ``qer_slack``; otherwise the
    session aborts and no key material is released.
    """
    seq = np.random.SeedSequence(config.seed)
    calib_rng, comm_rng, sample_rng = (np.random.default_rng(s) for s in seq.spawn(3))

    calib = run_calibration_phase(config, calib_rng)
    messages = list(calib.messages)
    n = config.n_symbols_to_send
    if calib.eve_detected:
        return SessionTranscript(
            seed=config.seed,
            messages=messages,
            alice_symbols=np.empty(0, dtype=np.int64),
            bob_symbols=np.empty(0, dtype=np.int64),
            position_status=[],
            alice_key=np.empty(0, dtype=np.int64),
            bob_key=np.empty(0, dtype=np.int64),
            estimated_qer=None,
            predicted_qer=None,
            eve_detected_in_calibration=True,
            eve_observations=0,
            calibration_contrast=calib.contrast,
            aborted=True,
            abort_reason="calibration tamper check failed",
        )

    comm = run_communication_phase(config, calib, comm_rng)
    messages.extend(comm.messages)
    status = [KEPT] * n
    kept_positions = []
    for i in range(n):
        if comm.bob_symbols[i] < 0:
            status[i] = DISCARDED
        else:
            kept_positions.append(i)
    kept_positions = np.asarray(kept_positions, dtype=np.int64)

    alpha2_measured = float(np.mean(calib.result.fidelity_per_symbol))
    predicted = qer_secure(
        alpha2_measured,
        config.mu2,
        config.fiber.n_modes,
        config.detector.n_symbols,
        config.detector.efficiency,
        config.detector.dark_prob,
        config.fiber.attenuation_db_per_km,
        config.fiber.length_km,
    )

    alice_kept = comm.alice_symbols[kept_positions]
    bob_kept = comm.bob_symbols[kept_positions]
    estimate = estimate_error_rate(alice_kept, bob_kept, config.sample_fraction, sample_rng)
    for j in estimate.sampled_indices:
        status[int(kept_positions[j])] = SAMPLED
    keep_mask = np.ones(kept_positions.shape[0], dtype=bool)
    keep_mask[estimate.sampled_indices] = False

    messages.append(
        SampleRequest(indices=tuple(int(kept_positions[j]) for j in estimate.sampled_indices))
    )
    messages.append(
        SampleReveal(symbols=tuple(int(s) for s in bob_kept[estimate.sampled_indices]))
    )
    messages.append(ErrorEstimate(qer=estimate.qer))

    aborted = estimate.qer > predicted + config.qer_slack
    if aborted:
        messages.append(Abort(reason="sampled error rate exceeds prediction"))
        alice_key = np.empty(0, dtype=np.int64)
        bob_key = np.empty(0, dtype=np.int64)
    else:
        alice_key = alice_kept[keep_mask]
        bob_key = bob_kept[keep_mask]

    return SessionTranscript(
        seed=config.seed,
        messages=messages,
        alice_symbols=comm.alice_symbols,
        bob_symbols=comm.bob_symbols,
        position_status=status,
        alice_key=alice_key,
        bob_key=bob_key,
        estimated_qer=estimate.qer,
        predicted_qer=predicted,
        eve_detected_in_calibration=False,
        eve_observations=comm.eve_observations,
        calibration_contrast=calib.contrast,
        aborted=aborted,
        abort_reason="sampled error rate exceeds prediction" if aborted else None,
    )


# --- transcript serialization ----------------------------------------------

def save_transcript(transcript: SessionTranscript, path) -> None:
    """Write the transcript as a line-delimited log, one tagged message per line."""
    with open(path, "w") as fh:
        header = {
            "type": "session_header",
            "seed": transcript.seed,
            "n_messages": len(transcript.messages),
        }
        fh.write(json.dumps(header) + "\n")
        for msg in transcript.messages:
            fh.write(json.dumps(message_to_wire(msg)) + "\n")
        summary = {
            "type": "session_summary",
            "alice_symbols": [int(s) for s in transcript.alice_symbols],
            "bob_symbols": [int(s) for s in transcript.bob_symbols],
            "position_status": transcript.position_status,
            "alice_key": [int(s) for s in transcript.alice_key],
            "bob_key": [int(s) for s in transcript.bob_key],
            "estimated_qer": transcript.estimated_qer,
            "predicted_qer": transcript.predicted_qer,
            "eve_detected_in_calibration": transcript.eve_detected_in_calibration,
            "eve_observations": transcript.eve_observations,
            "calibration_contrast": transcript.calibration_contrast,
            "aborted": transcript.aborted,
            "abort_reason": transcript.abort_reason,
        }
        fh.write(json.dumps(summary) + "\n")


def load_transcript(path) -> SessionTranscript:
    """Read a transcript log back; inverse of :func:`save_transcript`."""
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("type") != "session_header":
        raise InvalidParameterError(f"not a session transcript: {path}")
    if lines[-1].get("type") != "session_summary":
        raise InvalidParameterError("transcript is truncated: missing summary")
    header, summary = lines[0], lines[-1]
    messages = [message_from_wire(wire) for wire in lines[1:-1]]
    if len(messages) != header.get("n_messages"):
        raise InvalidParameterError("transcript is truncated: message count mismatch")
    return SessionTranscript(
        seed=header["seed"],
        messages=messages,
        alice_symbols=np.asarray(summary["alice_symbols"], dtype=np.int64),
        bob_symbols=np.asarray(summary["bob_symbols"], dtype=np.int64),
        position_status=list(summary["position_status"]),
        alice_key=np.asarray(summary["alice_key"], dtype=np.int64),
        bob_key=np.asarray(summary["bob_key"], dtype=np.int64),
        estimated_qer=summary["estimated_qer"],
        predicted_qer=summary["predicted_qer"],
        eve_detected_in_calibration=summary["eve_detected_in_calibration"],
        eve_observations=summary["eve_observations"],
        calibration_contrast=summary["calibration_contrast"],
        aborted=summary["aborted"],
        abort_reason=summary["abort_reason"],
    )
