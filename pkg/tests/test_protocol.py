import math

import numpy as np
import pytest

from fiberkey.adversary import InterceptKind, InterceptModel, intercept_intensity
from fiberkey.calibration import CalibrationConfig, PHASE_ONLY
from fiberkey.channel import FiberSpec, MatrixModel, draw_transmission_matrix
from fiberkey.detection import DetectorArray
from fiberkey.errors import InsufficientKeyError, InvalidParameterError
from fiberkey.protocol import (
    Abort,
    CalibComplete,
    CalibIntensityReport,
    DiscardList,
    ErrorEstimate,
    EveConfig,
    SampleRequest,
    SampleReveal,
    SessionConfig,
    estimate_error_rate,
    load_transcript,
    message_from_wire,
    message_to_wire,
    run_calibration_phase,
    run_communication_phase,
    run_session,
    save_transcript,
)


def ideal_config(seed=1, n_symbols_to_send=2000, mu2=5.0, n=36):
    return SessionConfig(
        fiber=FiberSpec(n_modes=n, length_km=0.0),
        calibration=CalibrationConfig(n_segments=n, n_detectors=n, repetitions=1),
        detector=DetectorArray(n_symbols=n, efficiency=1.0, dark_prob=0.0),
        mu2=mu2,
        n_symbols_to_send=n_symbols_to_send,
        seed=seed,
        calibration_photon_noise=False,
    )


def eve_comm_config(seed=2, n_symbols_to_send=20_000):
    return SessionConfig(
        fiber=FiberSpec(n_modes=512, length_km=0.0),
        calibration=CalibrationConfig(n_segments=512, n_detectors=36, repetitions=1),
        detector=DetectorArray(n_symbols=36, efficiency=0.65, dark_prob=0.0),
        mu2=1.0,
        n_symbols_to_send=n_symbols_to_send,
        seed=seed,
        calibration_photon_noise=False,
        eve=EveConfig(model=InterceptModel(kind=InterceptKind.HOMODYNE_FIELD)),
    )


def noisy_calib_config(seed, eve_in_calibration):
    eve = None
    if eve_in_calibration:
        eve = EveConfig(
            model=InterceptModel(kind=InterceptKind.HOMODYNE_FIELD),
            active_in=frozenset({"calibration"}),
        )
    return SessionConfig(
        fiber=FiberSpec(n_modes=1500, length_km=0.0),
        calibration=CalibrationConfig(
            n_segments=16, n_detectors=8, repetitions=50, photons_per_pulse=80.0
        ),
        detector=DetectorArray(n_symbols=8, efficiency=0.65, dark_prob=0.0),
        mu2=5.0,
        n_symbols_to_send=50,
        seed=seed,
        matrix_model=MatrixModel.GAUSSIAN_IID,
        eve=eve,
    )


class TestMessages:
    @pytest.mark.parametrize(
        "msg",
        [
            CalibIntensityReport(probe_id="ab12", counts=(1.0, 2.0, 0.0)),
            CalibComplete(),
            DiscardList(indices=(1, 5, 9)),
            SampleRequest(indices=(0, 3)),
            SampleReveal(symbols=(7, 7)),
            ErrorEstimate(qer=0.125),
            Abort(reason="test"),
        ],
    )
    def test_wire_round_trip(self, msg):
        assert message_from_wire(message_to_wire(msg)) == msg

    def test_unknown_wire_type_rejected(self):
        with pytest.raises(InvalidParameterError):
            message_from_wire({"type": "telegram"})


class TestSessionConfigValidation:
    def test_sample_fraction_range(self):
        with pytest.raises(InvalidParameterError):
            SessionConfig(
                fiber=FiberSpec(n_modes=36),
                calibration=CalibrationConfig(n_segments=36, n_detectors=36),
                detector=DetectorArray(n_symbols=36),
                mu2=1.0,
                n_symbols_to_send=10,
                seed=0,
                sample_fraction=0.75,
            )

    def test_decode_strategy_checked(self):
        with pytest.raises(InvalidParameterError):
            SessionConfig(
                fiber=FiberSpec(n_modes=36),
                calibration=CalibrationConfig(n_segments=36, n_detectors=36),
                detector=DetectorArray(n_symbols=36),
                mu2=1.0,
                n_symbols_to_send=10,
                seed=0,
                decode="loudest",
            )

    def test_haar_needs_square_channel(self):
        with pytest.raises(InvalidParameterError):
            SessionConfig(
                fiber=FiberSpec(n_modes=64),
                calibration=CalibrationConfig(n_segments=32, n_detectors=8),
                detector=DetectorArray(n_symbols=8),
                mu2=1.0,
                n_symbols_to_send=10,
                seed=0,
            )

    def test_detector_count_must_match(self):
        with pytest.raises(InvalidParameterError):
            SessionConfig(
                fiber=FiberSpec(n_modes=36),
                calibration=CalibrationConfig(n_segments=36, n_detectors=12),
                detector=DetectorArray(n_symbols=36),
                mu2=1.0,
                n_symbols_to_send=10,
                seed=0,
            )


class TestCalibrationPhase:
    def test_noiseless_fidelities_are_measured_values(self):
        config = ideal_config()
        phase = run_calibration_phase(config, np.random.default_rng(3))
        assert not phase.eve_detected
        # unitary channel, exact reconstruction, full-field masks: unit fidelity
        assert np.all(phase.result.fidelity_per_symbol >= 0.999)
        assert isinstance(phase.messages[-1], CalibComplete)
        assert len(phase.messages) == config.calibration.n_triples + 1

    def test_probe_tokens_are_opaque_and_unique(self):
        phase = run_calibration_phase(ideal_config(), np.random.default_rng(4))
        tokens = [
            m.probe_id for m in phase.messages if isinstance(m, CalibIntensityReport)
        ]
        assert len(set(tokens)) == len(tokens)
        assert all(len(t) == 16 for t in tokens)

    def test_eve_in_calibration_detected(self):
        detected = []
        for seed in range(20):
            config = noisy_calib_config(seed, eve_in_calibration=True)
            phase = run_calibration_phase(config, np.random.default_rng(1000 + seed))
            detected.append(phase.eve_detected)
        assert all(detected)

    def test_honest_noisy_calibration_not_flagged(self):
        flagged = []
        for seed in range(20):
            config = noisy_calib_config(seed, eve_in_calibration=False)
            phase = run_calibration_phase(config, np.random.default_rng(2000 + seed))
            flagged.append(phase.eve_detected)
        assert not any(flagged)


class TestCommunicationPhase:
    def test_ideal_channel_decodes_every_click(self):
        config = ideal_config()
        calib = run_calibration_phase(config, np.random.default_rng(5))
        comm = run_communication_phase(config, calib, np.random.default_rng(6))
        kept = comm.bob_symbols >= 0
        assert np.all(comm.bob_symbols[kept] == comm.alice_symbols[kept])
        assert isinstance(comm.messages[0], DiscardList)

    def test_discards_match_empty_frames(self):
        config = ideal_config(mu2=0.5)  # many vacuum frames
        calib = run_calibration_phase(config, np.random.default_rng(7))
        comm = run_communication_phase(config, calib, np.random.default_rng(8))
        n_discard = int(np.sum(comm.bob_symbols < 0))
        assert n_discard > 0
        assert set(comm.messages[0].indices) == set(
            int(i) for i in np.flatnonzero(comm.bob_symbols < 0)
        )

    def test_full_intercept_scrambles_symbols(self):
        config = eve_comm_config(n_symbols_to_send=4000)
        calib = run_calibration_phase(config, np.random.default_rng(9))
        comm = run_communication_phase(config, calib, np.random.default_rng(10))
        kept = comm.bob_symbols >= 0
        assert kept.sum() > 50
        errors = np.mean(comm.bob_symbols[kept] != comm.alice_symbols[kept])
        assert errors > 0.9
        assert comm.eve_observations == 4000

    def test_threshold_decoding_cleans_key(self):
        # detected focus rate 0.1 mu^2 (phase-only pi/4 focusing times d = 0.127)
        config = SessionConfig(
            fiber=FiberSpec(n_modes=1500, length_km=0.0),
            calibration=CalibrationConfig(n_segments=1024, n_detectors=36, repetitions=1),
            detector=DetectorArray(n_symbols=36, efficiency=0.1273, dark_prob=0.0),
            mu2=30.0,
            n_symbols_to_send=10_000,
            seed=12,
            matrix_model=MatrixModel.GAUSSIAN_IID,
            mask_mode=PHASE_ONLY,
            decode="threshold",
            threshold=3,
            calibration_photon_noise=False,
        )
        calib = run_calibration_phase(config, np.random.default_rng(12))
        comm = run_communication_phase(config, calib, np.random.default_rng(13))
        kept = comm.bob_symbols >= 0
        assert kept.sum() > 1000
        errors = float(np.mean(comm.bob_symbols[kept] != comm.alice_symbols[kept]))
        assert errors < 0.01


class TestErrorEstimation:
    def test_identical_keys(self):
        rng = np.random.default_rng(14)
        key = rng.integers(0, 36, 400)
        estimate = estimate_error_rate(key, key.copy(), 0.25, rng)
        assert estimate.qer == 0.0

    def test_half_disagreement_estimated(self):
        rng = np.random.default_rng(15)
        n = 1000
        alice = np.zeros(n, dtype=int)
        bob = np.zeros(n, dtype=int)
        bob[: n // 2] = 1
        estimate = estimate_error_rate(alice, bob, 0.5, rng)
        assert abs(estimate.qer - 0.5) < 3.0 * math.sqrt(0.25 / 500)

    def test_sampled_indices_sorted_unique(self):
        rng = np.random.default_rng(16)
        alice = rng.integers(0, 4, 100)
        estimate = estimate_error_rate(alice, alice, 0.3, rng)
        idx = estimate.sampled_indices
        assert np.all(np.diff(idx) > 0)

    def test_empty_key_rejected(self):
        with pytest.raises(InsufficientKeyError):
            estimate_error_rate(np.empty(0), np.empty(0), 0.25, np.random.default_rng(0))


class TestRunSession:
    def test_ideal_session_releases_agreeing_key(self):
        transcript = run_session(ideal_config(seed=20))
        assert not transcript.aborted
        assert len(transcript.alice_key) > 0
        assert np.array_equal(transcript.alice_key, transcript.bob_key)
        # sampled positions never reach the final key
        n_kept = sum(1 for s in transcript.position_status if s == "kept")
        assert len(transcript.alice_key) == n_kept
        assert transcript.estimated_qer <= transcript.predicted_qer + 0.05

    def test_same_seed_gives_identical_transcripts(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_transcript(run_session(ideal_config(seed=21)), a)
        save_transcript(run_session(ideal_config(seed=21)), b)
        assert a.read_bytes() == b.read_bytes()

    def test_different_seed_differs(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_transcript(run_session(ideal_config(seed=21)), a)
        save_transcript(run_session(ideal_config(seed=22)), b)
        assert a.read_bytes() != b.read_bytes()

    def test_intercept_resend_aborts_with_high_qer(self):
        transcript = run_session(eve_comm_config(seed=23))
        assert transcript.aborted
        assert transcript.estimated_qer > 0.9
        assert isinstance(transcript.messages[-1], Abort)
        assert len(transcript.alice_key) == 0

    def test_calibration_attack_aborts_without_key_material(self):
        transcript = run_session(noisy_calib_config(24, eve_in_calibration=True))
        assert transcript.aborted
        assert transcript.eve_detected_in_calibration
        assert transcript.estimated_qer is None
        assert len(transcript.alice_key) == 0
        assert len(transcript.alice_symbols) == 0

    def test_mid_fidelity_session_matches_prediction(self):
        # phase-only masks on a unitary channel give ~pi/4 fidelity; the
        # sampled error rate must sit within the slack of the analytic rate
        config = SessionConfig(
            fiber=FiberSpec(n_modes=512, length_km=0.0, attenuation_db_per_km=0.2),
            calibration=CalibrationConfig(n_segments=512, n_detectors=36, repetitions=1),
            detector=DetectorArray(n_symbols=36, efficiency=0.65, dark_prob=7.2e-8),
            mu2=1.0,
            n_symbols_to_send=20_000,
            seed=77,
            mask_mode=PHASE_ONLY,
            calibration_photon_noise=False,
        )
        transcript = run_session(config)
        assert not transcript.aborted
        assert len(transcript.alice_key) > 0
        assert abs(transcript.estimated_qer - transcript.predicted_qer) < 0.05

    def test_key_alignment_bookkeeping(self):
        transcript = run_session(ideal_config(seed=25, mu2=1.0))
        kept = [i for i, s in enumerate(transcript.position_status) if s == "kept"]
        sampled = [i for i, s in enumerate(transcript.position_status) if s == "sampled"]
        discarded = [
            i for i, s in enumerate(transcript.position_status) if s == "discarded"
        ]
        assert len(kept) + len(sampled) + len(discarded) == ideal_config().n_symbols_to_send
        assert len(transcript.alice_key) == len(transcript.bob_key) == len(kept)
        assert np.array_equal(
            transcript.alice_key, transcript.alice_symbols[kept]
        )
        # every discarded position is one Bob reported in the DiscardList
        discard_msg = next(m for m in transcript.messages if isinstance(m, DiscardList))
        assert set(discarded) == set(discard_msg.indices)
        sample_msg = next(m for m in transcript.messages if isinstance(m, SampleRequest))
        assert set(sampled) == set(sample_msg.indices)

    def test_message_order(self):
        transcript = run_session(ideal_config(seed=26, n_symbols_to_send=100))
        kinds = [type(m).__name__ for m in transcript.messages]
        assert kinds[-4:] == [
            "DiscardList",
            "SampleRequest",
            "SampleReveal",
            "ErrorEstimate",
        ]
        assert kinds[0] == "CalibIntensityReport"
        assert "CalibComplete" in kinds


class TestTranscriptSerialization:
    def test_round_trip(self, tmp_path):
        transcript = run_session(ideal_config(seed=30, n_symbols_to_send=200))
        path = tmp_path / "t.jsonl"
        save_transcript(transcript, path)
        loaded = load_transcript(path)
        assert loaded.seed == transcript.seed
        assert loaded.messages == transcript.messages
        assert np.array_equal(loaded.alice_key, transcript.alice_key)
        assert loaded.position_status == transcript.position_status
        assert loaded.estimated_qer == transcript.estimated_qer

    def test_truncated_log_rejected(self, tmp_path):
        transcript = run_session(ideal_config(seed=31, n_symbols_to_send=100))
        path = tmp_path / "t.jsonl"
        save_transcript(transcript, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(InvalidParameterError):
            load_transcript(path)


class TestInformationAccounting:
    def test_single_photon_interception_gains_bounded_information(self):
        # empirical mutual information between Eve's pixel clicks and the
        # symbol labels stays within the 0.61-bit single-photon limit
        rng = np.random.default_rng(40)
        n_modes, n_symbols, n_clicks = 256, 36, 200_000
        tm = draw_transmission_matrix(n_modes, n_symbols, MatrixModel.GAUSSIAN_IID, rng)
        probs = np.abs(tm.entries) ** 2
        probs /= probs.sum(axis=0, keepdims=True)
        symbols = rng.integers(0, n_symbols, n_clicks)
        # vectorized equivalent of intercept_intensity per symbol column
        u = rng.random(n_clicks)
        cdf = np.cumsum(probs, axis=0)
        pixels = np.empty(n_clicks, dtype=np.int64)
        for s in range(n_symbols):
            mask = symbols == s
            pixels[mask] = np.searchsorted(cdf[:, s], u[mask])
        joint = np.zeros((n_modes, n_symbols))
        np.add.at(joint, (pixels, symbols), 1.0)
        joint /= n_clicks
        p_pixel = joint.sum(axis=1, keepdims=True)
        p_symbol = joint.sum(axis=0, keepdims=True)
        nz = joint > 0
        mi = float(
            np.sum(joint[nz] * np.log2(joint[nz] / (p_pixel @ p_symbol)[nz]))
        )
        assert mi <= 0.61 + 0.05

    def test_vectorized_sampler_matches_intercept_op(self):
        rng = np.random.default_rng(41)
        tm = draw_transmission_matrix(32, 4, MatrixModel.GAUSSIAN_IID, rng)
        field = np.zeros(4)
        field[2] = 1.0
        clicks = [intercept_intensity(tm, field, rng) for _ in range(4000)]
        probs = np.abs(tm.entries @ field) ** 2
        probs /= probs.sum()
        observed = np.bincount(clicks, minlength=32) / len(clicks)
        assert np.max(np.abs(observed - probs)) < 4.0 * math.sqrt(0.25 / len(clicks))
