"""Command-line front end: seeded experiments emitting CSV/JSON tables.

Subcommands: ``calibrate`` (one calibration pass, columnar record),
``session`` (full key-establishment run, line-delimited transcript plus a
JSON summary), ``figure <id>`` (the standard analysis tables) and
``report`` (the security report for one parameter set).  Every output
is reproducible byte for byte from (config, seed): floats are written with
their shortest round-trip representation and each table carries a
provenance comment with the tool version, seed and a config hash.

Exit codes: 0 success, 1 configuration or usage error, 2 security abort,
3 internal error.
"""
import argparse
import hashlib
import json
import math
import sys

import numpy as np

from . import __version__
from . import calibration as cal
from . import protocol as proto
from . import security as sec
from .adversary import InterceptModel, eve_phase_fidelity
from .channel import FiberSpec, MatrixModel
from .detection import DetectorArray, analytic_success_probability, monte_carlo_success_probability, threshold_statistics
from .errors import ConfigError, FiberKeyError
from .protocol import EveConfig, SessionConfig

FIGURE_IDS = ("2c", "2d", "3a", "3b", "3c", "3d")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2
EXIT_INTERNAL = 3


# --- configuration schema ----------------------------------------------------

def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _positive(v):
    return _is_number(v) and v > 0


def _non_negative(v):
    return _is_number(v) and v >= 0


def _positive_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _fraction(v):
    return _is_number(v) and 0.0 <= v <= 1.0


def _choice(*options):
    return lambda v: v in options, "one of " + ", ".join(map(repr, options))


_SCHEMA = {
    "fiber": {
        "core_diameter_m": (_positive, "positive number", 50e-6),
        "na": (lambda v: _is_number(v) and 0 < v < 1, "number in (0, 1)", 0.22),
        "n_core": (_positive, "positive number", 1.45),
        "wavelength_m": (_positive, "positive number", 633e-9),
        "attenuation_db_per_km": (_non_negative, "number >= 0", 0.2),
        "length_km": (_non_negative, "number >= 0", 0.0),
        "n_modes": (
            lambda v: v is None or _positive_int(v),
            "positive integer or null",
            1500,
        ),
    },
    "calibration": {
        "n_segments": (_positive_int, "positive integer", 64),
        "n_detectors": (lambda v: v is None or _positive_int(v), "positive integer or null", None),
        "phase_steps": (lambda v: _positive_int(v) and v >= 3, "integer >= 3", 3),
        "repetitions": (_positive_int, "positive integer", 50),
        "photons_per_pulse": (_non_negative, "number >= 0", 80.0),
        "photon_noise": (lambda v: isinstance(v, bool), "boolean", True),
    },
    "detector": {
        "n_symbols": (_positive_int, "positive integer", 36),
        "efficiency": (_fraction, "number in [0, 1]", 0.65),
        "dark_prob": (lambda v: _is_number(v) and 0 <= v < 1, "number in [0, 1)", 7.2e-8),
        "capture_correct": (_non_negative, "number >= 0", 1.0),
        "background_modes": (_non_negative, "number >= 0", 1.0),
    },
    "adversary": {
        "enabled": (lambda v: isinstance(v, bool), "boolean", False),
        "kind": _choice("intensity_single_photon", "homodyne_field")
        + ("homodyne_field",),
        "tap_fraction": (lambda v: _is_number(v) and 0 < v <= 1, "number in (0, 1]", 1.0),
        "active_in": (
            lambda v: isinstance(v, list)
            and v
            and all(p in ("calibration", "communication") for p in v),
            "non-empty list of 'calibration'/'communication'",
            ["communication"],
        ),
    },
    "protocol": {
        "mu2": (_non_negative, "number >= 0", 1.0),
        "n_symbols_to_send": (_positive_int, "positive integer", 1000),
        "decode": _choice("argmax", "threshold") + ("argmax",),
        "threshold": (_positive_int, "positive integer", 2),
        "sample_fraction": (
            lambda v: _is_number(v) and 0 < v <= 0.5,
            "number in (0, 0.5]",
            0.25,
        ),
        "qer_slack": (_non_negative, "number >= 0", 0.05),
        "mask_mode": _choice("phase_only", "full_field") + ("full_field",),
        "matrix_model": _choice("gaussian_iid", "haar_unitary") + ("haar_unitary",),
        "alpha2": (_fraction, "number in [0, 1]", 0.7),
        "symbol_rate_hz": (_non_negative, "number >= 0", 97e3),
        "entropy_samples": (
            lambda v: _positive_int(v) and v >= 10_000,
            "integer >= 10000",
            100_000,
        ),
        "budget_method": _choice("bound", "monte_carlo") + ("monte_carlo",),
        "mc_trials": (_positive_int, "positive integer", 100_000),
        "lambda1_per_mu2": (_non_negative, "number >= 0", 0.1),
        "lambda2_per_mu2": (_non_negative, "number >= 0", 0.005),
    },
    "sweep": {
        "parameter": (lambda v: isinstance(v, str), "string", None),
        "values": (
            lambda v: isinstance(v, list) and v and all(_is_number(x) for x in v),
            "non-empty list of numbers",
            None,
        ),
    },
    "output": {
        "path": (lambda v: isinstance(v, str), "string", None),
        "format": _choice("csv", "json") + ("csv",),
    },
}

_SWEEPABLE = {
    f"{section}.{key}"
    for section, fields in _SCHEMA.items()
    if section not in ("sweep", "output")
    for key in fields
}


class ExperimentConfig:
    """Validated experiment configuration with defaults applied."""

    def __init__(self, seed, sections, raw_text=""):
        self.seed = seed
        self.fiber = sections["fiber"]
        self.calibration = sections["calibration"]
        self.detector = sections["detector"]
        self.adversary = sections["adversary"]
        self.protocol = sections["protocol"]
        self.sweep = sections.get("sweep")
        self.output = sections["output"]
        self._raw_text = raw_text

    def canonical(self) -> dict:
        return {
            "seed": self.seed,
            "fiber": self.fiber,
            "calibration": self.calibration,
            "detector": self.detector,
            "adversary": self.adversary,
            "protocol": self.protocol,
            "sweep": self.sweep,
            "output": self.output,
        }

    @property
    def params_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def fiber_spec(self) -> FiberSpec:
        return FiberSpec(**self.fiber)

    def detector_array(self) -> DetectorArray:
        return DetectorArray(**self.detector)

    def calibration_config(self) -> cal.CalibrationConfig:
        fields = dict(self.calibration)
        fields.pop("photon_noise")
        if fields.get("n_detectors") is None:
            fields["n_detectors"] = self.detector["n_symbols"]
        return cal.CalibrationConfig(**fields)

    def eve_config(self) -> EveConfig | None:
        if not self.adversary["enabled"]:
            return None
        return EveConfig(
            model=InterceptModel(
                kind=self.adversary["kind"], tap_fraction=self.adversary["tap_fraction"]
            ),
            active_in=frozenset(self.adversary["active_in"]),
        )

    def session_config(self) -> SessionConfig:
        p = self.protocol
        return SessionConfig(
            fiber=self.fiber_spec(),
            calibration=self.calibration_config(),
            detector=self.detector_array(),
            mu2=p["mu2"],
            n_symbols_to_send=p["n_symbols_to_send"],
            seed=self.seed,
            matrix_model=MatrixModel(p["matrix_model"]),
            mask_mode=p["mask_mode"],
            decode=p["decode"],
            threshold=p["threshold"],
            sample_fraction=p["sample_fraction"],
            qer_slack=p["qer_slack"],
            calibration_photon_noise=self.calibration["photon_noise"],
            eve=self.eve_config(),
        )


def _find_line(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration.

    Unknown keys anywhere, type violations and a missing seed are all
    collected and reported together with best-effort line numbers.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([(exc.lineno, "<json>", f"syntax error: {exc.msg}")]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([(1, "<root>", "top level must be a JSON object")])

    issues = []
    known_sections = set(_SCHEMA) | {"seed"}
    for key in raw:
        if key not in known_sections:
            issues.append((_find_line(text, key), key, "unknown key"))

    seed = raw.get("seed")
    if seed is None:
        issues.append((None, "seed", "missing (a seed is mandatory)"))
    elif not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        issues.append((_find_line(text, "seed"), "seed", "must be a non-negative integer"))

    sections = {}
    for section, fields in _SCHEMA.items():
        given = raw.get(section)
        if given is None:
            given = {}
        elif not isinstance(given, dict):
            issues.append((_find_line(text, section), section, "must be an object"))
            given = {}
        for key in given:
            if key not in fields:
                issues.append(
                    (_find_line(text, key), f"{section}.{key}", "unknown key")
                )
        resolved = {}
        for key, (check, expect, default) in fields.items():
            if key in given:
                value = given[key]
                if not check(value):
                    issues.append(
                        (
                            _find_line(text, key),
                            f"{section}.{key}",
                            f"expected {expect}, got {value!r}",
                        )
                    )
                    value = default
                resolved[key] = value
            else:
                resolved[key] = default
        sections[section] = resolved

    if "sweep" in raw:
        sweep = sections["sweep"]
        if sweep["parameter"] is None or sweep["values"] is None:
            issues.append(
                (_find_line(text, "sweep"), "sweep", "needs both 'parameter' and 'values'")
            )
        elif sweep["parameter"] not in _SWEEPABLE:
            issues.append(
                (
                    _find_line(text, "parameter"),
                    "sweep.parameter",
                    f"{sweep['parameter']!r} does not name an existing field",
                )
            )
    else:
        sections["sweep"] = None

    if issues:
        raise ConfigError(issues)
    return ExperimentConfig(seed=seed, sections=sections, raw_text=text)


def load_config(path, seed_override=None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        config = parse_config(fh.read())
    if seed_override is not None:
        if seed_override < 0:
            raise ConfigError([(None, "seed", "must be a non-negative integer")])
        config.seed = seed_override
    return config


# --- table output ------------------------------------------------------------

def _provenance(config: ExperimentConfig, label: str) -> str:
    return (
        f"fiberkey {__version__} {label} seed={config.seed} "
        f"params=sha256:{config.params_hash}"
    )


def _as_builtin(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _json_safe(v):
    # strict JSON has no Infinity/NaN; the saturated flag carries the meaning
    v = _as_builtin(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _format_value(v):
    v = _as_builtin(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path, columns, rows, provenance, fmt):
    """Write a result table as commented CSV or structured JSON."""
    if fmt == "csv":
        lines = [f"# {provenance}"]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_format_value(row[c]) for c in columns))
        payload = "\n".join(lines) + "\n"
    else:
        payload = json.dumps(
            {
                "provenance": provenance,
                "columns": list(columns),
                "rows": [[_json_safe(row[c]) for c in columns] for row in rows],
            },
            indent=2,
        ) + "\n"
    if path is None or path == "-":
        sys.stdout.write(payload)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload)


# --- figures ------------------------------------------------------------------

def _sweep_values(config, parameter, default):
    if config.sweep and config.sweep["parameter"] == parameter:
        return list(config.sweep["values"])
    return list(default)


def _figure_2c(config, rng):
    p = config.protocol
    s = config.detector["n_symbols"]
    trials = p["mc_trials"]
    mu2_grid = _sweep_values(config, "protocol.mu2", np.arange(2.0, 62.0, 4.0))
    rows = []
    for mu2 in mu2_grid:
        lam1 = p["lambda1_per_mu2"] * mu2
        lam2 = p["lambda2_per_mu2"] * mu2
        mc, mc_se = monte_carlo_success_probability(lam1, lam2, s, rng, trials)
        t2 = threshold_statistics(lam1, lam2, s, 2, rng, trials)
        t3 = threshold_statistics(lam1, lam2, s, 3, rng, trials)
        rows.append(
            {
                "mu2": float(mu2),
                "lambda1": lam1,
                "lambda2": lam2,
                "p_correct_analytic": analytic_success_probability(lam1, lam2, s),
                "p_correct_mc": mc,
                "p_correct_mc_stderr": mc_se,
                "p_correct_threshold2": t2.success_given_accept,
                "p_correct_threshold2_stderr": t2.success_stderr,
                "p_correct_threshold3": t3.success_given_accept,
                "p_correct_threshold3_stderr": t3.success_stderr,
            }
        )
    columns = list(rows[0].keys())
    return columns, rows


def _figure_2d(config, rng):
    p = config.protocol
    s = config.detector["n_symbols"]
    trials = p["mc_trials"]
    mu2_grid = _sweep_values(config, "protocol.mu2", np.arange(2.0, 62.0, 4.0))
    rows = []
    for mu2 in mu2_grid:
        lam1 = p["lambda1_per_mu2"] * mu2
        lam2 = p["lambda2_per_mu2"] * mu2
        t2 = threshold_statistics(lam1, lam2, s, 2, rng, trials)
        t3 = threshold_statistics(lam1, lam2, s, 3, rng, trials)
        rows.append(
            {
                "mu2": float(mu2),
                "lambda1": lam1,
                "lambda2": lam2,
                "reject_rate_threshold2": t2.rejection_rate,
                "reject_rate_threshold2_stderr": t2.accept_stderr,
                "reject_rate_threshold3": t3.rejection_rate,
                "reject_rate_threshold3_stderr": t3.accept_stderr,
            }
        )
    return list(rows[0].keys()), rows


def _figure_3a(config, rng):
    mu2_grid = _sweep_values(
        config, "protocol.mu2", (0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0)
    )
    n_grid = _sweep_values(
        config, "fiber.n_modes", (500, 1000, 1500, 3000, 5000, 10000)
    )
    rows = [
        {"mu2": float(mu2), "n_modes": int(n), "beta2": eve_phase_fidelity(mu2, int(n))}
        for mu2 in mu2_grid
        for n in n_grid
    ]
    return ["mu2", "n_modes", "beta2"], rows


def _figure_3b(config, rng):
    p = config.protocol
    s = config.detector["n_symbols"]
    mu2_grid = _sweep_values(
        config, "protocol.mu2", (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
    )
    rows = []
    for mu2 in mu2_grid:
        est = sec.coherent_eve_entropy_mc(float(mu2), s, p["entropy_samples"], rng)
        rows.append(
            {
                "mu2": float(mu2),
                "h_eve_mc_bits": est.value,
                "h_eve_mc_stderr_bits": est.stderr,
                "h_eve_bound_bits": sec.coherent_eve_entropy_bound(float(mu2), s),
            }
        )
    return list(rows[0].keys()), rows


def _figure_3c(config, rng):
    p = config.protocol
    s = config.detector["n_symbols"]
    alpha_grid = _sweep_values(
        config, "protocol.alpha2", (0.1, 0.3, 0.5, 0.7, 0.9)
    )
    n_grid = _sweep_values(config, "fiber.n_modes", (1500, 5000))
    rows = []
    for alpha2 in alpha_grid:
        for n in n_grid:
            budget = sec.secure_photon_budget(
                float(alpha2),
                int(n),
                s,
                method=p["budget_method"],
                rng=rng,
                samples=p["entropy_samples"],
            )
            rows.append(
                {
                    "alpha2": float(alpha2),
                    "n_modes": int(n),
                    "secure_mu2": budget.mu2,
                    "secure_mu2_ci_low": budget.ci_low,
                    "secure_mu2_ci_high": budget.ci_high,
                    "saturated": budget.saturated,
                }
            )
    return list(rows[0].keys()), rows


def _figure_3d(config, rng):
    p = config.protocol
    f = config.fiber
    s = config.detector["n_symbols"]
    d = config.detector["efficiency"]
    dark = config.detector["dark_prob"]
    n = f["n_modes"]
    length_grid = _sweep_values(config, "fiber.length_km", np.arange(0.0, 260.0, 10.0))
    mu2_grid = _sweep_values(config, "protocol.mu2", (0.1, 1.0, 10.0))
    rows = []
    for mu2 in mu2_grid:
        beta2 = eve_phase_fidelity(float(mu2), n)
        for length in length_grid:
            args = (
                p["alpha2"],
                float(mu2),
                n,
                s,
                d,
                dark,
                f["attenuation_db_per_km"],
                float(length),
            )
            rows.append(
                {
                    "length_km": float(length),
                    "mu2": float(mu2),
                    "beta2": beta2,
                    "qer_secure": sec.qer_secure(*args),
                    "qer_interception": sec.qer_interception(*args, beta2),
                }
            )
    return list(rows[0].keys()), rows


_FIGURES = {
    "2c": _figure_2c,
    "2d": _figure_2d,
    "3a": _figure_3a,
    "3b": _figure_3b,
    "3c": _figure_3c,
    "3d": _figure_3d,
}


def run_figure(figure_id: str, config: ExperimentConfig, out=None, fmt=None) -> None:
    """Emit the data table behind one figure, deterministically per seed."""
    if figure_id not in _FIGURES:
        raise ConfigError([(None, "figure", f"unknown figure id {figure_id!r}")])
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    columns, rows = _FIGURES[figure_id](config, rng)
    write_table(
        out if out is not None else config.output["path"],
        columns,
        rows,
        _provenance(config, f"figure={figure_id}"),
        fmt or config.output["format"],
    )


# --- subcommands ---------------------------------------------------------------

def _cmd_figure(args) -> int:
    config = load_config(args.config, args.seed)
    run_figure(args.figure_id, config, out=args.out, fmt=args.format)
    return EXIT_OK


def _cmd_report(args) -> int:
    config = load_config(args.config, args.seed)
    p = config.protocol
    f = config.fiber
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    report = sec.security_report(
        alpha2=p["alpha2"],
        mu2=p["mu2"],
        n_modes=f["n_modes"],
        n_symbols=config.detector["n_symbols"],
        efficiency=config.detector["efficiency"],
        dark_prob=config.detector["dark_prob"],
        attenuation_db_per_km=f["attenuation_db_per_km"],
        length_km=f["length_km"],
        rng=rng,
        symbol_rate_hz=p["symbol_rate_hz"],
        mc_samples=p["entropy_samples"],
        budget_method=p["budget_method"],
    )
    fmt = args.format or config.output["format"]
    if fmt == "json":
        payload = json.dumps(
            {"provenance": _provenance(config, "report")}
            | {k: _json_safe(v) for k, v in report.to_dict().items()},
            indent=2,
        ) + "\n"
    else:
        payload = f"# {_provenance(config, 'report')}\n" + report.to_text()
    out = args.out if args.out is not None else config.output["path"]
    if out is None or out == "-":
        sys.stdout.write(payload)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    config = load_config(args.config, args.seed)
    session = config.session_config()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
    phase = proto.run_calibration_phase(session, rng)
    out = args.out if args.out is not None else config.output["path"]
    if out is not None:
        cal.save_record(phase.record, out)
    summary = {
        "provenance": _provenance(config, "calibrate"),
        "contrast": phase.contrast,
        "verdict": "attacked" if phase.eve_detected else "honest",
        "fidelity_per_symbol": [float(x) for x in phase.result.fidelity_per_symbol],
        "record_path": out,
    }
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_ABORT if phase.eve_detected else EXIT_OK


def _session_summary(config, transcript) -> dict:
    return {
        "provenance": _provenance(config, "session"),
        "aborted": transcript.aborted,
        "abort_reason": transcript.abort_reason,
        "key_length": int(len(transcript.alice_key)),
        "estimated_qer": transcript.estimated_qer,
        "predicted_qer": transcript.predicted_qer,
        "eve_detected_in_calibration": transcript.eve_detected_in_calibration,
        "eve_observations": transcript.eve_observations,
        "calibration_contrast": transcript.calibration_contrast,
        "n_kept": sum(1 for s in transcript.position_status if s == proto.KEPT),
        "n_discarded": sum(1 for s in transcript.position_status if s == proto.DISCARDED),
        "n_sampled": sum(1 for s in transcript.position_status if s == proto.SAMPLED),
    }


def _cmd_session(args) -> int:
    config = load_config(args.config, args.seed)
    if args.replay:
        transcript = proto.load_transcript(args.replay)
    else:
        transcript = proto.run_session(config.session_config())
    summary = _session_summary(config, transcript)
    if not args.replay:
        p = config.protocol
        f = config.fiber
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
        report = sec.security_report(
            alpha2=p["alpha2"],
            mu2=p["mu2"],
            n_modes=f["n_modes"],
            n_symbols=config.detector["n_symbols"],
            efficiency=config.detector["efficiency"],
            dark_prob=config.detector["dark_prob"],
            attenuation_db_per_km=f["attenuation_db_per_km"],
            length_km=f["length_km"],
            rng=rng,
            symbol_rate_hz=p["symbol_rate_hz"],
            mc_samples=p["entropy_samples"],
            budget_method=p["budget_method"],
        )
        summary["security_report"] = {k: _json_safe(v) for k, v in report.to_dict().items()}
        out = args.out if args.out is not None else config.output["path"]
        if out is None:
            out = "transcript.jsonl"
        proto.save_transcript(transcript, out)
        summary["transcript_path"] = out
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_ABORT if transcript.aborted else EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors map to exit code 1, not argparse's 2."""

    def error(self, message):
        raise ConfigError([(None, "usage", message)])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fiberkey",
        description="Simulator and security analyzer for multimode-fiber key establishment",
    )
    parser.add_argument("--version", action="version", version=f"fiberkey {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment configuration (JSON)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output path ('-' for stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    p_cal = sub.add_parser("calibrate", parents=[common], help="run one calibration pass")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_ses = sub.add_parser("session", parents=[common], help="run a full session")
    p_ses.add_argument("--replay", default=None, help="summarize an existing transcript")
    p_ses.set_defaults(func=_cmd_session)

    p_fig = sub.add_parser("figure", parents=[common], help="emit a figure data table")
    p_fig.add_argument("figure_id", choices=FIGURE_IDS)
    p_fig.set_defaults(func=_cmd_figure)

    p_rep = sub.add_parser("report", parents=[common], help="emit a security report")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FiberKeyError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # internal error: keep the exit-code contract
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
