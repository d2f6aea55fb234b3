"""Command-line front end.

Subcommands chain the library modules into complete runs: `lineshape`
(thermal resonance curves), `fit-spectrum` (line-centre fit of a
scanned spectrum file), `track` (drifting-resonance tracking or a
commanded voltage scan, with Allan/drift analysis and the force
report), `sensitivity` (Monte-Carlo noise-floor sweep over measurement
time and offset), and `calibrate` (field gradient from per-ion
frequencies).  Every run is deterministic given (config, seed); data
tables are CSV or JSON, and each command writes a JSON summary that
echoes the fully resolved config, the tool version and the seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .analysis import (
    SpectrumFitError,
    FrequencySeries,
    allan_deviation,
    charge_detection_distance,
    fit_spectrum,
    force_report,
    position_statistics,
)
from .atomphys import EquilibriumConvergenceError, calibrate_gradient
from .config import _SCHEMA, ConfigError, RunConfig, load_config
from .estimator import (
    analytic_sigma,
    estimate_from_counts,
    g_forward,
    g_slope,
    probe_probabilities,
)
from .lineshape import MotionalModel, excitation_profile, fwhm
from .simulator import drift_correct, run_tracking, run_voltage_scan

__all__ = ["main"]

TWO_PI = 2.0 * math.pi


class UsageError(Exception):
    """Bad invocation, config or input file (exit code 1)."""


class NumericalError(Exception):
    """A computation failed to converge or is degenerate (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we own the codes
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="iontrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version",
                        version=f"iontrack {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=None,
                        help="run configuration file (defaults compiled in)")
    common.add_argument("--seed", metavar="N", type=int, default=None,
                        help="override the configured random seed")
    common.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (created if missing)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="data-table format (summaries are always JSON)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("lineshape", parents=[common],
                   help="thermal resonance curves and their widths")
    p_fit = sub.add_parser("fit-spectrum", parents=[common],
                           help="fit a scanned line from a CSV file")
    p_fit.add_argument("input", help="CSV of detuning_hz,counts,shots rows")
    sub.add_parser("track", parents=[common],
                   help="simulate resonance tracking or a voltage scan")
    sub.add_parser("sensitivity", parents=[common],
                   help="Monte-Carlo noise floor vs time and offset")
    p_cal = sub.add_parser("calibrate", parents=[common],
                           help="field gradient from per-ion frequencies")
    p_cal.add_argument("input", help="text file, one frequency in Hz per line")
    return parser


# ---------------------------------------------------------------------------
# output helpers

def _config_echo(cfg: RunConfig) -> dict:
    echo: dict[str, dict] = {}
    for section, keys in _SCHEMA.items():
        echo[section] = {}
        for key, (field_name, _parse) in keys.items():
            value = getattr(cfg, field_name)
            echo[section][key] = list(value) if isinstance(value, tuple) else value
    return echo


def _summary_base(cfg: RunConfig) -> dict:
    return {"version": __version__, "seed": cfg.seed, "config": _config_echo(cfg)}


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_table(out_dir: str, name: str, fmt: str, header: list[str],
                 rows: list[list]) -> str:
    path = os.path.join(out_dir, f"{name}.{fmt}")
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    else:
        payload = [dict(zip(header, row)) for row in rows]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def _nbar_label(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


# ---------------------------------------------------------------------------
# subcommands

def cmd_lineshape(cfg: RunConfig, out_dir: str, fmt: str) -> None:
    pulse = cfg.pulse()
    fractions = np.linspace(cfg.lineshape_detuning_min_rabi,
                            cfg.lineshape_detuning_max_rabi,
                            cfg.lineshape_n_points)
    detunings = fractions * pulse.rabi
    header = ["delta_over_rabi"]
    columns = [fractions]
    widths: dict[str, float] = {}
    for nbar in cfg.lineshape_nbar_values:
        motion = MotionalModel(nbar=nbar, eta=float(cfg.eta))
        label = _nbar_label(nbar)
        header.append(f"p_nbar_{label}")
        columns.append(excitation_profile(detunings, pulse, motion))
        try:
            widths[label] = fwhm(motion, pulse) / pulse.rabi
        except ValueError as exc:
            raise NumericalError(f"FWHM at nbar={label}: {exc}") from exc
    rows = [list(row) for row in zip(*columns)]
    table = _write_table(out_dir, "lineshape", fmt, header, rows)
    summary = _summary_base(cfg)
    summary["fwhm_over_rabi"] = widths
    summary["table"] = os.path.basename(table)
    _write_json(os.path.join(out_dir, "lineshape_summary.json"), summary)


_SPECTRUM_HEADER = ["detuning_hz", "counts", "shots"]


def _read_spectrum_csv(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or [c.strip() for c in rows[0]] != _SPECTRUM_HEADER:
        raise UsageError(
            f"{path}: line 1: expected header {','.join(_SPECTRUM_HEADER)}")
    detuning, counts, shots = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise UsageError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
        try:
            detuning.append(float(row[0]))
            counts.append(int(row[1]))
            shots.append(int(row[2]))
        except ValueError as exc:
            raise UsageError(f"{path}: line {lineno}: {exc}") from exc
        if shots[-1] < 1 or not 0 <= counts[-1] <= shots[-1]:
            raise UsageError(
                f"{path}: line {lineno}: counts must lie in [0, shots], shots >= 1")
    if not detuning:
        raise UsageError(f"{path}: no data rows")
    return (np.asarray(detuning), np.asarray(counts, dtype=int),
            np.asarray(shots, dtype=int))


def cmd_fit_spectrum(cfg: RunConfig, input_path: str, out_dir: str, fmt: str) -> None:
    detuning_hz, counts, shots = _read_spectrum_csv(input_path)
    excitation = counts / shots
    try:
        result = fit_spectrum(TWO_PI * detuning_hz, excitation, shots, cfg.motion())
    except (SpectrumFitError, ValueError) as exc:
        raise NumericalError(f"spectrum fit: {exc}") from exc
    stderr = np.sqrt(np.diag(result.covariance))
    params = {
        "center_hz": (result.center / TWO_PI, float(stderr[0]) / TWO_PI),
        "rabi_hz": (result.rabi / TWO_PI, float(stderr[1]) / TWO_PI),
        "amplitude": (result.amplitude, float(stderr[2])),
        "baseline": (result.baseline, float(stderr[3])),
    }
    rows = [[name, value, err] for name, (value, err) in params.items()]
    _write_table(out_dir, "fit_spectrum", fmt,
                 ["parameter", "value", "stderr"], rows)
    summary = _summary_base(cfg)
    summary["fit"] = {name: {"value": value, "stderr": err}
                      for name, (value, err) in params.items()}
    summary["fit"]["reduced_chisq"] = result.reduced_chisq
    summary["fit"]["n_points"] = result.n_points
    summary["input"] = os.path.basename(input_path)
    _write_json(os.path.join(out_dir, "fit_spectrum_summary.json"), summary)


def _record_rows(record) -> list[list]:
    rows = []
    for s in record.samples:
        rows.append([s.timestamp, s.nu0 / TWO_PI, s.delta / TWO_PI,
                     s.nu_estimated / TWO_PI, s.sigma_nu / TWO_PI,
                     s.true_nu / TWO_PI, int(s.in_window), s.applied_voltage])
    return rows


def cmd_track(cfg: RunConfig, out_dir: str, fmt: str) -> None:
    species = cfg.species()
    env = cfg.trap()
    two_point = cfg.two_point()
    timeline = cfg.timeline()
    drift = cfg.drift()
    try:
        if cfg.scan_enabled:
            record = run_voltage_scan(cfg.voltage_schedule(), env, species,
                                      drift, two_point, timeline,
                                      cfg.initial_nu0(), variant=cfg.variant)
        else:
            record = run_tracking(cfg.n_cycles, cfg.initial_nu0(), drift,
                                  two_point, timeline)
    except ValueError as exc:
        raise NumericalError(f"tracking: {exc}") from exc

    header = ["time_s", "nu0_hz", "delta_hz", "nu_estimated_hz",
              "sigma_nu_hz", "true_nu_hz", "in_window", "voltage_v"]
    if fmt == "csv":
        table = os.path.join(out_dir, "track_record.csv")
        record.write_csv(table)
    else:
        table = _write_table(out_dir, "track_record", fmt, header,
                             _record_rows(record))

    summary = _summary_base(cfg)
    summary["table"] = os.path.basename(table)
    summary["n_cycles"] = len(record)
    summary["lost_lock"] = record.lost_lock

    allan: dict | None = None
    if len(record) >= 3:
        try:
            series = FrequencySeries.from_record(record)
            result = allan_deviation(series, cfg.allan_taus_s)
            allan = {
                "taus_s": [float(t) for t in result.taus],
                "adev_hz": [float(a) / TWO_PI for a in result.adev],
                "n_pairs": [int(k) for k in result.n_pairs],
                "drift_rate_hz_per_s": result.drift_rate / TWO_PI,
                "white_level_hz_rt_s": result.white_level / TWO_PI,
                "fit_residual": result.fit_residual,
            }
        except ValueError as exc:
            allan = {"error": str(exc)}
    summary["allan"] = allan

    if cfg.scan_enabled:
        try:
            points = drift_correct(record)
        except ValueError as exc:
            raise NumericalError(f"drift correction: {exc}") from exc
        stats = position_statistics(points, env, species, variant=cfg.variant)
        rows = [[p.timestamp, p.voltage, p.delta_nu / TWO_PI, p.sigma_nu / TWO_PI,
                 float(z), float(sz)]
                for p, z, sz in zip(points, stats.displacements, stats.sigmas)]
        _write_table(out_dir, "track_displacements", fmt,
                     ["time_s", "voltage_v", "delta_nu_hz", "sigma_nu_hz",
                      "delta_z_m", "sigma_z_m"], rows)
        summary["n_displacement_points"] = len(points)
    else:
        stats = position_statistics(record, env, species, variant=cfg.variant)

    force = force_report(stats.mean_sigma, env, species,
                         timeline.measurement_duration)
    summary["position"] = {"mean_sigma_z_m": stats.mean_sigma}
    summary["force"] = {
        "stiffness_n_per_m": force.stiffness,
        "sigma_force_n": force.sigma_force,
        "measurement_time_s": force.measurement_time,
        "sensitivity_n_per_rt_hz": force.sensitivity,
        "single_charge_distance_m": charge_detection_distance(force.sigma_force),
    }
    _write_json(os.path.join(out_dir, "track_summary.json"), summary)


def _sensitivity_cell(cfg: RunConfig, duration: float, offset_rabi: float,
                      rng: np.random.Generator) -> tuple[float, float, int]:
    """(MC sigma/Omega, analytic sigma/Omega, shots per side) for one cell."""
    two_point = cfg.two_point()
    rabi = two_point.pulse.rabi
    per_side = int(duration / cfg.rep_period_s) // 2
    if per_side < 1:
        raise NumericalError(f"duration {duration} s gives no complete shot pair")
    cell_cfg = replace(two_point, shots_per_side=per_side)
    delta = offset_rabi * rabi
    p_plus, p_minus = probe_probabilities(delta, cell_cfg)
    c_plus = rng.binomial(per_side, p_plus, size=cfg.n_seeds)
    c_minus = rng.binomial(per_side, p_minus, size=cfg.n_seeds)
    if abs(delta) < cell_cfg.window_halfwidth:
        estimates = np.array([
            estimate_from_counts(int(cp), int(cm), cell_cfg).delta
            for cp, cm in zip(c_plus, c_minus)
        ])
    else:
        # Outside the capture window the inversion clamps, so the cell
        # reports the locally linearised estimator's spread instead.
        g_hat = (c_plus - c_minus) / (c_plus + c_minus)
        estimates = delta + (g_hat - g_forward(delta, cell_cfg)) / \
            g_slope(delta, cell_cfg)
    mc = float(estimates.std(ddof=1)) / rabi
    analytic = analytic_sigma(cell_cfg, delta, per_side) / rabi
    return mc, analytic, per_side


def cmd_sensitivity(cfg: RunConfig, out_dir: str, fmt: str) -> None:
    cells = [(t, d) for t in cfg.durations_s for d in cfg.offsets_rabi]
    children = np.random.SeedSequence(cfg.seed).spawn(len(cells))
    rows = []
    for (duration, offset), child in zip(cells, children):
        mc, analytic, per_side = _sensitivity_cell(
            cfg, duration, offset, np.random.default_rng(child))
        rows.append([duration, offset, per_side, mc, analytic])
    _write_table(out_dir, "sensitivity", fmt,
                 ["duration_s", "offset_rabi", "shots_per_side",
                  "sigma_mc_over_rabi", "sigma_analytic_over_rabi"], rows)
    summary = _summary_base(cfg)
    summary["n_seeds_per_cell"] = cfg.n_seeds
    summary["cells"] = [
        {"duration_s": r[0], "offset_rabi": r[1], "shots_per_side": r[2],
         "sigma_mc_over_rabi": r[3], "sigma_analytic_over_rabi": r[4]}
        for r in rows
    ]
    _write_json(os.path.join(out_dir, "sensitivity_summary.json"), summary)


def _read_frequencies(path: str) -> list[float]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    values = []
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError as exc:
            raise UsageError(f"{path}: line {lineno}: {exc}") from exc
    if len(values) < 2:
        raise UsageError(f"{path}: need at least two per-ion frequencies")
    return values


def cmd_calibrate(cfg: RunConfig, input_path: str, out_dir: str, fmt: str) -> None:
    frequencies_hz = _read_frequencies(input_path)
    try:
        result = calibrate_gradient(
            [TWO_PI * f for f in frequencies_hz], cfg.trap(), cfg.species(),
            variant=cfg.variant)
    except EquilibriumConvergenceError as exc:
        raise NumericalError(f"chain equilibrium: {exc}") from exc
    except ValueError as exc:
        raise NumericalError(f"gradient calibration: {exc}") from exc
    rows = [[i, float(z), float(b)] for i, (z, b) in
            enumerate(zip(result.positions, result.fields))]
    _write_table(out_dir, "calibrate", fmt,
                 ["ion_index", "position_m", "field_t"], rows)
    summary = _summary_base(cfg)
    summary["gradient"] = {
        "gradient_t_per_m": result.gradient,
        "gradient_stderr_t_per_m":
            None if math.isnan(result.gradient_stderr) else result.gradient_stderr,
        "field_intercept_t": result.field_intercept,
        "monotone": result.monotone,
        "n_ions": len(frequencies_hz),
    }
    _write_json(os.path.join(out_dir, "calibrate_summary.json"), summary)


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"iontrack: error: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config, seed=args.seed)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "lineshape":
            cmd_lineshape(cfg, args.out, args.format)
        elif args.command == "fit-spectrum":
            cmd_fit_spectrum(cfg, args.input, args.out, args.format)
        elif args.command == "track":
            cmd_track(cfg, args.out, args.format)
        elif args.command == "sensitivity":
            cmd_sensitivity(cfg, args.out, args.format)
        elif args.command == "calibrate":
            cmd_calibrate(cfg, args.input, args.out, args.format)
    except (UsageError, ConfigError) as exc:
        print(f"iontrack: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"iontrack: error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"iontrack: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
