"""Declarative run configuration: sectioned key-value files.

One file describes one run completely — species, trap, pulse, motion,
estimator, timeline, drift, scan schedule and per-command settings.
Keys carry explicit units in their names, all frequencies are ordinary
Hz (the internal representation is angular), unknown sections or keys
are rejected, and `auto` values are resolved at load so that emitting
the loaded config is idempotent.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, fields, replace

from .atomphys import (
    BREIT_RABI_VARIANTS,
    CODATA,
    IonSpecies,
    TrapEnvironment,
    transition_frequency,
)
from .estimator import TwoPointConfig
from .lineshape import MotionalModel, PulseSpec, compute_eta
from .simulator import DriftModel, ExperimentTimeline, VoltageSchedule

__all__ = ["ConfigError", "RunConfig", "default_config", "loads", "load_config", "emit"]

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Malformed, unknown or inconsistent configuration input."""


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved description of one run.

    Field names mirror the file keys; frequencies are ordinary Hz here
    and only become angular inside the builder methods.
    """

    # [species]
    species_label: str = "171Yb+"
    mass_u: float = 170.936323
    hyperfine_hz: float = 12642812118.471
    g_electron: float = 2.0025
    g_nucleus: float = 0.9837
    # [trap]
    omega_z_hz: float = 108104.0
    omega_r_hz: float = 534400.0
    offset_field_t: float = 442.09e-6
    gradient_t_per_m: float = 19.07
    voltage_to_field: float = 8.2e-4
    # [pulse]
    rabi_hz: float = 640.0
    duration_s: float | str = "auto"          # auto -> pi pulse
    # [motion]
    nbar: float = 80.0
    eta: float | str = 0.026
    # [two_point]
    kappa: float = 0.8
    shots_per_side: int = 50
    # [timeline]
    rep_period_s: float = 0.02
    detection_error_bright: float = 0.0
    detection_error_dark: float = 0.0
    shot_order: str = "interleaved"
    # [drift]
    linear_rate_hz_per_s: float = 8.2
    random_walk_hz_per_rt_s: float = 0.0
    line_amplitude_hz: float = 0.0
    seed: int = 12345
    # [tracking]
    n_cycles: int = 128
    initial_nu0_hz: float | str = "auto"      # auto -> Breit-Rabi at offset field
    allan_taus_s: tuple[float, ...] = (2.0, 4.0, 8.0, 16.0, 32.0)
    variant: str = "standard"
    # [voltage_scan]
    scan_enabled: bool = False
    scan_voltages_v: tuple[float, ...] = (1.0, -1.0, 2.0, -2.0, 3.0, -3.0)
    scan_interleave_zero: bool = True
    # [lineshape]
    lineshape_nbar_values: tuple[float, ...] = (0.0, 20.0, 100.0)
    lineshape_detuning_min_rabi: float = -2.0
    lineshape_detuning_max_rabi: float = 2.0
    lineshape_n_points: int = 401
    # [sensitivity]
    durations_s: tuple[float, ...] = (2.0, 8.0, 32.0)
    offsets_rabi: tuple[float, ...] = (0.0, 0.3, 0.7)
    n_seeds: int = 200

    # ---- builders for the typed module objects -------------------------
    def species(self) -> IonSpecies:
        return IonSpecies(
            label=self.species_label,
            mass=self.mass_u * CODATA.atomic_mass_unit,
            hyperfine_constant=TWO_PI * self.hyperfine_hz,
            g_electron=self.g_electron,
            g_nucleus=self.g_nucleus,
        )

    def trap(self) -> TrapEnvironment:
        return TrapEnvironment(
            omega_z=TWO_PI * self.omega_z_hz,
            omega_r=TWO_PI * self.omega_r_hz,
            offset_field=self.offset_field_t,
            gradient=self.gradient_t_per_m,
            voltage_to_field=self.voltage_to_field,
        )

    def pulse(self) -> PulseSpec:
        rabi = TWO_PI * self.rabi_hz
        if self.duration_s == "auto":
            return PulseSpec.pi_pulse(rabi)
        return PulseSpec(rabi=rabi, duration=float(self.duration_s))

    def motion(self) -> MotionalModel:
        if self.eta == "auto":
            raise ConfigError("eta must be resolved before use")
        return MotionalModel(nbar=self.nbar, eta=float(self.eta))

    def two_point(self) -> TwoPointConfig:
        return TwoPointConfig(pulse=self.pulse(), motion=self.motion(),
                              kappa=self.kappa, shots_per_side=self.shots_per_side)

    def timeline(self) -> ExperimentTimeline:
        return ExperimentTimeline(
            rep_period=self.rep_period_s,
            shots_per_side=self.shots_per_side,
            detection_error_bright=self.detection_error_bright,
            detection_error_dark=self.detection_error_dark,
            shot_order=self.shot_order,
        )

    def drift(self) -> DriftModel:
        return DriftModel(
            linear_rate=TWO_PI * self.linear_rate_hz_per_s,
            random_walk=TWO_PI * self.random_walk_hz_per_rt_s,
            line_amplitude=TWO_PI * self.line_amplitude_hz,
            seed=self.seed,
        )

    def voltage_schedule(self) -> VoltageSchedule:
        return VoltageSchedule.from_voltages(self.scan_voltages_v,
                                             self.scan_interleave_zero)

    def initial_nu0(self) -> float:
        """Probe centre for the first tracking cycle, rad/s."""
        if self.initial_nu0_hz == "auto":
            raise ConfigError("initial_nu0_hz must be resolved before use")
        return TWO_PI * float(self.initial_nu0_hz)

    def resolved(self) -> "RunConfig":
        """Replace every `auto` with its computed value."""
        out = self
        if out.variant not in BREIT_RABI_VARIANTS:
            raise ConfigError(f"unknown variant {out.variant!r}")
        if out.rabi_hz <= 0.0:
            raise ConfigError("rabi_hz must be positive")
        try:
            if out.duration_s == "auto":
                out = replace(out, duration_s=math.pi / (TWO_PI * out.rabi_hz))
            if out.eta == "auto":
                out = replace(out, eta=compute_eta(out.trap(), out.species(),
                                                   variant=out.variant))
            if out.initial_nu0_hz == "auto":
                nu = transition_frequency(out.species(), out.offset_field_t,
                                          variant=out.variant)
                out = replace(out, initial_nu0_hz=nu / TWO_PI)
        except ConfigError:
            raise
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc)) from exc
        out.validate()
        return out

    def validate(self) -> None:
        """Construct every embedded object so its invariants run."""
        try:
            self.species()
            self.trap()
            self.two_point()
            self.timeline()
            self.drift()
            self.voltage_schedule()
            self.initial_nu0()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.variant not in BREIT_RABI_VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.shots_per_side < 1:
            raise ConfigError("shots_per_side must be at least 1")
        if self.n_cycles < 1:
            raise ConfigError("n_cycles must be at least 1")
        if self.n_seeds < 2:
            raise ConfigError("n_seeds must be at least 2")
        if self.lineshape_n_points < 2:
            raise ConfigError("lineshape_n_points must be at least 2")
        if self.lineshape_detuning_min_rabi >= self.lineshape_detuning_max_rabi:
            raise ConfigError("empty lineshape detuning range")
        for name in ("allan_taus_s", "durations_s"):
            if any(v <= 0.0 for v in getattr(self, name)):
                raise ConfigError(f"{name} values must be positive")
        if not self.lineshape_nbar_values:
            raise ConfigError("lineshape_nbar_values must not be empty")
        if any(v < 0.0 for v in self.lineshape_nbar_values):
            raise ConfigError("lineshape_nbar_values must be non-negative")
        if any(v < 0.0 for v in self.offsets_rabi):
            raise ConfigError("offsets_rabi must be non-negative")


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"not an integer: {text!r}") from exc


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_float_list(text: str) -> tuple[float, ...]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise ConfigError("empty list")
    return tuple(_parse_float(p) for p in parts)


def _parse_auto_or_float(text: str) -> float | str:
    return "auto" if text.strip().lower() == "auto" else _parse_float(text)


# section -> key -> (RunConfig field, parser)
_SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "species": {
        "label": ("species_label", str.strip),
        "mass_u": ("mass_u", _parse_float),
        "hyperfine_hz": ("hyperfine_hz", _parse_float),
        "g_electron": ("g_electron", _parse_float),
        "g_nucleus": ("g_nucleus", _parse_float),
    },
    "trap": {
        "omega_z_hz": ("omega_z_hz", _parse_float),
        "omega_r_hz": ("omega_r_hz", _parse_float),
        "offset_field_t": ("offset_field_t", _parse_float),
        "gradient_t_per_m": ("gradient_t_per_m", _parse_float),
        "voltage_to_field": ("voltage_to_field", _parse_float),
    },
    "pulse": {
        "rabi_hz": ("rabi_hz", _parse_float),
        "duration_s": ("duration_s", _parse_auto_or_float),
    },
    "motion": {
        "nbar": ("nbar", _parse_float),
        "eta": ("eta", _parse_auto_or_float),
    },
    "two_point": {
        "kappa": ("kappa", _parse_float),
        "shots_per_side": ("shots_per_side", _parse_int),
    },
    "timeline": {
        "rep_period_s": ("rep_period_s", _parse_float),
        "detection_error_bright": ("detection_error_bright", _parse_float),
        "detection_error_dark": ("detection_error_dark", _parse_float),
        "shot_order": ("shot_order", str.strip),
    },
    "drift": {
        "linear_rate_hz_per_s": ("linear_rate_hz_per_s", _parse_float),
        "random_walk_hz_per_rt_s": ("random_walk_hz_per_rt_s", _parse_float),
        "line_amplitude_hz": ("line_amplitude_hz", _parse_float),
        "seed": ("seed", _parse_int),
    },
    "tracking": {
        "n_cycles": ("n_cycles", _parse_int),
        "initial_nu0_hz": ("initial_nu0_hz", _parse_auto_or_float),
        "allan_taus_s": ("allan_taus_s", _parse_float_list),
        "variant": ("variant", str.strip),
    },
    "voltage_scan": {
        "enabled": ("scan_enabled", _parse_bool),
        "voltages_v": ("scan_voltages_v", _parse_float_list),
        "interleave_zero": ("scan_interleave_zero", _parse_bool),
    },
    "lineshape": {
        "nbar_values": ("lineshape_nbar_values", _parse_float_list),
        "detuning_min_rabi": ("lineshape_detuning_min_rabi", _parse_float),
        "detuning_max_rabi": ("lineshape_detuning_max_rabi", _parse_float),
        "n_points": ("lineshape_n_points", _parse_int),
    },
    "sensitivity": {
        "durations_s": ("durations_s", _parse_float_list),
        "offsets_rabi": ("offsets_rabi", _parse_float_list),
        "n_seeds": ("n_seeds", _parse_int),
    },
}


def default_config() -> RunConfig:
    """Compiled-in defaults, fully resolved."""
    return RunConfig().resolved()


def loads(text: str, seed: int | None = None) -> RunConfig:
    """Parse config text over the defaults; resolve and validate.

    Unknown sections or keys raise ConfigError.  `seed` overrides the
    [drift] seed after parsing (the --seed flag).
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    updates: dict[str, object] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            field_name, parse = _SCHEMA[section][key]
            try:
                updates[field_name] = parse(raw)
            except ConfigError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    cfg = replace(RunConfig(), **updates)
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    return cfg.resolved()


def load_config(path, seed: int | None = None) -> RunConfig:
    """Load a config file (or the defaults when path is None)."""
    if path is None:
        cfg = default_config()
        return cfg if seed is None else replace(cfg, seed=int(seed)).resolved()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return loads(text, seed=seed)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit(cfg: RunConfig) -> str:
    """Serialise a resolved config; loads(emit(cfg)) round-trips."""
    known_fields = {f.name for f in fields(RunConfig)}
    out = io.StringIO()
    for section, keys in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, (field_name, _parse) in keys.items():
            assert field_name in known_fields
            out.write(f"{key} = {_format_value(getattr(cfg, field_name))}\n")
        out.write("\n")
    return out.getvalue()
