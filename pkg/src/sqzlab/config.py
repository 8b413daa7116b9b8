"""Experiment configuration files.

INI-style sections with unit suffixes on every dimensional key::

    [cavity]      length_mm, refractive_index_1550, refractive_index_775,
                  reflectivity_{a,b}_{1550,775}, roc_{a,b}_mm ("planar" allowed),
                  internal_loss_{1550,775} (optional; default: crystal absorption
                  over one round trip)
    [crystal]     d_eff_pm_per_v, absorption_{1550,775}_ppm_per_cm,
                  waist_1550_um (optional; default: cavity eigenmode)
    [pump]        external_power_mw, mode_matching, threshold_w (optional)
    [detection]   escape_efficiency (optional; default: from cavity),
                  propagation_loss, visibility, quantum_efficiency
    [simulation]  f_min_hz, f_max_hz, bins, spacing (log|linear), output_dir
    [scenario NAME]   overrides applied on top of the base configuration
    [reference NAME]  squeezing_db, antisqueezing_db of a measured pair

Surface ``a`` is the pump input coupler, surface ``b`` the squeezed-light
output coupler.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .cavity import CavitySpec, SurfaceSpec
from .errors import ConfigError, SqzlabError
from .nonlinear import CrystalSpec
from .squeezing import DetectionChain

BUILTIN_PREFIX = "builtin:"

# scenario keys acting on the spectrum model rather than on the physical setup
MODEL_OVERRIDES = {"efficiency", "pump_ratio", "linewidth_hz"}


@dataclass(frozen=True)
class PumpConfig:
    external_power: float
    mode_matching: float
    threshold_override: Optional[float] = None


@dataclass(frozen=True)
class SimulationConfig:
    f_min: float = 1e6
    f_max: float = 3e9
    bins: int = 300
    spacing: str = "log"
    output_dir: Optional[str] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    overrides: dict


@dataclass(frozen=True)
class ReferenceMeasurement:
    name: str
    squeezing_db: float
    antisqueezing_db: float


@dataclass(frozen=True)
class ExperimentConfig:
    cavity: CavitySpec
    crystal: CrystalSpec
    pump: PumpConfig
    detection: DetectionChain
    simulation: SimulationConfig
    escape_from_cavity: bool = True
    waist_override: Optional[float] = None
    scenarios: tuple = ()
    references: tuple = ()
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False, compare=False)


def _get(section, key, cast=float, default=None, required=True):
    name = section.name
    if key not in section:
        if required and default is None:
            raise ConfigError(f"[{name}] missing required key '{key}'")
        return default
    raw = section[key]
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{name}] {key} = {raw!r} is not a valid {cast.__name__}") from None


def _roc(section, key):
    raw = section.get(key)
    if raw is None:
        raise ConfigError(f"[{section.name}] missing required key '{key}'")
    if raw.strip().lower() == "planar":
        return None
    try:
        return float(raw) * 1e-3
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is neither a number nor 'planar'") from None


def _section(parser, name):
    if not parser.has_section(name):
        raise ConfigError(f"missing section [{name}]")
    return parser[name]


def split_overrides(overrides):
    """Split ``key=value`` strings into (model overrides, dotted config overrides)."""
    model, dotted = {}, {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, value = item.partition("=")
        key, value = key.strip(), value.strip()
        if key in MODEL_OVERRIDES:
            try:
                model[key] = float(value)
            except ValueError:
                raise ConfigError(f"override {key} = {value!r} is not a number") from None
        elif "." in key:
            dotted[key] = value
        else:
            raise ConfigError(
                f"unknown override {key!r}: use one of {sorted(MODEL_OVERRIDES)} or section.key"
            )
    return model, dotted


def read_config_text(path) -> tuple:
    """Return ``(text, source label)``; ``builtin:NAME`` loads a bundled config."""
    path = str(path)
    if path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX):]
        try:
            text = resources.files("sqzlab.data").joinpath(f"{name}.ini").read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"no bundled config named {name!r}") from None
        return text, path
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    return p.read_text(encoding="utf-8"), path


def load_config(path, dotted_overrides=None) -> ExperimentConfig:
    text, source = read_config_text(path)
    return parse_config(text, dotted_overrides, source=source)


def parse_config(text, dotted_overrides=None, source="") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for key, value in (dotted_overrides or {}).items():
        section, _, option = key.partition(".")
        if not parser.has_section(section):
            raise ConfigError(f"override {key!r} names unknown section [{section}]")
        parser[section][option] = str(value)
    try:
        return _build(parser, source)
    except ConfigError:
        raise
    except SqzlabError as exc:
        raise ConfigError(str(exc)) from None


def _build(parser, source):
    cav, cry = _section(parser, "cavity"), _section(parser, "crystal")
    pump, det = _section(parser, "pump"), _section(parser, "detection")
    sim = parser["simulation"] if parser.has_section("simulation") else None

    length = _get(cav, "length_mm") * 1e-3
    n1, n2 = _get(cav, "refractive_index_1550"), _get(cav, "refractive_index_775")
    crystal = CrystalSpec(
        length=length,
        d_eff=_get(cry, "d_eff_pm_per_v") * 1e-12,
        absorption_1550=_get(cry, "absorption_1550_ppm_per_cm") * 1e-6 / 1e-2,
        absorption_775=_get(cry, "absorption_775_ppm_per_cm") * 1e-6 / 1e-2,
        refractive_index_1550=n1,
        refractive_index_775=n2,
    )
    cavity = CavitySpec(
        geometric_length=length,
        refractive_index_1550=n1,
        refractive_index_775=n2,
        surface_a=SurfaceSpec(_get(cav, "reflectivity_a_1550"), _get(cav, "reflectivity_a_775"), _roc(cav, "roc_a_mm")),
        surface_b=SurfaceSpec(_get(cav, "reflectivity_b_1550"), _get(cav, "reflectivity_b_775"), _roc(cav, "roc_b_mm")),
        internal_round_trip_loss_1550=_get(cav, "internal_loss_1550", default=crystal.double_pass_loss("1550")),
        internal_round_trip_loss_775=_get(cav, "internal_loss_775", default=crystal.double_pass_loss("775")),
    )

    threshold = _get(pump, "threshold_w", required=False)
    if threshold is not None and not threshold > 0:
        raise ConfigError(f"[pump] threshold_w must be positive, got {threshold!r}")
    external = _get(pump, "external_power_mw") * 1e-3
    if external < 0:
        raise ConfigError(f"[pump] external_power_mw must be non-negative, got {external * 1e3!r}")
    mode_matching = _get(pump, "mode_matching")
    if not 0 <= mode_matching <= 1:
        raise ConfigError(f"[pump] mode_matching must lie in [0, 1], got {mode_matching!r}")
    pump_cfg = PumpConfig(external, mode_matching, threshold)

    escape = _get(det, "escape_efficiency", required=False)
    detection = DetectionChain(
        escape_efficiency=1.0 if escape is None else escape,
        propagation_efficiency=1.0 - _get(det, "propagation_loss"),
        visibility=_get(det, "visibility"),
        photodiode_quantum_efficiency=_get(det, "quantum_efficiency"),
    )

    simulation = SimulationConfig()
    if sim is not None:
        simulation = SimulationConfig(
            f_min=_get(sim, "f_min_hz", default=simulation.f_min),
            f_max=_get(sim, "f_max_hz", default=simulation.f_max),
            bins=_get(sim, "bins", cast=int, default=simulation.bins),
            spacing=_get(sim, "spacing", cast=str, default=simulation.spacing),
            output_dir=_get(sim, "output_dir", cast=str, required=False),
        )
    _check_simulation(simulation)

    waist = _get(cry, "waist_1550_um", required=False)
    if waist is not None and not waist > 0:
        raise ConfigError(f"[crystal] waist_1550_um must be positive, got {waist!r}")

    scenarios, references = [], []
    for name in parser.sections():
        kind, _, label = name.partition(" ")
        if kind == "scenario":
            scenarios.append(Scenario(label.strip(), dict(parser[name])))
        elif kind == "reference":
            sec = parser[name]
            references.append(ReferenceMeasurement(label.strip(), _get(sec, "squeezing_db"), _get(sec, "antisqueezing_db")))
    for sc in scenarios:
        split_overrides(f"{k}={v}" for k, v in sc.overrides.items())

    return ExperimentConfig(
        cavity=cavity,
        crystal=crystal,
        pump=pump_cfg,
        detection=detection,
        simulation=simulation,
        escape_from_cavity=escape is None,
        waist_override=None if waist is None else waist * 1e-6,
        scenarios=tuple(scenarios),
        references=tuple(references),
        source=source,
        raw={s: dict(parser[s]) for s in parser.sections()},
    )


def _check_simulation(sim: SimulationConfig):
    if not sim.f_min > 0:
        raise ConfigError(f"[simulation] f_min_hz must be positive, got {sim.f_min!r}")
    if sim.bins < 1:
        raise ConfigError(f"[simulation] bins must be >= 1, got {sim.bins!r}")
    if sim.bins > 1 and not sim.f_max > sim.f_min:
        raise ConfigError("[simulation] frequency range must be ascending (f_max_hz > f_min_hz)")
    if sim.spacing not in ("log", "linear"):
        raise ConfigError(f"[simulation] spacing must be 'log' or 'linear', got {sim.spacing!r}")


def config_with_overrides(config: ExperimentConfig, dotted: dict) -> ExperimentConfig:
    """Rebuild a configuration with ``section.key`` overrides applied."""
    if not dotted:
        return config
    parser = configparser.ConfigParser()
    parser.read_dict(config.raw)
    for key, value in dotted.items():
        section, _, option = key.partition(".")
        if not parser.has_section(section):
            raise ConfigError(f"override {key!r} names unknown section [{section}]")
        parser[section][option] = str(value)
    try:
        return _build(parser, config.source)
    except ConfigError:
        raise
    except SqzlabError as exc:
        raise ConfigError(str(exc)) from None
