"""Derived figures for a configured source, shared by the CLI commands."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import cavity, nonlinear
from .config import ExperimentConfig, SimulationConfig, config_with_overrides, split_overrides
from .errors import ConfigError
from .squeezing import quadrature_variances, to_db, total_efficiency


@dataclass(frozen=True)
class ModelParameters:
    pump_ratio: float
    efficiency: float
    linewidth: float


@dataclass(frozen=True)
class Design:
    fundamental: cavity.CavityFigures
    pump_cavity: cavity.CavityFigures
    eigenmode_waist_1550: float
    waist_1550: float
    harmonic_waist: float
    focusing_parameter: float
    single_pass_efficiency: float
    round_trip_amplitude_loss: float
    threshold_first_principles: float
    threshold_used: float
    external_pump: float
    circulating_pump: float
    escape_efficiency: float
    total_efficiency: float
    parameters: ModelParameters
    squeezing_db_zero: float
    antisqueezing_db_zero: float

    def rows(self):
        """``(key, value, unit, relation)`` tuples in report order."""
        f, p = self.fundamental, self.pump_cavity
        return [
            ("fsr_1550", f.fsr, "Hz", "c / (2 n L)"),
            ("finesse_1550", f.finesse, "", "pi sqrt(rho) / (1 - rho), rho = sqrt(Ra Rb (1 - Lint))"),
            ("linewidth_fwhm_1550", f.linewidth_fwhm, "Hz", "FSR / finesse"),
            ("escape_efficiency", self.escape_efficiency, "", "T_out / (T_out + L_int)"),
            ("fsr_775", p.fsr, "Hz", "c / (2 n L)"),
            ("finesse_775", p.finesse, "", "pi sqrt(rho) / (1 - rho)"),
            ("linewidth_fwhm_775", p.linewidth_fwhm, "Hz", "FSR / finesse"),
            ("pump_buildup", p.buildup, "", "mode_matching T_in / (1 - rho)^2"),
            ("eigenmode_waist_1550", self.eigenmode_waist_1550, "m", "round-trip ray-matrix eigenmode"),
            ("waist_1550_used", self.waist_1550, "m", "configured or eigenmode"),
            ("harmonic_waist_775", self.harmonic_waist, "m", "w_1550 / sqrt(2)"),
            ("focusing_parameter", self.focusing_parameter, "", "L / (2 z_R)"),
            ("single_pass_efficiency", self.single_pass_efficiency, "1/W",
             "2 w^2 d^2 k1 L h / (pi n1^2 n2 eps0 c^3)"),
            ("round_trip_amplitude_loss", self.round_trip_amplitude_loss, "", "1 - sqrt(Ra Rb (1 - Lint))"),
            ("threshold_first_principles", self.threshold_first_principles, "W", "rho^2 / (4 E_NL)"),
            ("threshold_used", self.threshold_used, "W", "configured threshold_w or first principles"),
            ("external_pump", self.external_pump, "W", "configured"),
            ("circulating_pump", self.circulating_pump, "W", "external x buildup"),
            ("pump_ratio", self.parameters.pump_ratio, "", "sqrt(P_circ / P_th)"),
            ("total_efficiency", self.total_efficiency, "", "escape (1 - L) beta^2 QE"),
            ("squeezing_db_zero", self.squeezing_db_zero, "dB", "10 log10 S_minus(0)"),
            ("antisqueezing_db_zero", self.antisqueezing_db_zero, "dB", "10 log10 S_plus(0)"),
        ]


def design(config: ExperimentConfig) -> Design:
    cav = config.cavity
    fundamental = cavity.analyze(cav, "1550", coupler="b")
    pump_cav = cavity.analyze(cav, "775", coupler="a", mode_matching=config.pump.mode_matching)
    waist = config.waist_override or fundamental.waist_radius
    xi = nonlinear.focusing_parameter(
        config.crystal.length, waist, cavity.FUNDAMENTAL_WAVELENGTH, config.crystal.refractive_index_1550
    )
    e_nl = nonlinear.single_pass_efficiency(config.crystal, waist)
    rho = nonlinear.round_trip_amplitude_loss(
        cav.surface_a.power_reflectivity_1550, cav.surface_b.power_reflectivity_1550, cav.internal_round_trip_loss_1550
    )
    p_th = nonlinear.opa_threshold(e_nl, rho) if e_nl > 0 else float("inf")
    p_used = config.pump.threshold_override or p_th
    circulating = config.pump.external_power * pump_cav.buildup
    x = nonlinear.pump_ratio(circulating, p_used)

    chain = config.detection
    if config.escape_from_cavity:
        chain = replace(chain, escape_efficiency=fundamental.escape_efficiency)
    eta = total_efficiency(chain)
    params = ModelParameters(x, eta, fundamental.linewidth_fwhm)
    s_minus, s_plus = quadrature_variances(x, eta, params.linewidth, 0.0)
    return Design(
        fundamental=fundamental,
        pump_cavity=pump_cav,
        eigenmode_waist_1550=fundamental.waist_radius,
        waist_1550=waist,
        harmonic_waist=float(cavity.harmonic_waist(waist)),
        focusing_parameter=float(xi),
        single_pass_efficiency=e_nl,
        round_trip_amplitude_loss=rho,
        threshold_first_principles=p_th,
        threshold_used=p_used,
        external_pump=config.pump.external_power,
        circulating_pump=circulating,
        escape_efficiency=chain.escape_efficiency,
        total_efficiency=eta,
        parameters=params,
        squeezing_db_zero=to_db(s_minus),
        antisqueezing_db_zero=to_db(s_plus),
    )


def scenario_parameters(config: ExperimentConfig, overrides: dict) -> ModelParameters:
    """Model parameters after applying scenario or command-line overrides."""
    model, dotted = split_overrides(f"{k}={v}" for k, v in overrides.items())
    base = design(config_with_overrides(config, dotted)).parameters
    params = ModelParameters(
        pump_ratio=model.get("pump_ratio", base.pump_ratio),
        efficiency=model.get("efficiency", base.efficiency),
        linewidth=model.get("linewidth_hz", base.linewidth),
    )
    # validates x < 1, efficiency range and linewidth sign
    quadrature_variances(params.pump_ratio, params.efficiency, params.linewidth, 0.0)
    return params


def frequency_grid(sim: SimulationConfig):
    if sim.bins == 1:
        return np.array([sim.f_min])
    if sim.spacing == "log":
        return np.geomspace(sim.f_min, sim.f_max, sim.bins)
    if sim.spacing == "linear":
        return np.linspace(sim.f_min, sim.f_max, sim.bins)
    raise ConfigError(f"unknown spacing {sim.spacing!r}")
