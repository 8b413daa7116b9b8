"""Boyd-Kleinman conversion efficiency and OPA threshold.

Threshold convention: oscillation starts when the round-trip parametric
amplitude gain ``2 * sqrt(E_NL * P)`` equals the fundamental round-trip
amplitude loss ``rho = 1 - sqrt(R_a * R_b * (1 - L_int))``, so
``P_th = rho**2 / (4 * E_NL)`` with ``E_NL`` the single-pass harmonic
conversion efficiency in 1/W.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from .cavity import FUNDAMENTAL_WAVELENGTH, round_trip_factor
from .errors import AboveThresholdError, SqzlabError

QUAD_TOLERANCE = 1e-11


@dataclass(frozen=True)
class CrystalSpec:
    """Nonlinear medium. Absorption coefficients are in 1/m."""

    length: float
    d_eff: float
    absorption_1550: float
    absorption_775: float
    refractive_index_1550: float
    refractive_index_775: float

    def __post_init__(self):
        if not self.length > 0:
            raise SqzlabError(f"crystal length must be positive, got {self.length!r}")
        for name in ("d_eff", "absorption_1550", "absorption_775"):
            value = getattr(self, name)
            if not value >= 0:
                raise SqzlabError(f"{name} must be non-negative, got {value!r}")
        for name in ("refractive_index_1550", "refractive_index_775"):
            value = getattr(self, name)
            if not value >= 1:
                raise SqzlabError(f"{name} must be >= 1, got {value!r}")

    def double_pass_loss(self, band: str) -> float:
        """Fractional power absorbed over one cavity round trip."""
        alpha = getattr(self, f"absorption_{band}")
        return float(-np.expm1(-2.0 * alpha * self.length))


@dataclass(frozen=True)
class ThresholdReport:
    single_pass_efficiency: float
    round_trip_amplitude_loss: float
    threshold_power_intracavity: float
    pump_ratio_x: float
    circulating_pump: float = 0.0


def _check_xi(xi):
    if not xi > 0:
        raise SqzlabError(f"focusing parameter xi must be positive, got {xi!r}")


def _bk_integral(sigma, xi, tol):
    # e^{i s t} / (1 + i t) = e^{i s t} (1 - i t) / (1 + t^2)
    def re(t):
        return (np.cos(sigma * t) + t * np.sin(sigma * t)) / (1.0 + t * t)

    def im(t):
        return (np.sin(sigma * t) - t * np.cos(sigma * t)) / (1.0 + t * t)

    opts = dict(epsabs=tol, epsrel=tol, limit=500)
    return complex(quad(re, -xi, xi, **opts)[0], quad(im, -xi, xi, **opts)[0])


def boyd_kleinman_h(sigma, xi, tol=QUAD_TOLERANCE):
    """Focusing factor ``|int_{-xi}^{xi} exp(i sigma t) / (1 + i t) dt|^2 / (4 xi)``."""
    _check_xi(xi)
    return abs(_bk_integral(sigma, xi, tol)) ** 2 / (4.0 * xi)


def optimal_sigma(xi, tol=QUAD_TOLERANCE):
    """Phase mismatch maximising ``h`` at fixed ``xi``; returns ``(sigma, h)``.

    A coarse scan brackets the main lobe before a bounded Brent refinement,
    so sidelobes of the sinc-like response cannot capture the search.
    """
    _check_xi(xi)
    # main lobe lies within |sigma| < pi / xi + 1
    span = np.pi / xi + 1.0
    grid = np.linspace(-span, span, 161)
    values = [boyd_kleinman_h(s, xi, tol=1e-9) for s in grid]
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(
        lambda s: -boyd_kleinman_h(s, xi, tol),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x), float(-res.fun)


def focusing_parameter(length, waist_radius, wavelength, refractive_index):
    """``xi = L / b`` with confocal parameter ``b = 2 * pi * n * w0^2 / lambda``."""
    if not waist_radius > 0:
        raise SqzlabError(f"waist radius must be positive, got {waist_radius!r}")
    rayleigh = np.pi * refractive_index * waist_radius**2 / wavelength
    return length / (2.0 * rayleigh)


def single_pass_efficiency(crystal: CrystalSpec, waist_radius, fundamental_wavelength=FUNDAMENTAL_WAVELENGTH, sigma=None):
    """Harmonic conversion efficiency ``P_2w / P_w**2`` in 1/W.

    ``sigma=None`` uses the optimal phase mismatch.
    """
    n1, n2 = crystal.refractive_index_1550, crystal.refractive_index_775
    xi = focusing_parameter(crystal.length, waist_radius, fundamental_wavelength, n1)
    h = optimal_sigma(xi)[1] if sigma is None else boyd_kleinman_h(sigma, xi)
    omega = 2.0 * np.pi * constants.c / fundamental_wavelength
    k1 = 2.0 * np.pi * n1 / fundamental_wavelength
    num = 2.0 * omega**2 * crystal.d_eff**2 * k1 * crystal.length * h
    den = np.pi * n1**2 * n2 * constants.epsilon_0 * constants.c**3
    return float(num / den)


def round_trip_amplitude_loss(r_a, r_b, internal_loss=0.0):
    return 1.0 - round_trip_factor(r_a, r_b, internal_loss)


def opa_threshold(single_pass_efficiency, round_trip_amplitude_loss):
    """Circulating pump power at threshold, in W."""
    if not single_pass_efficiency > 0:
        raise SqzlabError("single-pass efficiency must be positive to define a threshold")
    if not round_trip_amplitude_loss > 0:
        raise SqzlabError("round-trip amplitude loss must be positive")
    return round_trip_amplitude_loss**2 / (4.0 * single_pass_efficiency)


def pump_ratio(circulating_pump, threshold):
    """``x = sqrt(P / P_th)``; at or above threshold raises."""
    if not threshold > 0:
        raise SqzlabError(f"threshold must be positive, got {threshold!r}")
    if circulating_pump < 0:
        raise SqzlabError(f"pump power must be non-negative, got {circulating_pump!r}")
    if circulating_pump >= threshold:
        raise AboveThresholdError(
            f"circulating pump {circulating_pump:.6g} W is at or above threshold {threshold:.6g} W"
        )
    return float(np.sqrt(circulating_pump / threshold))


def threshold_report(crystal, waist_radius, r_a, r_b, internal_loss, circulating_pump=0.0, threshold_override=None):
    """Assemble efficiency, loss, threshold and pump ratio.

    ``threshold_override`` replaces the computed threshold when deriving the
    pump ratio; ``threshold_power_intracavity`` always holds the one used.
    """
    e_nl = single_pass_efficiency(crystal, waist_radius)
    rho = round_trip_amplitude_loss(r_a, r_b, internal_loss)
    p_th = opa_threshold(e_nl, rho) if threshold_override is None else float(threshold_override)
    return ThresholdReport(
        single_pass_efficiency=e_nl,
        round_trip_amplitude_loss=rho,
        threshold_power_intracavity=p_th,
        pump_ratio_x=pump_ratio(circulating_pump, p_th),
        circulating_pump=circulating_pump,
    )
