"""Two-mirror standing-wave resonator figures.

All quantities are SI. Reflectivities are power reflectivities. A radius of
curvature of ``None`` marks a planar surface; positive radii are concave
toward the cavity interior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.constants import c as C_LIGHT

from .errors import SqzlabError, UnstableCavityError

FUNDAMENTAL_WAVELENGTH = 1550e-9
HARMONIC_WAVELENGTH = 775e-9

BANDS = {"1550": FUNDAMENTAL_WAVELENGTH, "775": HARMONIC_WAVELENGTH}


def _check_fraction(name, value, upper_open=False):
    if not np.isfinite(value) or value < 0 or value > 1 or (upper_open and value >= 1):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise SqzlabError(f"{name} must lie in {bound}, got {value!r}")


@dataclass(frozen=True)
class SurfaceSpec:
    power_reflectivity_1550: float
    power_reflectivity_775: float
    radius_of_curvature: Optional[float] = None

    def __post_init__(self):
        _check_fraction("power_reflectivity_1550", self.power_reflectivity_1550)
        _check_fraction("power_reflectivity_775", self.power_reflectivity_775)
        if self.radius_of_curvature is not None and not self.radius_of_curvature > 0:
            raise SqzlabError(
                f"radius_of_curvature must be positive or None (planar), "
                f"got {self.radius_of_curvature!r}"
            )

    def reflectivity(self, band: str) -> float:
        return getattr(self, f"power_reflectivity_{band}")


@dataclass(frozen=True)
class CavitySpec:
    """Monolithic resonator: a crystal with coated, curved end faces.

    ``internal_round_trip_loss_*`` is loss inside the medium (absorption,
    scatter). Mirror transmission is carried by the surface reflectivities
    and must not be counted again here.
    """

    geometric_length: float
    refractive_index_1550: float
    refractive_index_775: float
    surface_a: SurfaceSpec
    surface_b: SurfaceSpec
    internal_round_trip_loss_1550: float = 0.0
    internal_round_trip_loss_775: float = 0.0

    def __post_init__(self):
        if not self.geometric_length > 0:
            raise SqzlabError(f"geometric_length must be positive, got {self.geometric_length!r}")
        for band in BANDS:
            n = getattr(self, f"refractive_index_{band}")
            if not n >= 1:
                raise SqzlabError(f"refractive_index_{band} must be >= 1, got {n!r}")
            _check_fraction(
                f"internal_round_trip_loss_{band}",
                getattr(self, f"internal_round_trip_loss_{band}"),
                upper_open=True,
            )

    def refractive_index(self, band: str) -> float:
        return getattr(self, f"refractive_index_{band}")

    def internal_loss(self, band: str) -> float:
        return getattr(self, f"internal_round_trip_loss_{band}")


@dataclass(frozen=True)
class CavityFigures:
    fsr: float
    finesse: float
    linewidth_fwhm: float
    escape_efficiency: float
    buildup: float
    waist_radius: float


def round_trip_factor(r_a, r_b, internal_loss=0.0):
    """Amplitude surviving one round trip, ``sqrt(r_a * r_b * (1 - loss))``."""
    _check_fraction("r_a", r_a)
    _check_fraction("r_b", r_b)
    _check_fraction("internal_loss", internal_loss, upper_open=True)
    return float(np.sqrt(r_a * r_b * (1.0 - internal_loss)))


def _open_round_trip_factor(r_a, r_b, internal_loss):
    rho = round_trip_factor(r_a, r_b, internal_loss)
    if rho >= 1.0:
        raise SqzlabError("lossless closed cavity (round-trip factor 1): finesse diverges")
    return rho


def finesse(r_a, r_b, internal_loss=0.0):
    """Coefficient-of-finesse approximation ``pi * sqrt(rho) / (1 - rho)``."""
    rho = _open_round_trip_factor(r_a, r_b, internal_loss)
    return float(np.pi * np.sqrt(rho) / (1.0 - rho))


def fsr(geometric_length, refractive_index):
    """Free spectral range of a linear cavity in Hz."""
    if not geometric_length > 0:
        raise SqzlabError(f"cavity length must be positive, got {geometric_length!r}")
    if not refractive_index >= 1:
        raise SqzlabError(f"refractive index must be >= 1, got {refractive_index!r}")
    return C_LIGHT / (2.0 * refractive_index * geometric_length)


def linewidth_fwhm(fsr, finesse):
    if not finesse > 0:
        raise SqzlabError(f"finesse must be positive, got {finesse!r}")
    return fsr / finesse


def airy_intracavity(round_trip_phase, input_transmission, r_a, r_b, internal_loss=0.0):
    """Circulating power relative to the incident power.

    Vectorised over ``round_trip_phase``.
    """
    _check_fraction("input_transmission", input_transmission)
    rho = _open_round_trip_factor(r_a, r_b, internal_loss)
    phase = np.asarray(round_trip_phase, dtype=float)
    out = input_transmission / np.abs(1.0 - rho * np.exp(1j * phase)) ** 2
    return float(out) if out.ndim == 0 else out


def buildup(input_transmission, r_a, r_b, internal_loss=0.0, mode_matching=1.0):
    """On-resonance power enhancement for a partially mode-matched input."""
    _check_fraction("mode_matching", mode_matching)
    return mode_matching * airy_intracavity(0.0, input_transmission, r_a, r_b, internal_loss)


def escape_efficiency(output_transmission, internal_round_trip_loss):
    """Fraction of intracavity loss leaving through the output coupler."""
    _check_fraction("output_transmission", output_transmission)
    _check_fraction("internal_round_trip_loss", internal_round_trip_loss)
    total = output_transmission + internal_round_trip_loss
    if total <= 0:
        raise SqzlabError("escape efficiency undefined: no output transmission and no internal loss")
    return output_transmission / total


def stability_parameters(geometric_length, roc_a, roc_b):
    """Return ``(g_a, g_b)`` with ``g = 1 - L / roc``; planar surfaces give 1."""
    g_a = 1.0 if roc_a is None else 1.0 - geometric_length / roc_a
    g_b = 1.0 if roc_b is None else 1.0 - geometric_length / roc_b
    return g_a, g_b


def _mirror(roc):
    return np.array([[1.0, 0.0], [0.0 if roc is None else -2.0 / roc, 1.0]])


def _space(length):
    return np.array([[1.0, length], [0.0, 1.0]])


def eigenmode_waist(geometric_length, roc_a, roc_b, refractive_index, wavelength):
    """Waist radius of the fundamental Gaussian eigenmode.

    Found from the round-trip ray matrix referenced just after surface a.
    The surfaces act as mirrors inside the medium, so propagation uses the
    physical length and the wavelength is reduced by the index.
    """
    if not geometric_length > 0:
        raise SqzlabError(f"cavity length must be positive, got {geometric_length!r}")
    g_a, g_b = stability_parameters(geometric_length, roc_a, roc_b)
    product = g_a * g_b
    m = _mirror(roc_a) @ _space(geometric_length) @ _mirror(roc_b) @ _space(geometric_length)
    (a, b), (c, d) = m
    half_trace = 0.5 * (a + d)
    if not (0.0 < product < 1.0) or abs(half_trace) >= 1.0:
        raise UnstableCavityError(
            f"no stable eigenmode: g_a*g_b = {product:.6g} (need 0 < g_a*g_b < 1), "
            f"g_a = {g_a:.6g}, g_b = {g_b:.6g}"
        )
    inv_q = complex((d - a) / (2.0 * b), -np.sqrt(1.0 - half_trace**2) / abs(b))
    rayleigh_range = (1.0 / inv_q).imag
    reduced_wavelength = wavelength / refractive_index
    return float(np.sqrt(rayleigh_range * reduced_wavelength / np.pi))


def harmonic_waist(fundamental_waist):
    """Pump waist with the same confocal parameter as the fundamental."""
    return fundamental_waist / np.sqrt(2.0)


def analyze(spec: CavitySpec, band: str = "1550", coupler: str = "b", mode_matching: float = 1.0) -> CavityFigures:
    """Resonator figures in one band, with ``coupler`` the surface light enters and leaves by.

    Escape efficiency and build-up count the other surface's transmission as
    internal loss alongside the medium loss.
    """
    if band not in BANDS:
        raise SqzlabError(f"unknown band {band!r}; expected one of {sorted(BANDS)}")
    if coupler not in ("a", "b"):
        raise SqzlabError(f"coupler must be 'a' or 'b', got {coupler!r}")
    r_a = spec.surface_a.reflectivity(band)
    r_b = spec.surface_b.reflectivity(band)
    loss = spec.internal_loss(band)
    r_c, r_other = (r_a, r_b) if coupler == "a" else (r_b, r_a)

    f = fsr(spec.geometric_length, spec.refractive_index(band))
    fin = finesse(r_a, r_b, loss)
    return CavityFigures(
        fsr=f,
        finesse=fin,
        linewidth_fwhm=linewidth_fwhm(f, fin),
        escape_efficiency=escape_efficiency(1.0 - r_c, (1.0 - r_other) + loss),
        buildup=buildup(1.0 - r_c, r_a, r_b, loss, mode_matching),
        waist_radius=eigenmode_waist(
            spec.geometric_length,
            spec.surface_a.radius_of_curvature,
            spec.surface_b.radius_of_curvature,
            spec.refractive_index(band),
            BANDS[band],
        ),
    )
