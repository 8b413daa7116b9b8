"""Shot-noise normalised quadrature spectra of a below-threshold OPA.

Variances are linear with vacuum (shot) noise equal to 1. For pump ratio
``x``, detection efficiency ``eta`` and cavity half-width ``gamma`` (half the
FWHM linewidth, ordinary frequency)::

    S_minus(f) = 1 - eta * 4x / ((1 + x)^2 + (f / gamma)^2)
    S_plus(f)  = 1 + eta * 4x / ((1 - x)^2 + (f / gamma)^2)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AboveThresholdError, SqzlabError


@dataclass(frozen=True)
class DetectionChain:
    escape_efficiency: float = 1.0
    propagation_efficiency: float = 1.0
    visibility: float = 1.0
    photodiode_quantum_efficiency: float = 1.0

    def __post_init__(self):
        for name in ("escape_efficiency", "propagation_efficiency", "visibility", "photodiode_quantum_efficiency"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SqzlabError(f"{name} must lie in [0, 1], got {value!r}")


def total_efficiency(chain: DetectionChain) -> float:
    """Escape x propagation x visibility^2 x photodiode quantum efficiency."""
    return (
        chain.escape_efficiency
        * chain.propagation_efficiency
        * chain.visibility**2
        * chain.photodiode_quantum_efficiency
    )


@dataclass(frozen=True)
class SqueezingSpectrum:
    frequencies: np.ndarray
    squeezed_variance: np.ndarray
    antisqueezed_variance: np.ndarray
    pump_ratio: float
    total_efficiency: float
    linewidth_fwhm: float

    def __post_init__(self):
        f = self.frequencies
        if f.ndim != 1 or f.size == 0:
            raise SqzlabError("frequency grid must be a non-empty 1-D array")
        if np.any(np.diff(f) <= 0):
            raise SqzlabError("frequency grid must be strictly increasing")

    @property
    def squeezed_db(self):
        return to_db(self.squeezed_variance)

    @property
    def antisqueezed_db(self):
        return to_db(self.antisqueezed_variance)


def _check_model_parameters(x, efficiency, linewidth):
    if not 0.0 <= x:
        raise SqzlabError(f"pump ratio must be non-negative, got {x!r}")
    if x >= 1.0:
        raise AboveThresholdError(f"pump ratio {x!r} is at or above threshold (x >= 1)")
    if not 0.0 <= efficiency <= 1.0:
        raise SqzlabError(f"efficiency must lie in [0, 1], got {efficiency!r}")
    if not linewidth > 0:
        raise SqzlabError(f"linewidth must be positive, got {linewidth!r}")


def quadrature_variances(x, efficiency, linewidth_fwhm, frequencies):
    """Return ``(S_minus, S_plus)`` arrays for an arbitrary frequency array."""
    _check_model_parameters(x, efficiency, linewidth_fwhm)
    f = np.asarray(frequencies, dtype=float)
    detuning = (f / (0.5 * linewidth_fwhm)) ** 2
    gain = 4.0 * x * efficiency
    s_minus = 1.0 - gain / ((1.0 + x) ** 2 + detuning)
    s_plus = 1.0 + gain / ((1.0 - x) ** 2 + detuning)
    return s_minus, s_plus


def quadrature_spectrum(x, total_efficiency, linewidth_fwhm, frequencies) -> SqueezingSpectrum:
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    s_minus, s_plus = quadrature_variances(x, total_efficiency, linewidth_fwhm, f)
    return SqueezingSpectrum(
        frequencies=f,
        squeezed_variance=s_minus,
        antisqueezed_variance=s_plus,
        pump_ratio=float(x),
        total_efficiency=float(total_efficiency),
        linewidth_fwhm=float(linewidth_fwhm),
    )


def to_db(linear):
    arr = np.asarray(linear, dtype=float)
    if np.any(~(arr > 0)):
        raise SqzlabError("decibel conversion needs strictly positive values")
    out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


def from_db(db):
    out = 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def dark_noise_correct(raw, dark, shot):
    """Subtract the electronic floor from both traces, then normalise to shot."""
    raw, dark, shot = (np.asarray(v, dtype=float) for v in (raw, dark, shot))
    if np.any(dark < 0):
        raise SqzlabError("dark noise must be non-negative")
    if np.any(shot <= dark):
        raise SqzlabError("shot noise must exceed dark noise (no clearance)")
    if np.any(raw <= dark):
        raise SqzlabError("measured noise at or below dark noise is unphysical")
    out = (raw - dark) / (shot - dark)
    return float(out) if out.ndim == 0 else out


def clearance(shot, dark):
    """Shot-to-dark ratio in dB; ``inf`` when ``dark`` is zero."""
    shot, dark = np.asarray(shot, dtype=float), np.asarray(dark, dtype=float)
    if np.any(shot <= 0) or np.any(dark < 0):
        raise SqzlabError("clearance needs positive shot and non-negative dark noise")
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(shot / dark)
    return float(out) if out.ndim == 0 else out
