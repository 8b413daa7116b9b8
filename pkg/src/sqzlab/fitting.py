"""Recover efficiency, pump ratio and linewidth from measured spectra.

Residuals are model minus observation in dB. The optimiser is a
Levenberg-Marquardt loop over unconstrained coordinates (scaled logistic for
bounded parameters, shifted log for half-bounded ones) with a central
finite-difference Jacobian.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import SqzlabError
from .squeezing import from_db, quadrature_variances, to_db

PARAMETERS = ("efficiency", "pump_ratio", "linewidth")
QUADRATURES = ("squeezed", "antisqueezed")

DEFAULT_BOUNDS = {
    "efficiency": (0.0, 1.0),
    "pump_ratio": (0.0, 1.0),
    "linewidth": (0.0, np.inf),
}


@dataclass(frozen=True)
class Observation:
    frequency: float
    quadrature: str
    variance: float

    def __post_init__(self):
        if self.quadrature not in QUADRATURES:
            raise SqzlabError(f"quadrature must be one of {QUADRATURES}, got {self.quadrature!r}")
        if not self.variance > 0:
            raise SqzlabError(f"observed variance must be positive, got {self.variance!r}")
        if not self.frequency >= 0:
            raise SqzlabError(f"frequency must be non-negative, got {self.frequency!r}")


@dataclass
class FitProblem:
    observations: Sequence[Observation]
    free_parameters: Sequence[str] = ("efficiency", "pump_ratio")
    fixed_values: Mapping[str, float] = field(default_factory=dict)
    bounds: Mapping[str, tuple] = field(default_factory=dict)
    masks: Sequence[tuple] = ()

    def __post_init__(self):
        self.free_parameters = tuple(p for p in PARAMETERS if p in set(self.free_parameters))
        unknown = set(self.fixed_values) - set(PARAMETERS)
        if unknown:
            raise SqzlabError(f"unknown parameters: {sorted(unknown)}")
        missing = [p for p in PARAMETERS if p not in self.free_parameters and p not in self.fixed_values]
        if missing:
            raise SqzlabError(f"parameters neither free nor fixed: {missing}")
        merged = dict(DEFAULT_BOUNDS)
        for name, (lo, hi) in self.bounds.items():
            d_lo, d_hi = DEFAULT_BOUNDS[name]
            if lo < d_lo or hi > d_hi or not lo < hi:
                raise SqzlabError(f"bounds for {name} must lie within [{d_lo}, {d_hi}] and be ordered")
            merged[name] = (float(lo), float(hi))
        self.bounds = merged
        for lo, hi in self.masks:
            if not lo <= hi:
                raise SqzlabError(f"mask ({lo}, {hi}) is not ordered")
        if len(self.used_observations()) < len(self.free_parameters):
            raise SqzlabError("fewer unmasked observations than free parameters")

    def used_observations(self):
        """Unmasked observations in canonical order (frequency, quadrature, value)."""
        kept = [o for o in self.observations if not any(lo <= o.frequency <= hi for lo, hi in self.masks)]
        return sorted(kept, key=lambda o: (o.frequency, o.quadrature, o.variance))


@dataclass
class FitResult:
    estimates: dict
    rms_db: float
    iterations: int
    converged: bool
    cost_history: list
    n_observations: int
    n_masked: int
    message: str = ""


def invert_zero_frequency(squeezed_db, antisqueezed_db):
    """Solve the zero-frequency pair for ``(efficiency, pump_ratio)``.

    ``squeezed_db`` is the (negative) squeezed level relative to shot noise.
    """
    if not squeezed_db < 0 < antisqueezed_db:
        raise SqzlabError(
            f"need squeezed < 0 dB < anti-squeezed, got ({squeezed_db}, {antisqueezed_db}); "
            "with no squeezing the efficiency is indeterminate"
        )
    a = 1.0 - from_db(squeezed_db)
    b = from_db(antisqueezed_db) - 1.0
    k = np.sqrt(a / b)
    x = (1.0 - k) / (1.0 + k)
    eta = b * (1.0 - x) ** 2 / (4.0 * x)
    if not 0 < x < 1 or eta > 1.0:
        raise SqzlabError(
            f"pair ({squeezed_db} dB, {antisqueezed_db} dB) is non-physical: "
            f"implies efficiency {eta:.6g}, pump ratio {x:.6g}"
        )
    return float(eta), float(x)


def _observation_arrays(observations):
    freq = np.array([o.frequency for o in observations], dtype=float)
    squeezed = np.array([o.quadrature == "squeezed" for o in observations])
    obs_db = to_db(np.array([o.variance for o in observations], dtype=float))
    return freq, squeezed, np.atleast_1d(obs_db)


def _model_db(params, freq, squeezed):
    s_minus, s_plus = quadrature_variances(params["pump_ratio"], params["efficiency"], params["linewidth"], freq)
    return 10.0 * np.log10(np.where(squeezed, s_minus, s_plus))


def residuals(parameters: Mapping[str, float], observations: Sequence[Observation]):
    """Model minus observation, in dB, one entry per observation."""
    freq, squeezed, obs_db = _observation_arrays(observations)
    return _model_db(parameters, freq, squeezed) - obs_db


def _to_unbounded(value, lo, hi):
    if np.isinf(hi):
        return np.log(value - lo)
    t = (value - lo) / (hi - lo)
    return np.log(t / (1.0 - t))


def _from_unbounded(u, lo, hi):
    if np.isinf(hi):
        return lo + np.exp(np.clip(u, -700.0, 700.0))
    # beyond |u| = 30 the logistic rounds to the bound itself, which the model rejects
    return lo + (hi - lo) * expit(np.clip(u, -30.0, 30.0))


def _interior(value, lo, hi):
    if np.isinf(hi):
        return max(value, lo + 1e-12 * max(abs(lo), 1.0))
    margin = 1e-6 * (hi - lo)
    return min(max(value, lo + margin), hi - margin)


def initial_guess(observations, fixed=None):
    """Starting point from the lowest-frequency squeezed/anti-squeezed pair.

    The linewidth guess uses the frequency where the anti-squeezing excess
    has halved, which for a Lorentzian sits at ``gamma * (1 - x)``.
    """
    fixed = dict(fixed or {})
    obs = sorted(observations, key=lambda o: (o.frequency, o.quadrature, o.variance))
    sq = [o for o in obs if o.quadrature == "squeezed"]
    asq = [o for o in obs if o.quadrature == "antisqueezed"]
    eta, x = 0.5, 0.5
    if sq and asq:
        try:
            eta, x = invert_zero_frequency(to_db(sq[0].variance), to_db(asq[0].variance))
        except SqzlabError:
            pass
    x = fixed.get("pump_ratio", x)
    eta = fixed.get("efficiency", eta)
    guess = {"efficiency": eta, "pump_ratio": x}
    if "linewidth" in fixed:
        guess["linewidth"] = fixed["linewidth"]
        return guess
    freqs = np.array([o.frequency for o in obs])
    linewidth = 4.0 * freqs.max() if freqs.size else 1e9
    if len(asq) >= 2:
        excess = np.array([o.variance - 1.0 for o in asq])
        half = np.nonzero(excess <= 0.5 * excess[0])[0]
        if half.size and asq[half[0]].frequency > 0:
            linewidth = 2.0 * asq[half[0]].frequency / max(1.0 - x, 1e-3)
    guess["linewidth"] = linewidth
    return guess


def fit_spectrum(problem: FitProblem, initial: Optional[Mapping[str, float]] = None, max_iterations=200,
                 xtol=1e-12, ftol=1e-15) -> FitResult:
    """Damped least squares of dB residuals.

    The returned ``cost_history`` holds the half sum of squares after every
    accepted step and is non-increasing.
    """
    used = problem.used_observations()
    n_masked = len(problem.observations) - len(used)
    freq, squeezed, obs_db = _observation_arrays(used)
    free = problem.free_parameters
    bounds = problem.bounds
    fixed = {k: float(v) for k, v in problem.fixed_values.items() if k not in free}

    start = initial_guess(used, fixed)
    if initial:
        start.update({k: float(v) for k, v in initial.items()})
    u = np.array([_to_unbounded(_interior(start[p], *bounds[p]), *bounds[p]) for p in free])

    def unpack(vec):
        params = dict(fixed)
        for name, val in zip(free, vec):
            params[name] = float(_from_unbounded(val, *bounds[name]))
        return params

    def resid(vec):
        return _model_db(unpack(vec), freq, squeezed) - obs_db

    def jacobian(vec):
        jac = np.empty((obs_db.size, vec.size))
        for j in range(vec.size):
            step = 6e-6 * max(1.0, abs(vec[j]))
            up, down = vec.copy(), vec.copy()
            up[j] += step
            down[j] -= step
            jac[:, j] = (resid(up) - resid(down)) / (2.0 * step)
        return jac

    r = resid(u)
    cost = 0.5 * np.sum(r * r)
    history = [float(cost)]
    damping = 1e-3
    converged = False
    message = "maximum iterations reached"
    iterations = 0

    while iterations < max_iterations:
        iterations += 1
        if cost == 0.0:
            converged, message = True, "exact fit"
            break
        jac = jacobian(u)
        normal = jac.T @ jac
        grad = jac.T @ r
        scale = np.maximum(np.diag(normal), 1e-12 * max(np.max(np.diag(normal)), 1e-300))
        accepted = False
        while damping < 1e16:
            try:
                delta = np.linalg.solve(normal + damping * np.diag(scale), -grad)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            trial = u + delta
            try:
                r_trial = resid(trial)
            except SqzlabError:
                damping *= 10.0
                continue
            cost_trial = 0.5 * np.sum(r_trial * r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                accepted = True
                break
            damping *= 10.0
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        decrease = cost - cost_trial
        step_small = np.all(np.abs(delta) <= xtol * (np.abs(u) + xtol))
        u, r, cost = trial, r_trial, cost_trial
        history.append(float(cost))
        damping = max(damping / 10.0, 1e-12)
        if step_small or decrease <= ftol * cost:
            converged, message = True, "converged"
            break

    estimates = unpack(u)
    return FitResult(
        estimates={p: estimates[p] for p in PARAMETERS},
        rms_db=float(np.sqrt(np.mean(r * r))),
        iterations=iterations,
        converged=converged,
        cost_history=history,
        n_observations=len(used),
        n_masked=n_masked,
        message=message,
    )


def observations_from_spectrum(frequencies, squeezed_variance, antisqueezed_variance, usable=None):
    """Flatten paired arrays into observations, skipping unusable bins."""
    out = []
    for i, f in enumerate(frequencies):
        if usable is not None and not usable[i]:
            continue
        out.append(Observation(float(f), "squeezed", float(squeezed_variance[i])))
        out.append(Observation(float(f), "antisqueezed", float(antisqueezed_variance[i])))
    return out
