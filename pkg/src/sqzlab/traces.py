"""Spectrum-analyzer trace files: parsing, normalisation and grid merging.

Trace file format (UTF-8 text)::

    # role=shot
    # RBW_Hz=5e6
    # VBW_Hz=3e3
    # sweep_time_s=0.17
    # LO_power_W=0.002
    # free comment lines are allowed
    frequency_Hz, power_dBm
    1.0e7, -80.25
    2.0e7  -80.31

Lines starting with ``#`` carry ``key=value`` metadata or comments. Data rows
hold a frequency in Hz and a power in dBm, separated by a comma and/or
whitespace. A single non-numeric header row before the first data row is
skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import SqzlabError, TraceFormatError
from .squeezing import clearance

ROLES = ("shot", "dark", "squeezed", "antisqueezed")

# header key (lower case) -> TraceMetadata attribute
_METADATA_KEYS = {
    "rbw_hz": "resolution_bandwidth",
    "vbw_hz": "video_bandwidth",
    "sweep_time_s": "sweep_time",
    "lo_power_w": "local_oscillator_power",
}
_HEADER_NAMES = {
    "resolution_bandwidth": "RBW_Hz",
    "video_bandwidth": "VBW_Hz",
    "sweep_time": "sweep_time_s",
    "local_oscillator_power": "LO_power_W",
}

MIN_CLEARANCE_DB = 0.1


@dataclass(frozen=True)
class TraceMetadata:
    resolution_bandwidth: Optional[float] = None
    video_bandwidth: Optional[float] = None
    sweep_time: Optional[float] = None
    local_oscillator_power: Optional[float] = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Trace:
    role: str
    frequencies: np.ndarray
    power_dbm: np.ndarray
    metadata: TraceMetadata = field(default_factory=TraceMetadata)

    def __post_init__(self):
        if self.role not in ROLES:
            raise SqzlabError(f"trace role must be one of {ROLES}, got {self.role!r}")
        if self.frequencies.shape != self.power_dbm.shape or self.frequencies.ndim != 1:
            raise SqzlabError("frequency and power arrays must be 1-D and the same length")
        if self.frequencies.size < 2:
            raise SqzlabError("a trace needs at least 2 points")
        if np.any(np.diff(self.frequencies) <= 0):
            raise SqzlabError("trace frequencies must be strictly increasing")

    @property
    def power_linear(self):
        """Power in mW."""
        return 10.0 ** (self.power_dbm / 10.0)


def _parse_float(token, lineno):
    # float() is locale independent; reject nan/inf explicitly
    try:
        value = float(token)
    except ValueError:
        raise TraceFormatError(f"cannot parse number {token!r}", lineno) from None
    if not math.isfinite(value):
        raise TraceFormatError(f"non-finite number {token!r}", lineno)
    return value


def parse_trace(text: str, role: Optional[str] = None) -> Trace:
    """Parse trace text. ``role`` may come from the argument or a ``# role=`` header."""
    meta = {}
    extra = {}
    header_role = None
    freqs, powers = [], []
    prev_f = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                key, value = key.strip(), value.strip()
                lower = key.lower()
                if lower == "role":
                    header_role = value
                elif lower in _METADATA_KEYS:
                    meta[_METADATA_KEYS[lower]] = _parse_float(value, lineno)
                else:
                    extra[key] = value
            continue
        tokens = line.replace(",", " ").split()
        if not freqs and tokens and not _looks_numeric(tokens[0]):
            continue  # column header row
        if len(tokens) != 2:
            raise TraceFormatError(f"expected 2 columns (frequency_Hz, power_dBm), found {len(tokens)}", lineno)
        f, p = _parse_float(tokens[0], lineno), _parse_float(tokens[1], lineno)
        if prev_f is not None and f <= prev_f:
            raise TraceFormatError(f"frequency {f!r} does not increase (previous {prev_f!r})", lineno)
        prev_f = f
        freqs.append(f)
        powers.append(p)

    if role is not None and header_role is not None and role != header_role:
        raise TraceFormatError(f"role {role!r} conflicts with header role {header_role!r}")
    role = role or header_role
    if role is None:
        raise TraceFormatError("trace role not given and no '# role=' header present")
    if role not in ROLES:
        raise TraceFormatError(f"unknown role {role!r}; expected one of {ROLES}")
    if len(freqs) < 2:
        raise TraceFormatError(f"a trace needs at least 2 data rows, found {len(freqs)}")
    return Trace(role, np.array(freqs), np.array(powers), TraceMetadata(**meta, extra=extra))


def _looks_numeric(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def serialize_trace(trace: Trace) -> str:
    """Inverse of :func:`parse_trace`; floats are written with ``repr`` for exact round trips."""
    lines = [f"# role={trace.role}"]
    for attr, key in _HEADER_NAMES.items():
        value = getattr(trace.metadata, attr)
        if value is not None:
            lines.append(f"# {key}={value!r}")
    for key, value in trace.metadata.extra.items():
        lines.append(f"# {key}={value}")
    lines.append("frequency_Hz, power_dBm")
    lines.extend(f"{f!r}, {p!r}" for f, p in zip(trace.frequencies.tolist(), trace.power_dbm.tolist()))
    return "\n".join(lines) + "\n"


def read_trace(path, role=None) -> Trace:
    return parse_trace(Path(path).read_text(encoding="utf-8"), role)


def write_trace(path, trace: Trace):
    Path(path).write_text(serialize_trace(trace), encoding="utf-8")


@dataclass(frozen=True)
class NormalizedTrace:
    """Shot-normalised variance on the target grid.

    ``usable`` is False where the bin lies outside the reference traces,
    where clearance is below the minimum, or where the target sits at or
    below the dark floor. ``variance`` is NaN there.
    """

    frequencies: np.ndarray
    variance: np.ndarray
    usable: np.ndarray
    clearance_db: np.ndarray


def _check_rbw(*traces):
    rbws = [t.metadata.resolution_bandwidth for t in traces]
    for t, rbw in zip(traces, rbws):
        if rbw is None:
            raise SqzlabError(f"{t.role} trace lacks RBW metadata; cannot compare traces")
    if len(set(rbws)) > 1:
        listing = ", ".join(f"{t.role}={r:g} Hz" for t, r in zip(traces, rbws))
        raise SqzlabError(f"resolution bandwidths differ: {listing}")


def _interp_linear(trace: Trace, grid):
    inside = (grid >= trace.frequencies[0]) & (grid <= trace.frequencies[-1])
    return np.interp(grid, trace.frequencies, trace.power_linear), inside


def normalize_to_shot(target: Trace, shot: Trace, dark: Optional[Trace] = None,
                      min_clearance_db: float = MIN_CLEARANCE_DB) -> NormalizedTrace:
    """Convert ``target`` to linear variance relative to the shot-noise trace.

    Shot and dark traces are interpolated (linearly in mW) onto the target's
    frequency grid.
    """
    if shot.role != "shot":
        raise SqzlabError(f"reference trace must have role 'shot', got {shot.role!r}")
    if dark is not None and dark.role != "dark":
        raise SqzlabError(f"dark trace must have role 'dark', got {dark.role!r}")
    _check_rbw(*(t for t in (target, shot, dark) if t is not None))

    grid = target.frequencies
    raw = target.power_linear
    shot_lin, usable = _interp_linear(shot, grid)
    if dark is None:
        dark_lin = np.zeros_like(grid)
    else:
        dark_lin, inside = _interp_linear(dark, grid)
        usable = usable & inside
    if not np.any(usable):
        raise SqzlabError("target and reference traces do not overlap in frequency")

    clear = clearance(shot_lin, dark_lin)
    usable = usable & (clear >= min_clearance_db) & (raw > dark_lin)
    variance = np.full_like(grid, np.nan)
    variance[usable] = (raw[usable] - dark_lin[usable]) / (shot_lin[usable] - dark_lin[usable])
    return NormalizedTrace(grid.copy(), variance, usable, clear)


def merge_grids(a, b, tolerance=1.0):
    """Sorted union of two frequency grids; points within ``tolerance`` Hz collapse to the first."""
    merged = np.sort(np.concatenate([np.asarray(a, dtype=float).ravel(), np.asarray(b, dtype=float).ravel()]))
    if merged.size == 0:
        raise SqzlabError("merged frequency grid is empty")
    keep = [merged[0]]
    for f in merged[1:]:
        if f - keep[-1] > tolerance:
            keep.append(f)
    return np.array(keep)


def format_columns(names, arrays):
    """Whitespace-separated text columns with fixed formatting (deterministic bytes)."""
    lines = ["# " + " ".join(names)]
    for row in zip(*arrays):
        lines.append(" ".join(f"{v:.12e}" for v in row))
    return "\n".join(lines) + "\n"


def format_spectrum_table(frequencies, s_minus, s_plus):
    """Normalised-spectrum output: ``frequency_Hz S_minus_linear S_plus_linear``."""
    return format_columns(("frequency_Hz", "S_minus_linear", "S_plus_linear"), (frequencies, s_minus, s_plus))


def read_spectrum_table(path):
    """Load a file written by :func:`format_spectrum_table` as a 2-D array."""
    return np.loadtxt(path, comments="#", ndmin=2)


def synthesize_traces(frequencies, s_minus, s_plus, shot_dbm=-80.0, clearance_db=15.0, rbw=5e6, vbw=3e3,
                      sweep_time=0.17):
    """Spectrum-analyzer traces that reproduce the given variances after dark correction.

    Returns a dict keyed by role. The dark floor sits ``clearance_db`` below
    shot noise and is added to every measured trace.
    """
    f = np.asarray(frequencies, dtype=float)
    shot = np.full_like(f, 10.0 ** (shot_dbm / 10.0))
    dark = shot * 10.0 ** (-clearance_db / 10.0)
    meta = TraceMetadata(resolution_bandwidth=rbw, video_bandwidth=vbw, sweep_time=sweep_time)
    levels = {
        "shot": shot,
        "dark": dark,
        "squeezed": dark + np.asarray(s_minus) * (shot - dark),
        "antisqueezed": dark + np.asarray(s_plus) * (shot - dark),
    }
    return {role: Trace(role, f.copy(), 10.0 * np.log10(p), meta) for role, p in levels.items()}
