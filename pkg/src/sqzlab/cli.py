"""Command-line front end: ``sqzlab design | simulate | fit | report``.

Exit codes: 0 success, 2 usage error, 3 configuration or physics error,
4 trace input error, 5 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, split_overrides
from .design import Design, ModelParameters, design, frequency_grid, scenario_parameters
from .errors import ConfigError, FitConvergenceError, SqzlabError, TraceFormatError
from .fitting import PARAMETERS, FitProblem, FitResult, Observation, fit_spectrum, invert_zero_frequency
from .squeezing import quadrature_spectrum, quadrature_variances, to_db
from .traces import (
    ROLES,
    format_columns,
    format_spectrum_table,
    normalize_to_shot,
    read_trace,
    synthesize_traces,
    write_trace,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_TRACE = 4
EXIT_FIT = 5

SAMPLE_FREQUENCIES = (5e6, 10e6, 100e6, 1.2e9)
BASELINE = "baseline"


def _human(value, unit):
    if unit == "Hz":
        for scale, name in ((1e9, "GHz"), (1e6, "MHz"), (1e3, "kHz")):
            if abs(value) >= scale:
                return f"{value / scale:.4f} {name}"
        return f"{value:.4f} Hz"
    if unit == "m":
        return f"{value * 1e6:.3f} um"
    if unit == "W":
        return f"{value:.4f} W"
    if unit == "1/W":
        return f"{value:.4e} 1/W"
    if unit == "dB":
        return f"{value:+.3f} dB"
    return f"{value:.6g}"


def _table(header, rows):
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------- design


def pump_ratio_views(config: ExperimentConfig, d: Design):
    """Design-side and measurement-side estimates of (x, efficiency), side by side."""
    p = d.parameters
    views = [{
        "view": "design (pump power / threshold)",
        "pump_ratio": p.pump_ratio,
        "efficiency": p.efficiency,
        "squeezing_db_zero": d.squeezing_db_zero,
        "antisqueezing_db_zero": d.antisqueezing_db_zero,
    }]
    for ref in config.references:
        eta, x = invert_zero_frequency(ref.squeezing_db, ref.antisqueezing_db)
        views.append({
            "view": f"measured {ref.name} (zero-frequency inversion)",
            "pump_ratio": x,
            "efficiency": eta,
            "squeezing_db_zero": ref.squeezing_db,
            "antisqueezing_db_zero": ref.antisqueezing_db,
        })
    return views


def cmd_design(config: ExperimentConfig):
    """Return ``(text, data)`` for the derived-quantity report."""
    d = design(config)
    views = pump_ratio_views(config, d)
    data = {
        "tool": f"sqzlab {__version__}",
        "config": config.source,
        "quantities": {k: {"value": v, "unit": u, "relation": rel} for k, v, u, rel in d.rows()},
        "pump_ratio_views": views,
    }
    lines = [f"sqzlab {__version__} design report", f"config: {config.source}", ""]
    width = max(len(k) for k, *_ in d.rows())
    for key, value, unit, relation in d.rows():
        lines.append(f"{key:<{width}}  {_human(value, unit):>18}   {relation}")
    lines += ["", "pump-ratio views:"]
    for v in views:
        lines.append(
            f"  {v['view']}: x = {v['pump_ratio']:.4f}, efficiency = {v['efficiency']:.4f}, "
            f"S- = {v['squeezing_db_zero']:+.2f} dB, S+ = {v['antisqueezing_db_zero']:+.2f} dB"
        )
    return "\n".join(lines) + "\n", data


# -------------------------------------------------------------- simulate


@dataclass
class ScenarioOutput:
    name: str
    parameters: ModelParameters
    overrides: dict
    spectrum: object
    files: list = field(default_factory=list)


def run_scenarios(config: ExperimentConfig, cli_overrides: dict):
    """Baseline plus every configured scenario; command-line overrides apply last, to all."""
    grid = frequency_grid(config.simulation)
    specs = [(BASELINE, {})] + [(s.name, dict(s.overrides)) for s in config.scenarios]
    out = []
    for name, overrides in specs:
        merged = {**overrides, **cli_overrides}
        params = scenario_parameters(config, merged)
        spectrum = quadrature_spectrum(params.pump_ratio, params.efficiency, params.linewidth, grid)
        out.append(ScenarioOutput(name, params, merged, spectrum))
    return out


def write_scenarios(outputs, out_dir: Path, config: ExperimentConfig):
    for s in outputs:
        stem = f"spectrum_{s.name}"
        sp = s.spectrum
        _write(out_dir / f"{stem}.txt", format_spectrum_table(sp.frequencies, sp.squeezed_variance, sp.antisqueezed_variance))
        meta = {
            "scenario": s.name,
            "config": config.source,
            "pump_ratio": s.parameters.pump_ratio,
            "total_efficiency": s.parameters.efficiency,
            "linewidth_fwhm_hz": s.parameters.linewidth,
            "overrides": {k: str(v) for k, v in sorted(s.overrides.items())},
            "columns": ["frequency_Hz", "S_minus_linear", "S_plus_linear"],
            "tool": f"sqzlab {__version__}",
        }
        _write(out_dir / f"{stem}.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
        s.files = [f"{stem}.txt", f"{stem}.json"]


def _sample_rows(outputs):
    rows = []
    for s in outputs:
        p = s.parameters
        sm, sp = quadrature_variances(p.pump_ratio, p.efficiency, p.linewidth, np.array(SAMPLE_FREQUENCIES))
        cells = [f"{a:+.2f} / {b:+.2f}" for a, b in zip(to_db(sm), to_db(sp))]
        rows.append([s.name, f"{p.pump_ratio:.4f}", f"{p.efficiency:.4f}", _human(p.linewidth, "Hz")] + cells)
    header = ["scenario", "x", "efficiency", "linewidth"] + [f"S-/S+ dB @ {_human(f, 'Hz')}" for f in SAMPLE_FREQUENCIES]
    return header, rows


def cmd_simulate(config: ExperimentConfig, cli_overrides: dict, out_dir: Path, emit_traces=False):
    outputs = run_scenarios(config, cli_overrides)
    write_scenarios(outputs, out_dir, config)
    if emit_traces:
        base = outputs[0].spectrum
        for role, trace in synthesize_traces(base.frequencies, base.squeezed_variance, base.antisqueezed_variance).items():
            write_trace(out_dir / f"trace_{role}.txt", trace)
    header, rows = _sample_rows(outputs)
    text = _table(header, rows) + "\n" + "".join(f"wrote {out_dir / f}\n" for s in outputs for f in s.files)
    return text, outputs


# ------------------------------------------------------------------- fit


def load_traces(specs):
    """``ROLE=PATH`` or ``PATH`` (role from the file header) -> {role: Trace}."""
    traces = {}
    for spec in specs:
        role, sep, path = spec.partition("=")
        if not (sep and role in ROLES):
            role, path = None, spec
        try:
            trace = read_trace(path, role)
        except OSError as exc:
            raise TraceFormatError(f"cannot read trace {path}: {exc.strerror}") from None
        if trace.role in traces:
            raise TraceFormatError(f"more than one {trace.role} trace given")
        traces[trace.role] = trace
    return traces


def parse_masks(masks):
    out = []
    for m in masks:
        lo, sep, hi = m.partition(":")
        try:
            out.append((float(lo), float(hi)))
        except ValueError:
            raise ConfigError(f"mask {m!r} is not of the form f_lo_hz:f_hi_hz") from None
        if not sep or out[-1][0] > out[-1][1]:
            raise ConfigError(f"mask {m!r} is not an ordered f_lo_hz:f_hi_hz interval")
    return out


def parse_free(text):
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in PARAMETERS]
    if bad or not names:
        raise ConfigError(f"--free takes a comma list from {PARAMETERS}, got {text!r}")
    return names


@dataclass
class FitOutcome:
    result: FitResult
    normalized: dict
    masks: list


def run_fit(traces, masks, free, fixed):
    if "shot" not in traces:
        raise TraceFormatError("shot trace required")
    targets = [r for r in ("squeezed", "antisqueezed") if r in traces]
    if not targets:
        raise TraceFormatError("at least one squeezed or antisqueezed trace required")
    try:
        normalized = {r: normalize_to_shot(traces[r], traces["shot"], traces.get("dark")) for r in targets}
    except TraceFormatError:
        raise
    except SqzlabError as exc:
        raise TraceFormatError(str(exc)) from None
    observations = []
    for role, norm in normalized.items():
        for f, v, ok in zip(norm.frequencies, norm.variance, norm.usable):
            if ok:
                observations.append(Observation(float(f), role, float(v)))
    fixed = {k: v for k, v in fixed.items() if k not in free}
    problem = FitProblem(observations, free_parameters=free, fixed_values=fixed, masks=masks)
    result = fit_spectrum(problem)
    return FitOutcome(result, normalized, masks)


def fit_fixed_values(config, model_overrides):
    fixed = {}
    if config is not None:
        p = design(config).parameters
        fixed = {"efficiency": p.efficiency, "pump_ratio": p.pump_ratio, "linewidth": p.linewidth}
    names = {"efficiency": "efficiency", "pump_ratio": "pump_ratio", "linewidth_hz": "linewidth"}
    for key, value in model_overrides.items():
        fixed[names[key]] = value
    return fixed


def fit_text(outcome: FitOutcome):
    r = outcome.result
    lines = [
        f"converged: {'yes' if r.converged else 'no'} ({r.message}), iterations: {r.iterations}",
        f"observations used: {r.n_observations}, masked: {r.n_masked}, "
        f"unusable bins: {sum(int((~n.usable).sum()) for n in outcome.normalized.values())}",
        f"residual rms: {r.rms_db:.4f} dB",
    ]
    for name in PARAMETERS:
        lines.append(f"{name}: {r.estimates[name]:.6g}")
    for lo, hi in outcome.masks:
        lines.append(f"mask: {lo:g}..{hi:g} Hz")
    return "\n".join(lines) + "\n"


def write_fit(outcome: FitOutcome, out_dir: Path):
    est = outcome.result.estimates
    files = []
    for role, norm in outcome.normalized.items():
        s_minus, s_plus = quadrature_variances(est["pump_ratio"], est["efficiency"], est["linewidth"], norm.frequencies)
        model = s_minus if role == "squeezed" else s_plus
        name = f"fit_{role}.txt"
        _write(out_dir / name, format_columns(
            ("frequency_Hz", "measured_linear", "model_linear", "usable"),
            (norm.frequencies, norm.variance, model, norm.usable.astype(float)),
        ))
        files.append(name)
    r = outcome.result
    data = {
        "estimates": r.estimates,
        "rms_db": r.rms_db,
        "iterations": r.iterations,
        "converged": r.converged,
        "message": r.message,
        "n_observations": r.n_observations,
        "n_masked": r.n_masked,
        "masks": [list(m) for m in outcome.masks],
    }
    _write(out_dir / "fit_result.json", json.dumps(data, indent=2, sort_keys=True) + "\n")
    return files + ["fit_result.json"]


def cmd_fit(trace_specs, masks, free, config=None, model_overrides=None, out_dir=None):
    traces = load_traces(trace_specs)
    fixed = fit_fixed_values(config, model_overrides or {})
    if free is None:
        free = ["efficiency", "pump_ratio"] if "linewidth" in fixed else list(PARAMETERS)
    missing = [p for p in PARAMETERS if p not in free and p not in fixed]
    if missing:
        raise ConfigError(f"parameters {missing} are neither free nor fixed (give --config or --override)")
    outcome = run_fit(traces, masks, free, fixed)
    text = fit_text(outcome)
    if out_dir is not None:
        text += "".join(f"wrote {out_dir / f}\n" for f in write_fit(outcome, out_dir))
    if not outcome.result.converged:
        raise FitConvergenceError(text + "fit did not converge")
    return text, outcome


# ---------------------------------------------------------------- report


def cmd_report(config: ExperimentConfig, cli_overrides: dict, trace_specs=(), masks=(), free=None, out_dir=None):
    """Markdown document; byte-identical for identical inputs."""
    _, data = cmd_design(config)
    parts = [
        "# Squeezed-light source report",
        "",
        f"- tool: sqzlab {__version__}",
        f"- config: {config.source}",
        "",
        "## Design",
        "",
        _table(
            ["quantity", "value", "relation"],
            [[k, _human(q["value"], q["unit"]), q["relation"]] for k, q in data["quantities"].items()],
        ),
        "",
        "## Pump-ratio views",
        "",
        "The design view derives x from pump power and threshold; measured views invert a "
        "reported squeezing/anti-squeezing pair at zero frequency. They need not agree.",
        "",
        _table(
            ["view", "x", "efficiency", "S- @ 0", "S+ @ 0"],
            [[v["view"], f"{v['pump_ratio']:.4f}", f"{v['efficiency']:.4f}",
              _human(v["squeezing_db_zero"], "dB"), _human(v["antisqueezing_db_zero"], "dB")]
             for v in data["pump_ratio_views"]],
        ),
        "",
        "## Simulated spectra",
        "",
    ]
    outputs = run_scenarios(config, cli_overrides)
    if out_dir is not None:
        write_scenarios(outputs, out_dir, config)
    header, rows = _sample_rows(outputs)
    parts += [_table(header, rows), ""]
    sim = config.simulation
    parts.append(f"Grid: {sim.bins} bins, {sim.spacing} spacing, {_human(sim.f_min, 'Hz')} to {_human(sim.f_max, 'Hz')}.")
    if out_dir is not None:
        parts.append("Plot data: " + ", ".join(f"`{f}`" for s in outputs for f in s.files if f.endswith(".txt")) + ".")
    else:
        parts.append("Plot data: not written (pass --out).")
    if trace_specs:
        model, _ = split_overrides(f"{k}={v}" for k, v in cli_overrides.items())
        text, outcome = cmd_fit(trace_specs, masks, free, config, model, out_dir)
        parts += ["", "## Fit", "", "```", text.rstrip("\n"), "```"]
    return "\n".join(parts) + "\n"


# ------------------------------------------------------------------ main


def build_parser():
    parser = argparse.ArgumentParser(prog="sqzlab", description="Squeezed-light source design, simulation and fitting.")
    parser.add_argument("--version", action="version", version=f"sqzlab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{design,simulate,fit,report}")

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="configuration file, or builtin:ppktp for the bundled setup")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="efficiency, pump_ratio, linewidth_hz, or section.key (repeatable)")

    def fitting(p):
        p.add_argument("traces", nargs="*", metavar="[ROLE=]PATH", help="trace files")
        p.add_argument("--mask", action="append", default=[], metavar="F_LO_HZ:F_HI_HZ",
                       help="exclude a frequency interval from the fit (repeatable)")
        p.add_argument("--free", help=f"comma list of fitted parameters from {','.join(PARAMETERS)}")

    p = sub.add_parser("design", help="derived resonator and nonlinear figures")
    common(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p = sub.add_parser("simulate", help="write squeezing spectra for all scenarios")
    common(p)
    p.add_argument("--emit-traces", action="store_true", help="also write synthetic trace files for the baseline")
    p = sub.add_parser("fit", help="fit the spectrum model to measured traces")
    common(p, config_required=False)
    fitting(p)
    p = sub.add_parser("report", help="combined markdown report")
    common(p)
    fitting(p)
    return parser


def _load(args):
    model, dotted = split_overrides(args.override)
    config = load_config(args.config, dotted) if args.config else None
    return config, model, dotted


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        config, model, _ = _load(args)
        if args.command == "design":
            text, data = cmd_design(config)
            if args.out is not None:
                _write(args.out / "design.txt", text)
                _write(args.out / "design.json", json.dumps(data, indent=2) + "\n")
            sys.stdout.write(json.dumps(data, indent=2) + "\n" if args.format == "json" else text)
        elif args.command == "simulate":
            out = args.out or Path(config.simulation.output_dir or "sqzlab-output")
            text, _ = cmd_simulate(config, model, out, emit_traces=args.emit_traces)
            sys.stdout.write(text)
        elif args.command == "fit":
            free = parse_free(args.free) if args.free else None
            text, _ = cmd_fit(args.traces, parse_masks(args.mask), free, config, model, args.out)
            sys.stdout.write(text)
        elif args.command == "report":
            free = parse_free(args.free) if args.free else None
            text = cmd_report(config, model, args.traces, parse_masks(args.mask), free, args.out)
            if args.out is not None:
                _write(args.out / "report.md", text)
            sys.stdout.write(text)
    except FitConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except TraceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRACE
    except (SqzlabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
