"""Command-line front end: config parsing, experiment execution, CSV/JSON
output, and optional gnuplot script emission."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, fields, replace

from . import __version__, montecarlo
from .errors import ConfigurationError, NspRadarError, NumericFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OUTPUT = 3
EXIT_NUMERIC = 4

CSV_HEADER = (
    "mode,bs_id,snr_db,pfa,trials,detections,pd_emp,ci_lo,ci_hi,"
    "pd_theory_paper,pd_theory_calibrated"
)


@dataclass(frozen=True)
class RunConfig:
    plan: montecarlo.ExperimentPlan
    output_dir: str = "results"
    emit_plot: bool = False
    workers: int = 1


# Config file keys -> ExperimentPlan fields (or run options).
_PLAN_KEYS = {
    "m": ("m", int),
    "n_bs": ("n_bs", int),
    "k": ("k", int),
    "l": ("l", int),
    "theta_target_deg": ("theta_target_deg", float),
    "snr_db": ("snr_grid_db", "grid"),
    "pfa": ("pfa_list", "float_list"),
    "trials": ("trials_per_point", int),
    "seed": ("master_seed", int),
    "channel_mode": ("channel_mode", str),
    "modes": ("waveform_modes", "str_list"),
    "scan": ("scan", "bool"),
    "theta_step_deg": ("theta_step_deg", float),
    "rank_tol_factor": ("rank_tol_factor", float),
}
_RUN_KEYS = {
    "workers": int,
    "emit_plot": "bool",
    "output_dir": str,
}

PRESETS = {
    "fig3": dict(
        m=4, n_bs=2, k=5, pfa_list=(1e-3,),
        waveform_modes=(montecarlo.MODE_ORTHOGONAL, montecarlo.MODE_NSP_PER_BS,
                        montecarlo.MODE_NSP_SELECTED),
        snr_grid_db=tuple(float(s) for s in range(-10, 31)),
    ),
    "fig4": dict(
        m=4, n_bs=2, k=5, pfa_list=(1e-1, 1e-3, 1e-5, 1e-7),
        waveform_modes=(montecarlo.MODE_ORTHOGONAL, montecarlo.MODE_NSP_SELECTED),
        snr_grid_db=tuple(float(s) for s in range(-10, 31)),
    ),
    "fig5": dict(
        m=8, n_bs=2, k=5, pfa_list=(1e-1, 1e-3, 1e-5, 1e-7),
        waveform_modes=(montecarlo.MODE_ORTHOGONAL, montecarlo.MODE_NSP_SELECTED),
        snr_grid_db=tuple(float(s) for s in range(-10, 31)),
    ),
}


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigurationError(f"expected a boolean, got {raw!r}")


def _parse_list(raw: str) -> list[str]:
    raw = raw.strip()
    if not (raw.startswith("[") and raw.endswith("]")):
        raise ConfigurationError(f"expected a [..] list, got {raw!r}")
    inner = raw[1:-1].strip()
    if not inner:
        return []
    return [item.strip() for item in inner.split(",")]


def _parse_grid(raw: str) -> tuple[float, ...]:
    """Either an explicit [a, b, c] list or a start:stop:step range (inclusive)."""
    raw = raw.strip()
    if raw.startswith("["):
        return tuple(float(v) for v in _parse_list(raw))
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigurationError(
            f"expected [..] list or start:stop:step range, got {raw!r}"
        )
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ConfigurationError("grid step must be positive")
    vals, v = [], start
    while v <= stop + 1e-9:
        vals.append(round(v, 10))
        v += step
    return tuple(vals)


def _convert(key: str, kind, raw: str):
    try:
        if kind == "bool":
            return _parse_bool(raw)
        if kind == "grid":
            return _parse_grid(raw)
        if kind == "float_list":
            return tuple(float(v) for v in _parse_list(raw))
        if kind == "str_list":
            return tuple(_parse_list(raw))
        return kind(raw)
    except (ValueError, ConfigurationError) as exc:
        raise ConfigurationError(f"config key {key!r}: {exc}") from exc


def parse_config(path: str) -> RunConfig:
    """Parse the flat key=value config format; unknown keys are rejected."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path!r}: {exc}") from exc

    plan_kwargs, run_kwargs, seen = {}, {}, set()
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'key = value', got {stripped!r}"
            )
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key in seen:
            raise ConfigurationError(f"{path}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in _PLAN_KEYS:
            field_name, kind = _PLAN_KEYS[key]
            plan_kwargs[field_name] = _convert(key, kind, raw)
        elif key in _RUN_KEYS:
            run_kwargs[key] = _convert(key, _RUN_KEYS[key], raw)
        else:
            raise ConfigurationError(f"{path}:{lineno}: unknown config key {key!r}")

    workers = run_kwargs.pop("workers", _default_workers())
    if workers < 1:
        raise ConfigurationError("config key 'workers': must be >= 1")
    plan = montecarlo.ExperimentPlan(**plan_kwargs)
    return RunConfig(plan=plan, workers=workers, **run_kwargs)


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of parse_config: parse(serialize(cfg)) == cfg."""
    p = cfg.plan
    lines = [
        f"m = {p.m}",
        f"n_bs = {p.n_bs}",
        f"k = {p.k}",
        f"l = {p.l}",
        f"theta_target_deg = {p.theta_target_deg!r}",
        f"snr_db = [{', '.join(repr(s) for s in p.snr_grid_db)}]",
        f"pfa = [{', '.join(repr(v) for v in p.pfa_list)}]",
        f"trials = {p.trials_per_point}",
        f"seed = {p.master_seed}",
        f"channel_mode = {p.channel_mode}",
        f"modes = [{', '.join(p.waveform_modes)}]",
        f"scan = {str(p.scan).lower()}",
        f"theta_step_deg = {p.theta_step_deg!r}",
        f"workers = {cfg.workers}",
        f"emit_plot = {str(cfg.emit_plot).lower()}",
        f"output_dir = {cfg.output_dir}",
    ]
    if p.rank_tol_factor is not None:
        lines.append(f"rank_tol_factor = {p.rank_tol_factor!r}")
    return "\n".join(lines) + "\n"


def _default_workers() -> int:
    env = os.environ.get("NSPSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(result: montecarlo.ExperimentResult, path: str) -> None:
    rows = [CSV_HEADER]
    for curve in result.curves:
        for pt in curve.points:
            rows.append(",".join([
                curve.label, curve.bs_id, _fmt(pt.snr_db), _fmt(pt.pfa),
                str(pt.trials), str(pt.detections), _fmt(pt.pd_emp),
                _fmt(pt.ci_lo), _fmt(pt.ci_hi),
                _fmt(pt.pd_theory_paper), _fmt(pt.pd_theory_calibrated),
            ]))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def write_summary(result, cfg: RunConfig, wall_time: float, path: str) -> None:
    plan = result.plan
    gap_reports = {}
    for pfa in plan.pfa_list:
        gap_reports[repr(pfa)] = {
            source: montecarlo.snr_gap(result.curves, pfa=pfa, source=source).gap_db
            for source in ("emp", "theory_paper", "theory_calibrated")
        }
    summary = {
        "version": __version__,
        "master_seed": plan.master_seed,
        "plan": {
            "m": plan.m, "n_bs": plan.n_bs, "k": plan.k, "l": plan.l,
            "theta_target_deg": plan.theta_target_deg,
            "snr_grid_db": list(plan.snr_grid_db),
            "pfa_list": list(plan.pfa_list),
            "trials_per_point": plan.trials_per_point,
            "channel_mode": plan.channel_mode,
            "waveform_modes": list(plan.waveform_modes),
            "scan": plan.scan,
            "theta_step_deg": plan.theta_step_deg,
        },
        "workers": cfg.workers,
        "degenerate_trials": result.degenerate_trials,
        "selection": None,
        "snr_gap_db_at_pd_0.9": gap_reports,
        "wall_time_s": round(wall_time, 3),
    }
    if result.selection is not None:
        summary["selection"] = {
            "selected_bs": result.selection.selected,
            "degradation_norms": list(result.selection.norms),
        }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def write_plot_script(result, path: str, csv_name: str = "results.csv") -> None:
    """Gnuplot script laying out one P_D-vs-SNR panel per false-alarm rate."""
    plan = result.plan
    n_panels = len(plan.pfa_list)
    cols = 2 if n_panels > 1 else 1
    rows = (n_panels + cols - 1) // cols
    lines = [
        "# Render with: gnuplot plot.gp",
        "set datafile separator ','",
        "set terminal pngcairo size 1200,800",
        "set output 'detection_curves.png'",
        f"set multiplot layout {rows},{cols}",
        "set xlabel 'SNR (dB)'",
        "set ylabel 'P_D'",
        "set yrange [0:1]",
        "set key bottom right",
    ]
    labels = [(c.label, c.bs_id) for c in result.curves]
    for pfa in plan.pfa_list:
        lines.append(f"set title 'P_FA = {pfa:g}'")
        plots = []
        for label, _ in labels:
            cond = f"(strcol(1) eq '{label}' && column(4) == {pfa!r})"
            plots.append(
                f"'{csv_name}' using ({cond} ? $3 : NaN):7 with linespoints "
                f"title '{label}'"
            )
            plots.append(
                f"'{csv_name}' using ({cond} ? $3 : NaN):11 with lines dashtype 2 "
                f"title '{label} (theory)'"
            )
        lines.append("plot \\\n    " + ", \\\n    ".join(plots))
    lines.append("unset multiplot")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run(cfg: RunConfig) -> int:
    """Execute the experiment and write results.csv / summary.json / plot.gp."""
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
        probe = os.path.join(cfg.output_dir, ".write_probe")
        with open(probe, "w"):
            pass
        os.remove(probe)
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    t0 = time.monotonic()
    try:
        result = montecarlo.run_experiment(cfg.plan, workers=cfg.workers)
    except NumericFailure as exc:
        print(f"error: numeric failure during simulation: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = time.monotonic() - t0
    write_csv(result, os.path.join(cfg.output_dir, "results.csv"))
    write_summary(result, cfg, wall, os.path.join(cfg.output_dir, "summary.json"))
    if cfg.emit_plot:
        write_plot_script(result, os.path.join(cfg.output_dir, "plot.gp"))
    return EXIT_OK


def build_config(args) -> RunConfig:
    if args.config:
        cfg = parse_config(args.config)
    else:
        cfg = RunConfig(plan=montecarlo.ExperimentPlan(), workers=_default_workers())
    plan = cfg.plan
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigurationError(
                f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}"
            )
        plan = replace(plan, **PRESETS[args.preset])
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.trials is not None:
        overrides["trials_per_point"] = args.trials
    if overrides:
        plan = replace(plan, **overrides)
    cfg = replace(cfg, plan=plan)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.emit_plot:
        cfg = replace(cfg, emit_plot=True)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nspradar",
        description="Monte Carlo detection study of null-space projected "
                    "MIMO radar waveforms",
    )
    parser.add_argument("--config", help="path to key=value config file")
    parser.add_argument("--preset", help="named scenario: fig3, fig4, fig5")
    parser.add_argument("--out", help="output directory (default: results)")
    parser.add_argument("--seed", type=int, help="override master seed")
    parser.add_argument("--trials", type=int, help="override trials per grid point")
    parser.add_argument("--workers", type=int, help="worker process count")
    parser.add_argument("--emit-plot", action="store_true",
                        help="write a gnuplot script alongside the CSV")
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except NspRadarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
