"""Command-line entry point.

Exit codes: 0 success, 1 self-test failure, 2 bad config or arguments,
3 numerical abort inside the sampler.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import schedules
from .config import ConfigError, RunConfig, load_config, strategy_config
from .metrics import histogram
from .scenario import ScenarioSpec, SimulationError, StrategyResult, derive_true_enhanced, run, sweep

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def fmt(value: float) -> str:
    """Round-trip float formatting for CSV output."""
    return format(float(value), ".17g")


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_config(args) -> RunConfig:
    if args.config is None and not args.appendix_defaults:
        raise ConfigError("give a config file or --appendix-defaults")
    cfg = load_config(args.config)
    sampler_updates = {}
    if args.seed is not None:
        sampler_updates["seed"] = args.seed
    if args.samples is not None:
        sampler_updates["n_samples"] = args.samples
    if args.steps is not None:
        sampler_updates["steps"] = args.steps
    if sampler_updates:
        cfg = cfg.model_copy(update={"sampler": cfg.sampler.model_copy(update=sampler_updates)})
    if args.output_dir is not None:
        cfg = cfg.model_copy(update={"output_dir": args.output_dir})
    return cfg


def _summary_record(result: StrategyResult) -> dict:
    params = strategy_config(result.strategy).model_dump(mode="json")
    return {
        "strategy": params.pop("name"),
        "parameters": params,
        "mean": result.mean,
        "std": result.std,
        "kl_binned": result.kl_binned,
        "kl_gauss_fit": result.kl_gauss_fit,
        "seed": result.seed,
        "wall_time_ms": round(result.wall_time * 1000.0, 3),
    }


def _write_outputs(result: StrategyResult, spec: ScenarioSpec, cfg: RunConfig, out: Path):
    name = result.name
    if "summary-json" in cfg.formats:
        (out / f"{name}.summary.json").write_text(
            json.dumps(_summary_record(result), indent=2) + "\n", encoding="utf-8")
    values = result.samples.values
    if "samples-csv" in cfg.formats:
        _write_csv(out / f"{name}.samples.csv", ["x"], ([fmt(v)] for v in values))
    if "histogram-csv" in cfg.formats:
        h = histogram(values, derive_true_enhanced(spec), spec.histogram)
        _write_csv(out / f"{name}.histogram.csv",
                   ["bin_lo", "bin_hi", "empirical_mass", "reference_mass"],
                   ([fmt(lo), fmt(hi), fmt(p), fmt(q)] for lo, hi, p, q in
                    zip(h.edges[:-1], h.edges[1:], h.empirical_mass, h.reference_mass)))
    traj = result.samples.trajectories
    if "trajectories-csv" in cfg.formats and traj is not None:
        sigmas = schedules.ve_log_linear(spec.sampler.schedule)
        _write_csv(out / f"{name}.trajectories.csv",
                   ["step", "sigma"] + [f"x{i}" for i in range(traj.shape[1])],
                   ([str(t), fmt(sigmas[t])] + [fmt(v) for v in traj[t]] for t in range(traj.shape[0])))


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    spec = cfg.to_scenario()
    if args.strategies:
        wanted = [s.strip() for s in args.strategies.split(",") if s.strip()]
        known = {s.name for s in spec.strategies}
        missing = [w for w in wanted if w not in known]
        if missing:
            raise ConfigError(f"strategies: not in config: {', '.join(missing)}")
        spec = replace(spec, strategies=tuple(s for s in spec.strategies if s.name in wanted))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for result in run(spec):
        _write_outputs(result, spec, cfg, out)
        print(json.dumps(_summary_record(result)))
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not args.scales and not args.alphas:
        raise ConfigError("sweep needs --scales and/or --alphas")
    cfg = _resolve_config(args)
    spec = cfg.to_scenario()
    rows = sweep(spec, args.scales or [], args.alphas or [])
    path = Path(args.output) if args.output else Path(cfg.output_dir) / "sweep.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(path,
               ["strategy", "parameter_name", "parameter_value", "mean", "std",
                "kl_binned", "kl_gauss_fit", "seed"],
               ([r.strategy, r.parameter_name, fmt(r.parameter_value), fmt(r.result.mean),
                 fmt(r.result.std), fmt(r.result.kl_binned), fmt(r.result.kl_gauss_fit),
                 str(r.result.seed)] for r in rows))
    print(path)
    return EXIT_OK


def cmd_schedule(args) -> int:
    kind = schedules.ScheduleKind(args.kind)
    try:
        spec = schedules.ScheduleSpec(kind=kind, steps=args.steps, sigma_init=args.sigma_init,
                                      sigma_final=args.sigma_final, shift=args.shift,
                                      logsnr_min=args.min, logsnr_max=args.max)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    w = sys.stdout.write
    if kind is schedules.ScheduleKind.VE_LOG_LINEAR:
        w("step,sigma\n")
        for i, s in enumerate(schedules.ve_log_linear(spec)):
            w(f"{i},{fmt(s)}\n")
        return EXIT_OK
    if kind is schedules.ScheduleKind.VP_SHIFTED_COSINE:
        levels = schedules.vp_shifted_cosine_schedule(spec)
    else:
        levels = schedules.logsnr_linear_schedule(spec)
    w("step,sigma,alpha,logsnr\n")
    for i, lv in enumerate(levels):
        w(f"{i},{fmt(lv.sigma)},{fmt(lv.alpha)},{fmt(schedules.logsnr(lv))}\n")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_checks

    return EXIT_OK if run_checks() else EXIT_FAIL


def _add_run_options(p: argparse.ArgumentParser):
    p.add_argument("config", nargs="?", help="JSON run config")
    p.add_argument("--appendix-defaults", action="store_true",
                   help="use the built-in guidance-comparison configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--output-dir")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scorecompose", description="Score composition on 1D Gaussian mixtures.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run the guidance comparison")
    _add_run_options(p)
    p.add_argument("--strategies", help="comma-separated subset of the configured strategies")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep TC-CFG scales and score-averaging weights")
    _add_run_options(p)
    p.add_argument("--scales", type=_float_list)
    p.add_argument("--alphas", type=_float_list)
    p.add_argument("--output", help="CSV path (default: <output_dir>/sweep.csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schedule", help="print a noise schedule as CSV")
    p.add_argument("kind", choices=[k.value for k in schedules.ScheduleKind])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--sigma-init", type=float, default=80.0)
    p.add_argument("--sigma-final", type=float, default=0.005)
    p.add_argument("--shift", type=float, default=0.5)
    p.add_argument("--min", type=float, default=-8.0)
    p.add_argument("--max", type=float, default=10.0)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("selftest", help="run the fast invariant checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
