"""Batch experiment driver.

Verbs: ``synth`` (generate a synthetic case on disk), ``full-horizon``
(the year benchmark), ``rolling`` (a rolling-horizon strategy),
``min-horizon`` (minimum-prediction-horizon search), ``derive-targets``
(extract hourly heat-storage targets from a benchmark) and ``report``
(tables and plots from saved traces). Exit code 0 is success, 2 an input
or configuration problem, 3 an infeasible optimization.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .data import (
    CaseConfig,
    IngestError,
    SyntheticSpec,
    ingest,
    load_targets_csv,
    write_synthetic_case,
    write_targets_csv,
)
from .formulation import build_milp
from .horizon import (
    RollingPolicy,
    SimulationTrace,
    WindowInfeasibleError,
    YearBoundary,
    derive_targets,
    min_prediction_horizon,
    run_rolling,
    solve_full_horizon,
)
from .network import Node
from .report import SummaryRow, emit_report, trace_from_csv, trace_to_csv
from .solver import SolverConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="case configuration YAML")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument(
        "--engine", default="auto", choices=["auto", "simplex", "highs"],
        help="LP engine selection",
    )
    p.add_argument("--dump-lp", metavar="DIR", default=None, help="dump window LP files")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="seasonmpc",
        description="Yearly scheduling of a building electricity-heat system "
        "with seasonal storage.",
    )
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synth", help="generate a synthetic case (CSVs plus config)")
    p.add_argument("--out", default="synth_case")
    p.add_argument("--days", type=int, default=365)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--year", type=int, default=2021)

    p = sub.add_parser("full-horizon", help="solve the whole year at once")
    _add_common(p)

    p = sub.add_parser("rolling", help="simulate a rolling-horizon strategy")
    _add_common(p)
    p.add_argument(
        "--strategy", required=True, choices=["hybrid", "fixed-level", "free"]
    )
    p.add_argument("--horizon-days", type=int, required=True)
    p.add_argument("--control-days", type=int, default=1)
    p.add_argument("--targets", default=None, help="targets CSV (hybrid strategy)")

    p = sub.add_parser("min-horizon", help="minimum prediction horizon search")
    _add_common(p)
    p.add_argument("--day", type=int, default=None, help="single day index (0-based)")
    p.add_argument("--all-days", action="store_true")
    p.add_argument("--max-days", type=int, default=42)
    p.add_argument(
        "--benchmark-trace", default=None,
        help="trace CSV supplying the per-day initial states",
    )

    p = sub.add_parser("derive-targets", help="hourly SH targets from a benchmark")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="target CSV path")
    p.add_argument("--trace", default=None, help="existing benchmark trace CSV")
    p.add_argument(
        "--engine", default="auto", choices=["auto", "simplex", "highs"]
    )

    p = sub.add_parser("report", help="tables and plots from saved traces")
    p.add_argument("--out", default="report")
    p.add_argument("--benchmark", default=None, help="benchmark trace CSV")
    p.add_argument(
        "--trace", action="append", default=[], metavar="PATH",
        help="strategy trace CSV (repeatable)",
    )
    p.add_argument(
        "--infeasible", action="append", default=[], metavar="METHOD:HORIZON[:DAY]",
        help="record an infeasible experiment row (repeatable)",
    )
    return ap


def _solver_config(args) -> SolverConfig:
    return SolverConfig(engine=args.engine)


def _load_case(args) -> tuple[CaseConfig, "np.ndarray"]:
    cfg = CaseConfig.from_yaml(args.config)
    bundle = ingest(cfg)
    return cfg, bundle


def _dump_full_lp(args, cfg, bundle) -> None:
    from .formulation import BoundaryConditions, FixedAt, WindowSpec
    from .lp_io import write_lp

    boundary = cfg.year_boundary()
    ends = {n: FixedAt(boundary.e_end[n]) for n in (Node.SE, Node.SH)}
    win = WindowSpec(0, bundle.n_steps, bundle, BoundaryConditions(boundary.e_init, ends))
    inst = build_milp(cfg.network(), win)
    out = Path(args.dump_lp)
    out.mkdir(parents=True, exist_ok=True)
    path = write_lp(inst, out / f"{inst.name}.lp")
    print(f"wrote {path}")


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(n_days=args.days, seed=args.seed)
    cfg_path, bundle = write_synthetic_case(args.out, spec, year=args.year)
    neg = int(np.sum((bundle.c_buy < 0) | (bundle.c_sell < 0)))
    print(f"wrote synthetic case to {cfg_path.parent} ({args.days} days, seed {args.seed})")
    print(f"config: {cfg_path}")
    print(f"negative-price hours: {neg}")
    return EXIT_OK


def _cmd_full_horizon(args) -> int:
    cfg, bundle = _load_case(args)
    if args.dump_lp:
        _dump_full_lp(args, cfg, bundle)
    trace = solve_full_horizon(
        cfg.network(), bundle, cfg.year_boundary(), cfg=_solver_config(args)
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = trace_to_csv(trace, out / "trace_full-horizon.csv")
    emit_report([], trace, out)
    print(f"full-horizon cost: {trace.total_cost:.2f} EUR "
          f"({trace.total_wall_time:.1f} s, trace at {path})")
    return EXIT_OK


def _policy_for(args) -> RollingPolicy:
    if args.strategy == "hybrid":
        if not args.targets:
            raise IngestError("hybrid strategy needs --targets")
        targets = load_targets_csv(args.targets)
        return RollingPolicy.hybrid(targets, args.horizon_days, args.control_days)
    if args.strategy == "fixed-level":
        return RollingPolicy.fixed_level(args.horizon_days, args.control_days)
    return RollingPolicy(
        args.horizon_days, args.control_days, sh_end="free", se_end="free",
        label=f"free-{args.horizon_days}d",
    )


def _cmd_rolling(args) -> int:
    cfg, bundle = _load_case(args)
    policy = _policy_for(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.time_grid(control_steps=24 * args.control_days)
    try:
        trace = run_rolling(
            cfg.network(), bundle, policy, cfg.year_boundary(),
            n_days=grid.n_steps // 24, dt_hours=grid.dt_hours,
            cfg=_solver_config(args), dump_lp_dir=args.dump_lp,
        )
    except WindowInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        emit_report(
            [], None, out,
            extra_rows=[SummaryRow.infeasible(policy.label, args.horizon_days, exc.day)],
            stem=f"results_{policy.label}",
        )
        return EXIT_INFEASIBLE
    path = trace_to_csv(trace, out / f"trace_{policy.label}.csv")
    print(f"{policy.label} cost: {trace.total_cost:.2f} EUR "
          f"({trace.total_wall_time:.1f} s, trace at {path})")
    return EXIT_OK


def _day_start_states(trace: SimulationTrace, boundary: YearBoundary, day: int):
    if day == 0:
        return dict(boundary.e_init)
    h = day * 24 - 1
    return {n: float(trace.states[n][h]) for n in (Node.SE, Node.SH)}


def _cmd_min_horizon(args) -> int:
    cfg, bundle = _load_case(args)
    net = cfg.network()
    boundary = cfg.year_boundary()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    grid = cfg.time_grid()
    days = range(grid.n_steps // grid.control_steps) if args.all_days else [args.day or 0]
    bench = None
    if args.benchmark_trace:
        bench = trace_from_csv(args.benchmark_trace)
    elif args.all_days or (args.day or 0) > 0:
        print("solving full-horizon benchmark for per-day initial states...")
        bench = solve_full_horizon(net, bundle, boundary, cfg=_solver_config(args))

    rows = []
    worst = 0
    for day in days:
        e_init = (
            _day_start_states(bench, boundary, day) if bench is not None
            else dict(boundary.e_init)
        )
        res = min_prediction_horizon(
            net, bundle, day, args.max_days, e_init=e_init, cfg=_solver_config(args)
        )
        rows.append((day, res.days if res.found else ""))
        worst = max(worst, res.days if res.found else args.max_days + 1)
        logger.info("day %d: min horizon %s", day, res.days if res.found else ">max")

    with (out / "min_horizon.csv").open("w") as fh:
        fh.write("day,min_horizon_days\n")
        for day, v in rows:
            fh.write(f"{day},{v}\n")
    shown = f"{worst}" if worst <= args.max_days else f">{args.max_days}"
    print(f"maximum minimum prediction horizon: {shown} days")
    return EXIT_OK


def _cmd_derive_targets(args) -> int:
    cfg = CaseConfig.from_yaml(args.config)
    if args.trace:
        trace = trace_from_csv(args.trace)
    else:
        bundle = ingest(cfg)
        trace = solve_full_horizon(
            cfg.network(), bundle, cfg.year_boundary(),
            cfg=SolverConfig(engine=args.engine),
        )
    targets = derive_targets(trace, year_hours=cfg.year_hours)
    path = write_targets_csv(args.out, targets)
    print(f"wrote {targets.n_hours} hourly targets to {path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    benchmark = trace_from_csv(args.benchmark) if args.benchmark else None
    traces = [trace_from_csv(p) for p in args.trace]
    extra = []
    for spec in args.infeasible:
        parts = spec.split(":")
        if len(parts) < 2:
            raise IngestError(f"--infeasible wants METHOD:HORIZON[:DAY], got {spec!r}")
        day = int(parts[2]) if len(parts) > 2 else None
        extra.append(SummaryRow.infeasible(parts[0], int(parts[1]), day))
    paths = emit_report(traces, benchmark, args.out, extra_rows=extra)
    for kind, p in paths.items():
        print(f"{kind}: {p}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "full-horizon": _cmd_full_horizon,
    "rolling": _cmd_rolling,
    "min-horizon": _cmd_min_horizon,
    "derive-targets": _cmd_derive_targets,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.verb](args)
    except (IngestError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except WindowInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
