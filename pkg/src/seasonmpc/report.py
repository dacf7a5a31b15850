"""Result tables, state-of-energy plots and trace persistence.

A report compares simulation traces against the full-horizon benchmark:
one table row per method (cost, suboptimality gap, runtime) plus an SVG
of the heat-storage state over the year with one curve per method and a
CSV of the plotted points. Infeasible experiments appear as rows with an
``infeasible`` status and empty numeric cells.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .horizon import SimulationTrace, YearBoundary, suboptimality_gap
from .network import Node

__all__ = [
    "SummaryRow",
    "emit_report",
    "trace_to_csv",
    "trace_from_csv",
]


@dataclass
class SummaryRow:
    """One line of the results table."""

    method: str
    horizon_days: int | None
    status: str
    cost_eur: float | None
    gap: float | None
    runtime_s: float | None

    @classmethod
    def infeasible(cls, method: str, horizon_days: int | None, day: int | None = None):
        status = "infeasible" if day is None else f"infeasible (day {day})"
        return cls(method, horizon_days, status, None, None, None)


def _rows_from_traces(
    traces: list[SimulationTrace], benchmark: SimulationTrace | None
) -> list[SummaryRow]:
    rows: list[SummaryRow] = []
    if benchmark is not None:
        rows.append(
            SummaryRow(
                benchmark.label, benchmark.horizon_days, "optimal",
                benchmark.total_cost, 0.0, benchmark.total_wall_time,
            )
        )
    for tr in traces:
        gap = suboptimality_gap(tr, benchmark) if benchmark is not None else None
        rows.append(
            SummaryRow(
                tr.label, tr.horizon_days, "optimal", tr.total_cost, gap,
                tr.total_wall_time,
            )
        )
    return rows


def _fmt(v, digits=2, empty="Infeas."):
    if v is None:
        return empty
    return f"{v:.{digits}f}"


def emit_report(
    traces: list[SimulationTrace],
    benchmark: SimulationTrace | None,
    out_dir: str | Path,
    *,
    extra_rows: list[SummaryRow] | None = None,
    stem: str = "results",
) -> dict[str, Path]:
    """Write the results table (CSV and aligned text) and the SoE plots.

    Returns the paths of the written files keyed by kind. ``extra_rows``
    carries experiments without a trace, typically infeasible ones.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = _rows_from_traces(traces, benchmark) + list(extra_rows or [])

    csv_path = out_dir / f"{stem}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "horizon_days", "status", "cost_eur", "gap_pct", "runtime_s"])
        for r in rows:
            writer.writerow(
                [
                    r.method,
                    "" if r.horizon_days is None else r.horizon_days,
                    r.status,
                    "" if r.cost_eur is None else f"{r.cost_eur:.2f}",
                    "" if r.gap is None else f"{100.0 * r.gap:.2f}",
                    "" if r.runtime_s is None else f"{r.runtime_s:.2f}",
                ]
            )

    txt_path = out_dir / f"{stem}.txt"
    header = f"{'Method':<22} {'Horizon (days)':>14} {'Costs (EUR)':>12} {'Subopt. gap':>12} {'Runtime (s)':>12}"
    lines = [header, "-" * len(header)]
    for r in rows:
        gap_txt = "Infeas." if r.gap is None and r.cost_eur is None else (
            "" if r.gap is None else f"{100.0 * r.gap:.2f}%"
        )
        lines.append(
            f"{r.method:<22} {r.horizon_days if r.horizon_days is not None else '':>14} "
            f"{_fmt(r.cost_eur):>12} {gap_txt:>12} {_fmt(r.runtime_s):>12}"
        )
    txt_path.write_text("\n".join(lines) + "\n")

    paths = {"table_csv": csv_path, "table_txt": txt_path}
    plotted = ([benchmark] if benchmark is not None else []) + list(traces)
    if plotted:
        paths.update(_plot_soe(plotted, out_dir, stem))
    return paths


def _plot_soe(traces: list[SimulationTrace], out_dir: Path, stem: str) -> dict[str, Path]:
    svg_path = out_dir / f"{stem}_soe_sh.svg"
    pts_path = out_dir / f"{stem}_soe_points.csv"

    fig, ax = plt.subplots(figsize=(9, 4))
    for tr in traces:
        hours = np.arange(tr.n_steps) * tr.dt_hours
        ax.plot(hours, tr.states[Node.SH], label=tr.label, linewidth=1.0)
    ax.set_xlabel("hour of year")
    ax.set_ylabel("heat storage state of energy (kWh)")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)

    n = max(tr.n_steps for tr in traces)
    with pts_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour"] + [tr.label for tr in traces])
        for h in range(n):
            row = [h]
            for tr in traces:
                row.append(
                    f"{tr.states[Node.SH][h]:.6f}" if h < tr.n_steps else ""
                )
            writer.writerow(row)
    return {"soe_svg": svg_path, "soe_points": pts_path}


# ---------------------------------------------------------------------------
# trace persistence


def trace_to_csv(trace: SimulationTrace, path: str | Path) -> Path:
    """Write the implemented dispatch: hour, flows, states and window id."""
    path = Path(path)
    arcs = sorted(trace.flows, key=lambda a: (a[0].value, a[1].value))
    with path.open("w", newline="") as fh:
        fh.write("# seasonmpc-trace v1\n")
        fh.write(f"# label: {trace.label}\n")
        fh.write(f"# benchmark: {int(trace.is_benchmark)}\n")
        fh.write(f"# dt_hours: {trace.dt_hours!r}\n")
        fh.write(f"# horizon_days: {trace.horizon_days if trace.horizon_days is not None else ''}\n")
        fh.write(f"# total_cost: {trace.total_cost!r}\n")
        fh.write(f"# total_wall_time: {trace.total_wall_time!r}\n")
        for node in (Node.SE, Node.SH):
            fh.write(f"# e_init_{node}: {trace.boundary.e_init[node]!r}\n")
            fh.write(f"# e_end_{node}: {trace.boundary.e_end[node]!r}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["hour"]
            + [f"p_{a}_{b}" for a, b in arcs]
            + ["e_SE", "e_SH", "window_id"]
        )
        for t in range(trace.n_steps):
            writer.writerow(
                [t]
                + [repr(float(trace.flows[arc][t])) for arc in arcs]
                + [
                    repr(float(trace.states[Node.SE][t])),
                    repr(float(trace.states[Node.SH][t])),
                    int(trace.window_ids[t]),
                ]
            )
    return path


def trace_from_csv(path: str | Path) -> SimulationTrace:
    """Load a trace written by :func:`trace_to_csv` (window metadata is gone)."""
    path = Path(path)
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    header: list[str] | None = None
    with path.open(newline="") as fh:
        for raw in fh:
            if raw.startswith("#"):
                if ":" in raw:
                    key, _, val = raw[1:].partition(":")
                    meta[key.strip()] = val.strip()
                continue
            rows.append(next(csv.reader([raw])))
    if not rows:
        raise ValueError(f"{path}: no table in trace file")
    header, *data = rows
    cols = {name: k for k, name in enumerate(header)}

    n = len(data)
    flows = {}
    for name, k in cols.items():
        if name.startswith("p_"):
            _, a, b = name.split("_")
            flows[(Node(a), Node(b))] = np.asarray([float(r[k]) for r in data])
    states = {
        Node.SE: np.asarray([float(r[cols["e_SE"]]) for r in data]),
        Node.SH: np.asarray([float(r[cols["e_SH"]]) for r in data]),
    }
    window_ids = np.asarray([int(r[cols["window_id"]]) for r in data])

    boundary = YearBoundary(
        e_init={n_: float(meta.get(f"e_init_{n_}", "nan")) for n_ in (Node.SE, Node.SH)},
        e_end={n_: float(meta.get(f"e_end_{n_}", "nan")) for n_ in (Node.SE, Node.SH)},
    )
    horizon = meta.get("horizon_days", "")
    return SimulationTrace(
        flows=flows,
        states=states,
        window_ids=window_ids,
        windows=[],
        total_cost=float(meta.get("total_cost", "nan")),
        dt_hours=float(meta.get("dt_hours", "1.0")),
        label=meta.get("label", path.stem),
        is_benchmark=bool(int(meta.get("benchmark", "0"))),
        boundary=boundary,
        total_wall_time=float(meta.get("total_wall_time", "0.0")),
        horizon_days=int(horizon) if horizon else None,
    )
