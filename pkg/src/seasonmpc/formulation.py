"""Translation of a scheduling window into a sparse mixed-binary LP.

A window couples a slice of the exogenous series with storage boundary
conditions. The builder emits, per step, the demand and source balances,
the storage state recursions, charge and discharge caps, and the heat
pump coupling, plus optional end-level rows. State-of-energy bounds are
expressed as variable bounds rather than rows.

Charge/discharge exclusivity binaries exist only at steps where a buy or
sell price is negative; everywhere else the caps are the plain power
bounds, which is lossless because simultaneous charge and discharge can
only pay off at negative prices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np
import scipy.sparse as sp

from .network import (
    Arc,
    EnergyNetwork,
    Node,
    STORAGE_NODES,
    SeriesBundle,
    inflow_nodes,
    outflow_nodes,
    validate_network,
)

__all__ = [
    "FixedAt",
    "FREE",
    "FORCE_MIN",
    "FORCE_MAX",
    "EndCondition",
    "BoundaryConditions",
    "WindowSpec",
    "MilpInstance",
    "FormulationError",
    "build_milp",
    "flag_binary_steps",
    "constraint_audit",
    "AuditReport",
    "grid_exchange_cost",
]


class _EndToken:
    __slots__ = ("_name",)

    def __init__(self, name: str) -> None:
        self._name = name

    def __repr__(self) -> str:
        return self._name


#: Leave the final state unconstrained.
FREE = _EndToken("FREE")
#: Force the final state to the storage's minimum level.
FORCE_MIN = _EndToken("FORCE_MIN")
#: Force the final state to the storage's maximum level.
FORCE_MAX = _EndToken("FORCE_MAX")


@dataclass(frozen=True)
class FixedAt:
    """Pin the final state of energy to ``level_kwh``."""

    level_kwh: float


EndCondition = Union[FixedAt, _EndToken]


class FormulationError(ValueError):
    """The window or network cannot be turned into a well-formed instance."""


@dataclass(frozen=True)
class BoundaryConditions:
    """Initial states and end-of-window conditions per storage node."""

    e_init: Mapping[Node, float]
    end: Mapping[Node, EndCondition] = field(
        default_factory=lambda: {n: FREE for n in STORAGE_NODES}
    )

    def end_for(self, node: Node) -> EndCondition:
        return self.end.get(node, FREE)


@dataclass(frozen=True)
class WindowSpec:
    """One optimization window: an absolute offset, a series slice and boundaries."""

    start_step: int
    length: int
    series: SeriesBundle
    boundary: BoundaryConditions
    dt_hours: float = 1.0

    def __post_init__(self) -> None:
        if self.length < 1:
            raise FormulationError(f"window length {self.length} must be >= 1")
        if self.series.n_steps != self.length:
            raise FormulationError(
                f"series slice has {self.series.n_steps} steps, window wants {self.length}"
            )
        if self.dt_hours <= 0.0:
            raise FormulationError(f"dt_hours={self.dt_hours} must be positive")


@dataclass
class MilpInstance:
    """Sparse mixed-binary LP in row form ``A x (sense) rhs`` with box bounds.

    ``sense`` entries are ``'='``, ``'<'`` (at most) or ``'>'`` (at least).
    ``row_kinds``/``row_nodes``/``row_steps`` tag every row with the balance
    it encodes, which drives the audit and the LP-file row names. The index
    maps locate the flow variable of an arc and the state variable of a
    storage at each step.
    """

    name: str
    n_steps: int
    dt_hours: float
    var_names: list[str]
    lb: np.ndarray
    ub: np.ndarray
    is_binary: np.ndarray
    obj: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    row_kinds: list[str]
    row_nodes: list[str]
    row_steps: list[int]
    flow_index: dict[Arc, np.ndarray]
    state_index: dict[Node, np.ndarray]
    binary_index: dict[Node, dict[int, int]]

    @property
    def n_vars(self) -> int:
        return self.obj.shape[0]

    @property
    def n_rows(self) -> int:
        return self.rhs.shape[0]

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.obj @ np.asarray(x, dtype=float))

    def row_name(self, i: int) -> str:
        node = self.row_nodes[i]
        step = self.row_steps[i]
        parts = [self.row_kinds[i]]
        if node:
            parts.append(node)
        if step >= 0:
            parts.append(f"t{step:04d}")
        return "_".join(parts)

    def flows(self, x: np.ndarray, arc: Arc) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.flow_index[arc]]

    def states(self, x: np.ndarray, node: Node) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.state_index[node]]


def flag_binary_steps(win: WindowSpec) -> np.ndarray:
    """Steps that need charge/discharge exclusivity binaries.

    A step is flagged when its buy or its sell price is negative; at such
    prices destroying energy through a simultaneous charge and discharge
    can be profitable, so the exclusivity must be enforced explicitly.
    Returns a sorted integer array of window-local step indices.
    """
    mask = (win.series.c_buy < 0.0) | (win.series.c_sell < 0.0)
    return np.flatnonzero(mask)


# Row kind labels used by the builder and the audit.
KIND_DEMAND = "demand_balance"
KIND_SOURCE_BALANCE = "source_balance"
KIND_SOURCE_LIMIT = "source_limit"
KIND_STATE = "state_recursion"
KIND_END = "end_level"
KIND_CHARGE = "charge_limit"
KIND_DISCHARGE = "discharge_limit"
KIND_HP_RATIO = "conversion_ratio"
KIND_HP_CAP = "conversion_cap"


def build_milp(net: EnergyNetwork, win: WindowSpec) -> MilpInstance:
    """Build the dispatch problem of one window as a :class:`MilpInstance`.

    Variables are, in deterministic order: one nonnegative flow per arc and
    step, one state-of-energy per storage and step (bounded by the device's
    level range), and one binary per storage at each flagged step. Rows
    encode the electric and heat demand balances, the PV balance, the solar
    thermal and AC availability caps, the state recursions seeded with the
    boundary's initial levels, charge and discharge caps (with binary
    coupling at flagged steps), the heat pump conversion ratio and output
    cap, and one end-level row per storage whose end condition requires it.
    The objective prices grid imports at ``c_buy`` and exports at
    ``c_sell``, scaled by the step width.
    """
    violations = validate_network(net)
    if violations:
        raise FormulationError("invalid network: " + "; ".join(violations))

    T = win.length
    dt = win.dt_hours
    s = win.series
    arcs = sorted(net.arcs, key=lambda a: (a[0].value, a[1].value))
    n_arcs = len(arcs)
    arc_pos = {arc: k for k, arc in enumerate(arcs)}

    for node in STORAGE_NODES:
        spar = net.storage_params[node]
        cond = win.boundary.end_for(node)
        if isinstance(cond, FixedAt) and not spar.e_min <= cond.level_kwh <= spar.e_max:
            raise FormulationError(
                f"end level {cond.level_kwh} for {node} outside [{spar.e_min}, {spar.e_max}]"
            )
        e0 = win.boundary.e_init.get(node)
        if e0 is None:
            raise FormulationError(f"boundary is missing e_init for {node}")
        if not spar.e_min - 1e-9 <= e0 <= spar.e_max + 1e-9:
            raise FormulationError(
                f"e_init {e0} for {node} outside [{spar.e_min}, {spar.e_max}]"
            )

    binary_steps = flag_binary_steps(win)
    flagged = {int(t) for t in binary_steps}

    n_flow = n_arcs * T
    n_state = 2 * T
    n_bin = 2 * len(flagged)
    n_vars = n_flow + n_state + n_bin

    var_names: list[str] = [""] * n_vars
    lb = np.zeros(n_vars)
    ub = np.full(n_vars, np.inf)
    is_binary = np.zeros(n_vars, dtype=bool)
    obj = np.zeros(n_vars)

    flow_index: dict[Arc, np.ndarray] = {
        arc: np.arange(k, n_flow, n_arcs, dtype=np.intp) for arc, k in arc_pos.items()
    }
    for (a, b), idx in flow_index.items():
        for t in range(T):
            var_names[idx[t]] = f"p_{a}_{b}_t{t:04d}"

    state_index: dict[Node, np.ndarray] = {}
    for k, node in enumerate(STORAGE_NODES):
        idx = n_flow + np.arange(k, n_state, 2, dtype=np.intp)
        state_index[node] = idx
        spar = net.storage_params[node]
        lb[idx] = spar.e_min
        ub[idx] = spar.e_max
        for t in range(T):
            var_names[idx[t]] = f"e_{node}_t{t:04d}"

    binary_index: dict[Node, dict[int, int]] = {n: {} for n in STORAGE_NODES}
    j = n_flow + n_state
    for t in sorted(flagged):
        for node in STORAGE_NODES:
            binary_index[node][t] = j
            var_names[j] = f"y_{node}_t{t:04d}"
            lb[j], ub[j] = 0.0, 1.0
            is_binary[j] = True
            j += 1

    # Objective: grid purchases cost, grid injections earn.
    for sink in outflow_nodes(net, Node.PG):
        obj[flow_index[(Node.PG, sink)]] += dt * s.c_buy
    for src in inflow_nodes(net, Node.PG):
        obj[flow_index[(src, Node.PG)]] -= dt * s.c_sell

    rows_i: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    sense: list[str] = []
    rhs: list[float] = []
    row_kinds: list[str] = []
    row_nodes: list[str] = []
    row_steps: list[int] = []

    def new_row(kind: str, node: str, step: int, sgn: str, b: float) -> int:
        row_kinds.append(kind)
        row_nodes.append(node)
        row_steps.append(step)
        sense.append(sgn)
        rhs.append(b)
        return len(rhs) - 1

    def put(row: int, col: int, val: float) -> None:
        rows_i.append(row)
        cols.append(col)
        vals.append(val)

    in_of = {n: inflow_nodes(net, n) for n in Node}
    out_of = {n: outflow_nodes(net, n) for n in Node}

    for t in range(T):
        # Demands must be met exactly.
        for node, demand in ((Node.DE, s.d_de[t]), (Node.DH, s.d_dh[t])):
            r = new_row(KIND_DEMAND, node.value, t, "=", float(demand))
            for src in in_of[node]:
                put(r, flow_index[(src, node)][t], 1.0)

        # All PV production is routed somewhere (the grid absorbs excess).
        r = new_row(KIND_SOURCE_BALANCE, Node.PV.value, t, "=", float(s.p_pv[t]))
        for snk in out_of[Node.PV]:
            put(r, flow_index[(Node.PV, snk)][t], 1.0)

        # Solar thermal and AC byproduct may be spilled: usage at most production.
        for node, avail in ((Node.ST, s.p_st[t]), (Node.AC, s.p_ac[t])):
            r = new_row(KIND_SOURCE_LIMIT, node.value, t, "<", float(avail))
            for snk in out_of[node]:
                put(r, flow_index[(node, snk)][t], 1.0)

        # State of energy recursion, seeded with the boundary level at t=0.
        for node in STORAGE_NODES:
            spar = net.storage_params[node]
            if t == 0:
                b = spar.rho * float(win.boundary.e_init[node])
            else:
                b = 0.0
            r = new_row(KIND_STATE, node.value, t, "=", b)
            put(r, state_index[node][t], 1.0)
            if t > 0:
                put(r, state_index[node][t - 1], -spar.rho)
            for src in in_of[node]:
                put(r, flow_index[(src, node)][t], -dt * spar.eta_ch)
            for snk in out_of[node]:
                put(r, flow_index[(node, snk)][t], dt / spar.eta_dis)

        # Charge and discharge caps, coupled through a binary at flagged steps.
        for node in STORAGE_NODES:
            spar = net.storage_params[node]
            r = new_row(KIND_CHARGE, node.value, t, "<", 0.0 if t in flagged else spar.p_ch_max)
            for src in in_of[node]:
                put(r, flow_index[(src, node)][t], 1.0)
            if t in flagged:
                put(r, binary_index[node][t], -spar.p_ch_max)

            r = new_row(KIND_DISCHARGE, node.value, t, "<", spar.p_dis_max)
            for snk in out_of[node]:
                put(r, flow_index[(node, snk)][t], 1.0)
            if t in flagged:
                put(r, binary_index[node][t], spar.p_dis_max)

        # Heat pump: heat out equals cop times electricity in, capped output.
        hp = net.heat_pump
        r = new_row(KIND_HP_RATIO, Node.HP.value, t, "=", 0.0)
        for snk in out_of[Node.HP]:
            put(r, flow_index[(Node.HP, snk)][t], 1.0)
        for src in in_of[Node.HP]:
            put(r, flow_index[(src, Node.HP)][t], -hp.cop)
        r = new_row(KIND_HP_CAP, Node.HP.value, t, "<", hp.p_heat_max)
        for snk in out_of[Node.HP]:
            put(r, flow_index[(Node.HP, snk)][t], 1.0)

    # End-of-window levels. FREE emits no row.
    for node in STORAGE_NODES:
        spar = net.storage_params[node]
        cond = win.boundary.end_for(node)
        if cond is FREE:
            continue
        if cond is FORCE_MIN:
            level = spar.e_min
        elif cond is FORCE_MAX:
            level = spar.e_max
        else:
            level = cond.level_kwh
        r = new_row(KIND_END, node.value, -1, "=", float(level))
        put(r, state_index[node][T - 1], 1.0)

    A = sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows_i), np.asarray(cols))),
        shape=(len(rhs), n_vars),
    )
    for arr in (lb, ub, is_binary, obj):
        arr.setflags(write=False)
    sense_arr = np.asarray(sense, dtype="<U1")
    rhs_arr = np.asarray(rhs, dtype=float)
    sense_arr.setflags(write=False)
    rhs_arr.setflags(write=False)

    return MilpInstance(
        name=f"window_s{win.start_step}_T{T}",
        n_steps=T,
        dt_hours=dt,
        var_names=var_names,
        lb=lb,
        ub=ub,
        is_binary=is_binary,
        obj=obj,
        A=A,
        sense=sense_arr,
        rhs=rhs_arr,
        row_kinds=row_kinds,
        row_nodes=row_nodes,
        row_steps=row_steps,
        flow_index=flow_index,
        state_index=state_index,
        binary_index=binary_index,
    )


@dataclass
class AuditReport:
    """Structural tallies of an instance, for cross-checking the builder."""

    row_tallies: dict[tuple[str, str], int]
    state_bound_entries: int
    impossible_rows: list[tuple[int, str]]
    n_rows: int
    n_vars: int
    n_binaries: int

    def count(self, kind: str, node: str = "") -> int:
        if node:
            return self.row_tallies.get((kind, node), 0)
        return sum(v for (k, _), v in self.row_tallies.items() if k == kind)


def constraint_audit(inst: MilpInstance) -> AuditReport:
    """Tally rows per balance kind and flag structurally impossible rows.

    State bounds are variable bounds, not rows; they are reported through
    ``state_bound_entries`` (one per storage state variable with a finite
    box). A row with no coefficients is impossible when its sense and
    right-hand side cannot be satisfied by an empty sum.
    """
    tallies: dict[tuple[str, str], int] = {}
    for kind, node in zip(inst.row_kinds, inst.row_nodes):
        key = (kind, node)
        tallies[key] = tallies.get(key, 0) + 1

    nnz_per_row = np.diff(inst.A.indptr)
    impossible: list[tuple[int, str]] = []
    for i in np.flatnonzero(nnz_per_row == 0):
        b = inst.rhs[i]
        sgn = inst.sense[i]
        bad = (sgn == "=" and b != 0.0) or (sgn == "<" and b < 0.0) or (sgn == ">" and b > 0.0)
        if bad:
            impossible.append((int(i), f"empty row with sense {sgn} rhs {b}"))

    state_bounded = 0
    for idx in inst.state_index.values():
        finite = np.isfinite(inst.lb[idx]) & np.isfinite(inst.ub[idx])
        state_bounded += int(finite.sum())

    return AuditReport(
        row_tallies=tallies,
        state_bound_entries=state_bounded,
        impossible_rows=impossible,
        n_rows=inst.n_rows,
        n_vars=inst.n_vars,
        n_binaries=int(inst.is_binary.sum()),
    )


def grid_exchange_cost(win: WindowSpec, inst: MilpInstance, x: np.ndarray) -> float:
    """Recompute the objective from the grid flows alone.

    Independent of ``inst.obj``: sums ``dt * (c_buy * imports - c_sell *
    exports)`` over the window from the flow values, which must agree with
    ``inst.objective_value`` on any solution.
    """
    x = np.asarray(x, dtype=float)
    buy = np.zeros(win.length)
    sell = np.zeros(win.length)
    for (a, b), idx in inst.flow_index.items():
        if a is Node.PG:
            buy += x[idx]
        if b is Node.PG:
            sell += x[idx]
    return float(np.sum(win.dt_hours * (win.series.c_buy * buy - win.series.c_sell * sell)))
