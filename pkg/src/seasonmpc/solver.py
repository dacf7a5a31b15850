"""Exact solving of dispatch instances.

Two interchangeable LP engines sit behind one contract: the in-package
bounded-variable simplex (deterministic, with duals) for small instances,
and scipy's HiGHS backend for year-scale ones. Binaries are handled by a
deterministic best-bound branch-and-bound that branches on the most
fractional binary. Every optimal result can be re-checked independently
row by row with :func:`verify_solution`.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .formulation import MilpInstance
from .network import Node
from .simplex import solve_bounded_lp

__all__ = [
    "SolveStatus",
    "SolverConfig",
    "SolveResult",
    "solve_lp",
    "solve_milp",
    "solve_canonical",
    "verify_solution",
    "ViolationReport",
    "dual_objective",
]


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and engine selection.

    ``engine`` is ``"auto"`` (simplex up to ``simplex_row_limit`` rows,
    HiGHS above), ``"simplex"`` or ``"highs"``. Tolerances are relative.
    """

    feasibility_tol: float = 1e-9
    integrality_tol: float = 1e-6
    node_limit: int = 100_000
    time_limit: float | None = None
    engine: str = "auto"
    simplex_row_limit: int = 400
    milp_method: str = "auto"
    bb_row_limit: int = 2000
    pivot_rule: str = "dantzig_bland"

    def __post_init__(self) -> None:
        if self.feasibility_tol <= 0 or self.integrality_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.engine not in ("auto", "simplex", "highs"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.milp_method not in ("auto", "branch_and_bound", "highs"):
            raise ValueError(f"unknown milp_method {self.milp_method!r}")
        if self.pivot_rule not in ("dantzig_bland", "bland"):
            raise ValueError(f"unknown pivot_rule {self.pivot_rule!r}")


DEFAULT_CONFIG = SolverConfig()


@dataclass
class SolveResult:
    status: SolveStatus
    objective: float
    x: np.ndarray
    duals: np.ndarray | None
    iterations: int
    nodes: int
    wall_time: float
    engine: str
    best_bound: float | None = None
    message: str = ""

    @property
    def gap(self) -> float | None:
        """Relative incumbent-to-bound gap for limit statuses."""
        if self.best_bound is None or not np.isfinite(self.objective):
            return None
        return abs(self.objective - self.best_bound) / max(1.0, abs(self.objective))


def _pick_engine(inst: MilpInstance, cfg: SolverConfig) -> str:
    if cfg.engine != "auto":
        return cfg.engine
    return "simplex" if inst.n_rows <= cfg.simplex_row_limit else "highs"


def _solve_lp_simplex(inst, cfg, lb, ub) -> SolveResult:
    t0 = time.perf_counter()
    res = solve_bounded_lp(
        inst.obj, inst.A, inst.sense, inst.rhs, lb, ub,
        feasibility_tol=cfg.feasibility_tol,
        pivot_rule=cfg.pivot_rule,
    )
    wall = time.perf_counter() - t0
    status = {
        "optimal": SolveStatus.OPTIMAL,
        "infeasible": SolveStatus.INFEASIBLE,
        "unbounded": SolveStatus.UNBOUNDED,
    }[res.status]
    duals = res.duals if status is SolveStatus.OPTIMAL else None
    return SolveResult(
        status=status,
        objective=res.objective,
        x=res.x,
        duals=duals,
        iterations=res.iterations,
        nodes=0,
        wall_time=wall,
        engine="simplex",
        message=f"phase-1 residual {res.infeasibility:.3e}" if status is SolveStatus.INFEASIBLE else "",
    )


def _solve_lp_highs(inst, cfg, lb, ub) -> SolveResult:
    eq = inst.sense == "="
    le = inst.sense == "<"
    ge = inst.sense == ">"
    A = inst.A.tocsr()
    A_eq = A[np.flatnonzero(eq)] if eq.any() else None
    b_eq = inst.rhs[eq] if eq.any() else None
    ub_rows = sp.vstack([A[np.flatnonzero(le)], -A[np.flatnonzero(ge)]]) if (le.any() or ge.any()) else None
    ub_rhs = np.concatenate([inst.rhs[le], -inst.rhs[ge]]) if ub_rows is not None else None
    bounds = np.column_stack([lb, ub])

    options = {
        "primal_feasibility_tolerance": 1e-9,
        "dual_feasibility_tolerance": 1e-9,
    }
    if cfg.time_limit is not None:
        options["time_limit"] = cfg.time_limit
    t0 = time.perf_counter()
    res = linprog(
        inst.obj,
        A_ub=ub_rows,
        b_ub=ub_rhs,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options=options,
    )
    wall = time.perf_counter() - t0
    status = {
        0: SolveStatus.OPTIMAL,
        1: SolveStatus.TIME_LIMIT,
        2: SolveStatus.INFEASIBLE,
        3: SolveStatus.UNBOUNDED,
        4: SolveStatus.INFEASIBLE,
    }.get(res.status, SolveStatus.INFEASIBLE)

    duals = None
    if status is SolveStatus.OPTIMAL:
        duals = np.zeros(inst.n_rows)
        if eq.any():
            duals[np.flatnonzero(eq)] = res.eqlin.marginals
        if ub_rows is not None:
            mi = res.ineqlin.marginals
            n_le = int(le.sum())
            duals[np.flatnonzero(le)] = mi[:n_le]
            duals[np.flatnonzero(ge)] = -mi[n_le:]
    return SolveResult(
        status=status,
        objective=float(res.fun) if status is SolveStatus.OPTIMAL else np.nan,
        x=np.asarray(res.x, dtype=float) if res.x is not None else np.full(inst.n_vars, np.nan),
        duals=duals,
        iterations=int(getattr(res, "nit", 0) or 0),
        nodes=0,
        wall_time=wall,
        engine="highs",
        message=str(res.message),
    )


def solve_lp(
    inst: MilpInstance,
    cfg: SolverConfig = DEFAULT_CONFIG,
    *,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
) -> SolveResult:
    """Solve the instance with binaries relaxed to their box bounds.

    ``lb``/``ub`` override the instance bounds (used by branch-and-bound to
    fix binaries). The result is deterministic for a given engine.
    """
    lb = inst.lb if lb is None else lb
    ub = inst.ub if ub is None else ub
    engine = _pick_engine(inst, cfg)
    if engine == "simplex":
        return _solve_lp_simplex(inst, cfg, lb, ub)
    return _solve_lp_highs(inst, cfg, lb, ub)


def _solve_milp_highs(inst: MilpInstance, cfg: SolverConfig) -> SolveResult:
    """HiGHS branch-and-bound through scipy, for year-scale instances."""
    lo = np.where(inst.sense == ">", inst.rhs, np.where(inst.sense == "=", inst.rhs, -np.inf))
    hi = np.where(inst.sense == "<", inst.rhs, np.where(inst.sense == "=", inst.rhs, np.inf))
    options: dict = {"mip_rel_gap": 1e-9}
    if cfg.time_limit is not None:
        options["time_limit"] = cfg.time_limit
    t0 = time.perf_counter()
    res = milp(
        c=inst.obj,
        constraints=LinearConstraint(inst.A, lo, hi),
        integrality=inst.is_binary.astype(np.uint8),
        bounds=Bounds(inst.lb, inst.ub),
        options=options,
    )
    wall = time.perf_counter() - t0
    status = {
        0: SolveStatus.OPTIMAL,
        1: SolveStatus.TIME_LIMIT,
        2: SolveStatus.INFEASIBLE,
        3: SolveStatus.UNBOUNDED,
    }.get(res.status, SolveStatus.INFEASIBLE)
    x = (
        np.asarray(res.x, dtype=float)
        if res.x is not None
        else np.full(inst.n_vars, np.nan)
    )
    objective = float(res.fun) if res.fun is not None else np.nan
    iterations = 0
    if status is SolveStatus.OPTIMAL and inst.is_binary.any():
        rounded = np.round(x[inst.is_binary])
        drift = float(np.abs(x[inst.is_binary] - rounded).max())
        x[inst.is_binary] = rounded
        if drift > 1e-12:
            # HiGHS integrality tolerance is looser than ours: pin the
            # binaries and re-solve the LP for an exactly integral point
            lbf, ubf = inst.lb.copy(), inst.ub.copy()
            lbf[inst.is_binary] = rounded
            ubf[inst.is_binary] = rounded
            fixed = _solve_lp_highs(inst, cfg, lbf, ubf)
            if fixed.status is SolveStatus.OPTIMAL:
                x = fixed.x
                x[inst.is_binary] = rounded
                objective = fixed.objective
                iterations = fixed.iterations
    return SolveResult(
        status=status,
        objective=objective,
        x=x,
        duals=None,
        iterations=iterations,
        nodes=int(getattr(res, "mip_node_count", 0) or 0),
        wall_time=wall,
        engine="highs-milp",
        best_bound=float(getattr(res, "mip_dual_bound", np.nan))
        if res.fun is not None
        else None,
        message=str(res.message),
    )


def solve_milp(inst: MilpInstance, cfg: SolverConfig = DEFAULT_CONFIG) -> SolveResult:
    """Best-bound branch-and-bound over the instance's binaries.

    Branches on the binary whose relaxation value is closest to 1/2 (ties
    broken by variable index), explores nodes in bound order with a
    deterministic tie-break, and re-solves candidate incumbents with all
    binaries fixed so reported solutions are exactly integral. With no
    binaries this is exactly :func:`solve_lp`. Instances too large for
    per-node LP solves (over ``cfg.bb_row_limit`` rows under the ``auto``
    method) are handed to HiGHS's own branch-and-bound behind the same
    contract.
    """
    bin_idx = np.flatnonzero(inst.is_binary)
    if bin_idx.size == 0:
        return solve_lp(inst, cfg)
    method = cfg.milp_method
    if method == "auto":
        method = "highs" if inst.n_rows > cfg.bb_row_limit else "branch_and_bound"
    if method == "highs":
        return _solve_milp_highs(inst, cfg)

    t0 = time.perf_counter()
    deadline = None if cfg.time_limit is None else t0 + cfg.time_limit
    total_iters = 0
    nodes_solved = 0

    def lp(lbv, ubv):
        nonlocal total_iters, nodes_solved
        r = solve_lp(inst, cfg, lb=lbv, ub=ubv)
        total_iters += r.iterations
        nodes_solved += 1
        return r

    root = lp(inst.lb, inst.ub)
    if root.status is not SolveStatus.OPTIMAL:
        return replace(
            root, nodes=nodes_solved, wall_time=time.perf_counter() - t0,
            message="root relaxation " + root.status.value,
        )

    incumbent: SolveResult | None = None
    inc_obj = np.inf
    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    heapq.heappush(heap, (root.objective, counter, inst.lb.copy(), inst.ub.copy(), root.x))
    limit_status: SolveStatus | None = None
    best_open = root.objective

    while heap:
        best_open = heap[0][0]
        if incumbent is not None and best_open >= inc_obj - 1e-9 * max(1.0, abs(inc_obj)):
            break
        if nodes_solved >= cfg.node_limit:
            limit_status = SolveStatus.NODE_LIMIT
            break
        if deadline is not None and time.perf_counter() > deadline:
            limit_status = SolveStatus.TIME_LIMIT
            break

        bound, _, lbv, ubv, x = heapq.heappop(heap)
        yvals = x[bin_idx]
        frac = np.abs(yvals - np.round(yvals))
        if frac.max() <= cfg.integrality_tol:
            # Candidate: pin every binary and re-solve for an exact point.
            lbf, ubf = lbv.copy(), ubv.copy()
            rounded = np.round(yvals)
            lbf[bin_idx] = rounded
            ubf[bin_idx] = rounded
            cand = lp(lbf, ubf)
            if cand.status is SolveStatus.OPTIMAL and cand.objective < inc_obj - 0.0:
                incumbent = cand
                inc_obj = cand.objective
            continue

        j = int(bin_idx[np.argmin(np.abs(yvals - 0.5))])  # most fractional first
        for fix in (0.0, 1.0):
            lbc, ubc = lbv.copy(), ubv.copy()
            lbc[j] = fix
            ubc[j] = fix
            child = lp(lbc, ubc)
            if child.status is not SolveStatus.OPTIMAL:
                continue
            if incumbent is not None and child.objective >= inc_obj - 1e-9 * max(1.0, abs(inc_obj)):
                continue
            counter += 1
            heapq.heappush(heap, (child.objective, counter, lbc, ubc, child.x))

    wall = time.perf_counter() - t0
    if limit_status is not None:
        open_bound = min((h[0] for h in heap), default=inc_obj)
        base = incumbent if incumbent is not None else replace(root, objective=np.nan)
        return replace(
            base,
            status=limit_status,
            nodes=nodes_solved,
            iterations=total_iters,
            wall_time=wall,
            best_bound=float(open_bound),
            message=f"stopped at {limit_status.value}"
            + ("" if incumbent is not None else ", no incumbent"),
        )
    if incumbent is None:
        return SolveResult(
            status=SolveStatus.INFEASIBLE,
            objective=np.nan,
            x=np.full(inst.n_vars, np.nan),
            duals=None,
            iterations=total_iters,
            nodes=nodes_solved,
            wall_time=wall,
            engine=root.engine,
            message="all binary fixings infeasible",
        )
    return replace(
        incumbent, nodes=nodes_solved, iterations=total_iters, wall_time=wall,
        best_bound=incumbent.objective,
    )


def solve_canonical(
    inst: MilpInstance,
    cfg: SolverConfig = DEFAULT_CONFIG,
    *,
    polish_indices: np.ndarray | None = None,
) -> SolveResult:
    """Solve, then canonicalize among degenerate optima.

    A second LP pins the objective to its optimal value (a 1e-12 relative
    band) and maximizes the summed variables in ``polish_indices`` (by
    default the heat-storage states), producing a reproducible
    representative optimum. Binaries stay fixed at their optimal values
    during the polish.
    """
    base = solve_milp(inst, cfg)
    if base.status is not SolveStatus.OPTIMAL:
        return base
    if polish_indices is None:
        polish_indices = inst.state_index[Node.SH]
    if polish_indices.size == 0:
        return base

    lbv = inst.lb.copy()
    ubv = inst.ub.copy()
    bin_idx = np.flatnonzero(inst.is_binary)
    if bin_idx.size:
        fixed = np.round(base.x[bin_idx])
        lbv[bin_idx] = fixed
        ubv[bin_idx] = fixed

    # A loose band would let the polish drift along near-zero shadow prices
    # (drift scales with band / dual), so pin the objective almost exactly.
    band = 1e-12 * max(1.0, abs(base.objective))
    cap = sp.csr_matrix(inst.obj.reshape(1, -1))
    polished = MilpInstance(
        name=inst.name + "_polish",
        n_steps=inst.n_steps,
        dt_hours=inst.dt_hours,
        var_names=inst.var_names,
        lb=lbv,
        ub=ubv,
        is_binary=np.zeros_like(inst.is_binary),
        obj=_polish_objective(inst.n_vars, polish_indices),
        A=sp.vstack([inst.A, cap]).tocsr(),
        sense=np.concatenate([inst.sense, np.asarray(["<"])]),
        rhs=np.concatenate([inst.rhs, [base.objective + band]]),
        row_kinds=inst.row_kinds + ["objective_band"],
        row_nodes=inst.row_nodes + [""],
        row_steps=inst.row_steps + [-1],
        flow_index=inst.flow_index,
        state_index=inst.state_index,
        binary_index=inst.binary_index,
    )
    second = solve_lp(polished, cfg)
    if second.status is not SolveStatus.OPTIMAL:
        return base
    return replace(
        base,
        x=second.x,
        objective=inst.objective_value(second.x),
        iterations=base.iterations + second.iterations,
        message=base.message + " polished",
    )


def _polish_objective(n_vars: int, indices: np.ndarray) -> np.ndarray:
    c = np.zeros(n_vars)
    c[indices] = -1.0  # maximize their sum
    return c


@dataclass
class ViolationReport:
    """Independent feasibility check of a solution vector."""

    max_violation: float
    rows: list[tuple[int, str, float]] = field(default_factory=list)
    bounds: list[tuple[int, str, float]] = field(default_factory=list)
    binaries: list[tuple[int, str, float]] = field(default_factory=list)

    def ok(self, tol: float = 1e-9) -> bool:
        return self.max_violation <= tol


def verify_solution(
    inst: MilpInstance,
    x: np.ndarray,
    *,
    report_tol: float = 1e-9,
    check_binaries: bool = True,
) -> ViolationReport:
    """Re-check every row, bound and binary of ``x`` against the instance.

    Violations are relative: each row residual is scaled by
    ``max(1, |rhs|, sum |a_ij x_j|)`` and each bound by ``max(1, |bound|)``.
    Entries above ``report_tol`` are listed; the maximum over everything is
    reported either way. The check builds only on the instance data, not on
    any solver internals. Pass ``check_binaries=False`` when verifying a
    relaxation, whose binaries are legitimately fractional.
    """
    x = np.asarray(x, dtype=float)
    Ax = inst.A @ x
    absAx = np.abs(inst.A) @ np.abs(x)
    resid = Ax - inst.rhs
    over = np.where(inst.sense == "=", np.abs(resid), 0.0)
    over = np.where(inst.sense == "<", np.maximum(resid, 0.0), over)
    over = np.where(inst.sense == ">", np.maximum(-resid, 0.0), over)
    scale = np.maximum(1.0, np.maximum(np.abs(inst.rhs), absAx))
    rel = over / scale

    rows = [
        (int(i), inst.row_name(int(i)), float(rel[i]))
        for i in np.flatnonzero(rel > report_tol)
    ]
    rows.sort(key=lambda r: -r[2])

    lo = np.where(np.isfinite(inst.lb), inst.lb - x, -np.inf) / np.maximum(
        1.0, np.abs(np.where(np.isfinite(inst.lb), inst.lb, 0.0))
    )
    hi = np.where(np.isfinite(inst.ub), x - inst.ub, -np.inf) / np.maximum(
        1.0, np.abs(np.where(np.isfinite(inst.ub), inst.ub, 0.0))
    )
    bound_viol = np.maximum(np.maximum(lo, hi), 0.0)
    bounds = [
        (int(j), inst.var_names[j], float(bound_viol[j]))
        for j in np.flatnonzero(bound_viol > report_tol)
    ]
    bounds.sort(key=lambda r: -r[2])

    binaries = []
    bmax = 0.0
    if check_binaries:
        for j in np.flatnonzero(inst.is_binary):
            dist = float(min(abs(x[j]), abs(x[j] - 1.0)))
            bmax = max(bmax, dist)
            if dist > report_tol:
                binaries.append((int(j), inst.var_names[j], dist))

    max_violation = max(
        float(rel.max()) if rel.size else 0.0,
        float(bound_viol.max()) if bound_viol.size else 0.0,
        bmax,
    )
    return ViolationReport(max_violation, rows, bounds, binaries)


def dual_objective(inst: MilpInstance, result: SolveResult, *, tol: float = 1e-7) -> float:
    """Value of the dual certificate carried by an optimal result.

    Computes reduced costs ``z = c - A' y`` from the instance data and the
    returned row duals, then evaluates ``y b + sum(z+ * lb) + sum(z- * ub)``
    over finite bounds. At a clean optimum this equals the primal objective.
    Raises if the certificate is dual-infeasible (a wrong-signed reduced
    cost against an infinite bound).
    """
    if result.duals is None:
        raise ValueError("result carries no duals")
    y = result.duals
    z = inst.obj - inst.A.T @ y
    val = float(y @ inst.rhs)
    pos = z > tol
    neg = z < -tol
    if np.any(pos & ~np.isfinite(inst.lb)) or np.any(neg & ~np.isfinite(inst.ub)):
        raise ValueError("dual certificate infeasible against an unbounded variable")
    val += float(np.sum(z[pos] * inst.lb[pos]))
    val += float(np.sum(z[neg] * inst.ub[neg]))
    return val
