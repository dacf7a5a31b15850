"""LP-format export and import, solution files, and file-based cross-checks.

The writer emits deterministic CPLEX-style LP text (same instance, same
bytes) so external solvers can re-solve any window. The parser reads the
same dialect back into a :class:`MilpInstance`; parsed instances carry no
flow or state index maps, only the algebra. Solution files are plain
``name value`` lines with the objective in a leading comment.
"""

from __future__ import annotations

import math
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .formulation import MilpInstance
from .solver import DEFAULT_CONFIG, SolveResult, SolveStatus, SolverConfig, solve_milp

__all__ = [
    "write_lp",
    "lp_string",
    "parse_lp",
    "read_lp",
    "write_solution",
    "read_solution",
    "solution_vector",
    "instances_equivalent",
    "CrossCheckReport",
    "cross_check_lp_roundtrip",
    "LpFormatError",
]


class LpFormatError(ValueError):
    """Text does not conform to the supported LP dialect."""


def _num(v: float) -> str:
    """Shortest exact decimal representation of a float."""
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def _terms(names: list[str], cols: np.ndarray, vals: np.ndarray, per_line: int = 8) -> list[str]:
    parts: list[str] = []
    for k, (j, v) in enumerate(zip(cols, vals)):
        sign = "-" if v < 0 else "+"
        if k == 0 and sign == "+":
            parts.append(f"{_num(abs(v))} {names[j]}")
        else:
            parts.append(f"{sign} {_num(abs(v))} {names[j]}")
    lines = []
    for k in range(0, len(parts), per_line):
        lines.append(" ".join(parts[k : k + per_line]))
    return lines or [""]


_SENSE_OUT = {"=": "=", "<": "<=", ">": ">="}


def lp_string(inst: MilpInstance) -> str:
    """Render the instance as LP-format text."""
    out: list[str] = [f"\\ seasonmpc instance: {inst.name}", "Minimize"]
    obj_cols = np.flatnonzero(inst.obj)
    lines = _terms(inst.var_names, obj_cols, inst.obj[obj_cols])
    out.append(" obj: " + lines[0])
    out.extend("   " + ln for ln in lines[1:])

    out.append("Subject To")
    A = inst.A.tocsr()
    seen: dict[str, int] = {}
    for i in range(inst.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        if lo == hi:
            raise LpFormatError(f"row {i} has no coefficients; cannot be written")
        base = _sanitize(inst.row_name(i))
        count = seen.get(base, 0)
        seen[base] = count + 1
        name = base if count == 0 else f"{base}_{count}"
        lines = _terms(inst.var_names, A.indices[lo:hi], A.data[lo:hi])
        tail = f" {_SENSE_OUT[str(inst.sense[i])]} {_num(inst.rhs[i])}"
        if len(lines) == 1:
            out.append(f" {name}: {lines[0]}{tail}")
        else:
            out.append(f" {name}: {lines[0]}")
            out.extend("   " + ln for ln in lines[1:-1])
            out.append("   " + lines[-1] + tail)

    out.append("Bounds")
    for j, name in enumerate(inst.var_names):
        lb, ub = inst.lb[j], inst.ub[j]
        if inst.is_binary[j] and lb == 0.0 and ub == 1.0:
            continue
        if lb == 0.0 and ub == math.inf:
            continue
        if lb == ub:
            out.append(f" {name} = {_num(lb)}")
        elif lb == -math.inf and ub == math.inf:
            out.append(f" {name} free")
        elif ub == math.inf:
            out.append(f" {name} >= {_num(lb)}")
        else:
            out.append(f" {_num(lb)} <= {name} <= {_num(ub)}")

    bin_names = [inst.var_names[j] for j in np.flatnonzero(inst.is_binary)]
    if bin_names:
        out.append("Binaries")
        for k in range(0, len(bin_names), 8):
            out.append(" " + " ".join(bin_names[k : k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"


def _sanitize(name: str) -> str:
    return "".join(ch if (ch.isalnum() or ch == "_") else "_" for ch in name)


def write_lp(inst: MilpInstance, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(lp_string(inst))
    return path


# ---------------------------------------------------------------------------
# parsing


_SECTION_STARTS = {
    "minimize": "objective",
    "minimise": "objective",
    "min": "objective",
    "maximize": "objective_max",
    "maximise": "objective_max",
    "max": "objective_max",
    "bounds": "bounds",
    "bound": "bounds",
    "binaries": "binaries",
    "binary": "binaries",
    "bin": "binaries",
    "end": "end",
}

_SENSE_IN = {"<=": "<", "=<": "<", ">=": ">", "=>": ">", "=": "="}
_INF_TOKENS = {"inf", "infinity"}


_TOKEN_RE = re.compile(
    r"<=|>=|=<|=>|[<>=:+\-]"
    r"|[A-Za-z_][A-Za-z0-9_.\[\]]*"
    r"|(?:\d+\.?\d*|\.\d+)(?:[eE][+\-]?\d+)?"
)


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0]
        tokens.extend(_TOKEN_RE.findall(line))
    return tokens


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


class _Parser:
    def __init__(self, tokens: list[str]):
        self.toks = tokens
        self.pos = 0
        self.var_order: list[str] = []
        self.var_id: dict[str, int] = {}
        self.obj: dict[int, float] = {}
        self.rows: list[tuple[str, dict[int, float], str, float]] = []
        self.bounds: dict[int, list[float]] = {}
        self.binaries: set[int] = set()
        self.maximize = False

    def vid(self, name: str) -> int:
        if name not in self.var_id:
            self.var_id[name] = len(self.var_order)
            self.var_order.append(name)
        return self.var_id[name]

    def peek(self) -> str:
        return self.toks[self.pos] if self.pos < len(self.toks) else ""

    def take(self) -> str:
        tok = self.peek()
        self.pos += 1
        return tok

    def at_section(self) -> str | None:
        tok = self.peek().lower()
        if tok in _SECTION_STARTS:
            return _SECTION_STARTS[tok]
        if tok in ("subject", "such"):
            nxt = self.toks[self.pos + 1].lower() if self.pos + 1 < len(self.toks) else ""
            if nxt in ("to", "that"):
                return "constraints"
        if tok in ("st", "s.t."):
            return "constraints"
        return None

    def skip_section_header(self, kind: str) -> None:
        tok = self.take().lower()
        if tok in ("subject", "such"):
            self.take()

    def linear_terms(self, stop) -> dict[int, float]:
        """Read +/- coef name terms until ``stop(token)`` is true."""
        terms: dict[int, float] = {}
        sign = 1.0
        coef: float | None = None
        while self.pos < len(self.toks) and not stop(self.peek()):
            tok = self.take()
            if tok in ("+", "-"):
                if coef is not None:
                    raise LpFormatError(f"operator {tok!r} after dangling coefficient")
                if tok == "-":
                    sign = -sign
                continue
            if _is_number(tok):
                coef = (coef if coef is not None else 1.0) * float(tok)
                continue
            j = self.vid(tok)
            value = sign * (coef if coef is not None else 1.0)
            terms[j] = terms.get(j, 0.0) + value
            sign, coef = 1.0, None
        if coef is not None:
            raise LpFormatError("expression ends with a dangling coefficient")
        return terms

    def signed_value(self) -> float:
        """Read a number or infinity, optionally prefixed by a sign token."""
        sign = 1.0
        tok = self.take()
        while tok in ("+", "-"):
            if tok == "-":
                sign = -sign
            tok = self.take()
        low = tok.lower()
        if low in _INF_TOKENS:
            return sign * math.inf
        if _is_number(tok):
            return sign * float(tok)
        raise LpFormatError(f"expected a number, got {tok!r}")

    def peek_is_value(self) -> bool:
        tok = self.peek()
        return tok in ("+", "-") or _is_number(tok) or tok.lower() in _INF_TOKENS

    def parse(self) -> None:
        section = None
        while self.pos < len(self.toks):
            kind = self.at_section()
            if kind == "end":
                break
            if kind is not None:
                self.skip_section_header(kind)
                if kind == "objective_max":
                    self.maximize = True
                    kind = "objective"
                section = kind
                if section == "objective":
                    self.parse_objective()
                elif section == "constraints":
                    self.parse_constraints()
                elif section == "bounds":
                    self.parse_bounds()
                elif section == "binaries":
                    self.parse_binaries()
                continue
            raise LpFormatError(f"unexpected token {self.peek()!r} outside any section")

    def parse_objective(self) -> None:
        if self.pos + 1 < len(self.toks) and self.toks[self.pos + 1] == ":":
            self.take()
            self.take()
        stop = lambda tok: self.at_section() is not None
        self.obj = self.linear_terms(stop)

    def parse_constraints(self) -> None:
        while self.pos < len(self.toks) and self.at_section() is None:
            name = ""
            if self.pos + 1 < len(self.toks) and self.toks[self.pos + 1] == ":":
                name = self.take()
                self.take()
            stop = lambda tok: tok in _SENSE_IN or self.at_section() is not None
            terms = self.linear_terms(stop)
            if self.at_section() is not None or self.pos >= len(self.toks):
                raise LpFormatError(f"constraint {name or len(self.rows)} has no relation")
            sense = _SENSE_IN[self.take()]
            rhs = self.signed_value()
            if not name:
                name = f"r{len(self.rows)}"
            self.rows.append((name, terms, sense, rhs))

    def bound_entry(self, j: int) -> list[float]:
        return self.bounds.setdefault(j, [0.0, math.inf])

    def parse_bounds(self) -> None:
        while self.pos < len(self.toks) and self.at_section() is None:
            if self.peek_is_value():
                lo = self.signed_value()
                if self.take() not in ("<=", "=<"):
                    raise LpFormatError("expected '<=' after lower bound")
                name = self.take()
                j = self.vid(name)
                entry = self.bound_entry(j)
                entry[0] = lo
                if self.peek() in ("<=", "=<"):
                    self.take()
                    entry[1] = self.signed_value()
                continue
            name = self.take()
            j = self.vid(name)
            nxt = self.take()
            if nxt.lower() == "free":
                self.bounds[j] = [-math.inf, math.inf]
            elif nxt in ("<=", "=<"):
                self.bound_entry(j)[1] = self.signed_value()
            elif nxt in (">=", "=>"):
                self.bound_entry(j)[0] = self.signed_value()
            elif nxt == "=":
                v = self.signed_value()
                self.bounds[j] = [v, v]
            else:
                raise LpFormatError(f"cannot parse bound line near {name!r} {nxt!r}")

    def parse_binaries(self) -> None:
        while self.pos < len(self.toks) and self.at_section() is None:
            self.binaries.add(self.vid(self.take()))


def parse_lp(text: str, name: str = "parsed") -> MilpInstance:
    """Parse LP-format text into an instance.

    Supports the dialect the writer emits plus common hand-written forms.
    The returned instance has empty flow/state index maps; it can be
    solved, verified and re-exported but not interpreted as a dispatch.
    """
    p = _Parser(_tokenize(text))
    p.parse()

    n = len(p.var_order)
    obj = np.zeros(n)
    for j, v in p.obj.items():
        obj[j] = -v if p.maximize else v
    lb = np.zeros(n)
    ub = np.full(n, math.inf)
    for j in p.binaries:
        ub[j] = 1.0
    for j, (lo, hi) in p.bounds.items():
        lb[j], ub[j] = lo, hi
    is_binary = np.zeros(n, dtype=bool)
    for j in p.binaries:
        is_binary[j] = True

    rows_i: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    sense = []
    rhs = []
    kinds = []
    for i, (rname, terms, sgn, b) in enumerate(p.rows):
        for j, v in sorted(terms.items()):
            rows_i.append(i)
            cols.append(j)
            vals.append(v)
        sense.append(sgn)
        rhs.append(b)
        kinds.append(rname)

    A = sp.csr_matrix((vals, (rows_i, cols)), shape=(len(p.rows), n))
    return MilpInstance(
        name=name,
        n_steps=0,
        dt_hours=1.0,
        var_names=list(p.var_order),
        lb=lb,
        ub=ub,
        is_binary=is_binary,
        obj=obj,
        A=A,
        sense=np.asarray(sense, dtype="<U1"),
        rhs=np.asarray(rhs, dtype=float),
        row_kinds=kinds,
        row_nodes=[""] * len(kinds),
        row_steps=[-1] * len(kinds),
        flow_index={},
        state_index={},
        binary_index={},
    )


def read_lp(path: str | Path) -> MilpInstance:
    path = Path(path)
    return parse_lp(path.read_text(), name=path.stem)


# ---------------------------------------------------------------------------
# solution files


def write_solution(
    inst: MilpInstance, x: np.ndarray, path: str | Path, objective: float | None = None
) -> Path:
    path = Path(path)
    if objective is None:
        objective = inst.objective_value(x)
    lines = [f"\\ objective {_num(objective)}"]
    lines += [f"{name} {_num(float(v))}" for name, v in zip(inst.var_names, x)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_solution(path: str | Path) -> tuple[float | None, dict[str, float]]:
    objective = None
    values: dict[str, float] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("\\"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "objective":
                objective = float(parts[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise LpFormatError(f"bad solution line: {raw!r}")
        values[parts[0]] = float(parts[1])
    return objective, values


def solution_vector(
    inst: MilpInstance, values: dict[str, float], *, strict: bool = False
) -> np.ndarray:
    """Arrange a name->value mapping into the instance's variable order."""
    x = np.zeros(inst.n_vars)
    missing = []
    for j, name in enumerate(inst.var_names):
        if name in values:
            x[j] = values[name]
        else:
            missing.append(name)
    if strict and missing:
        raise LpFormatError(f"solution misses {len(missing)} variables, e.g. {missing[0]}")
    return x


def instances_equivalent(a: MilpInstance, b: MilpInstance, tol: float = 0.0) -> list[str]:
    """Structural diff of two instances, matching variables by name.

    Returns a list of mismatch descriptions; empty means equivalent
    (same variables, bounds, binary flags, objective and rows up to row
    order by index). Used to validate LP round-trips.
    """
    diffs: list[str] = []
    if sorted(a.var_names) != sorted(b.var_names):
        only_a = set(a.var_names) - set(b.var_names)
        only_b = set(b.var_names) - set(a.var_names)
        diffs.append(f"variable sets differ (only-left {sorted(only_a)[:3]}, only-right {sorted(only_b)[:3]})")
        return diffs
    bj = {nm: j for j, nm in enumerate(b.var_names)}
    perm = np.asarray([bj[nm] for nm in a.var_names])

    def close(u, v):
        if u == v:  # also covers matching infinities
            return True
        return math.isfinite(u) and math.isfinite(v) and abs(u - v) <= tol

    for j, nm in enumerate(a.var_names):
        k = perm[j]
        if not (close(a.lb[j], b.lb[k]) and close(a.ub[j], b.ub[k])):
            diffs.append(f"bounds differ for {nm}: [{a.lb[j]},{a.ub[j]}] vs [{b.lb[k]},{b.ub[k]}]")
        if bool(a.is_binary[j]) != bool(b.is_binary[k]):
            diffs.append(f"binary flag differs for {nm}")
        if not close(a.obj[j], b.obj[k]):
            diffs.append(f"objective coefficient differs for {nm}")
    if a.n_rows != b.n_rows:
        diffs.append(f"row counts differ: {a.n_rows} vs {b.n_rows}")
        return diffs
    Aa = a.A.tocsr()
    Ab = b.A.tocsr()
    for i in range(a.n_rows):
        if a.sense[i] != b.sense[i] or not close(a.rhs[i], b.rhs[i]):
            diffs.append(f"row {i}: sense/rhs differ")
            continue
        ra = {int(j): float(v) for j, v in zip(Aa.indices[Aa.indptr[i]:Aa.indptr[i+1]], Aa.data[Aa.indptr[i]:Aa.indptr[i+1]])}
        rb = {int(j): float(v) for j, v in zip(Ab.indices[Ab.indptr[i]:Ab.indptr[i+1]], Ab.data[Ab.indptr[i]:Ab.indptr[i+1]])}
        ra = {a.var_names[j]: v for j, v in ra.items() if v != 0.0}
        rb = {b.var_names[j]: v for j, v in rb.items() if v != 0.0}
        if set(ra) != set(rb) or any(not close(ra[nm], rb[nm]) for nm in ra):
            diffs.append(f"row {i}: coefficients differ")
    return diffs


# ---------------------------------------------------------------------------
# cross-checking through files


@dataclass
class CrossCheckReport:
    primary: SolveResult
    external_objective: float
    rel_diff: float
    lp_path: str
    mode: str  # "subprocess" or "reparse"

    def ok(self, tol: float = 1e-6) -> bool:
        return self.rel_diff <= tol


def cross_check_lp_roundtrip(
    inst: MilpInstance,
    cfg: SolverConfig = DEFAULT_CONFIG,
    *,
    command: str | None = None,
    workdir: str | Path | None = None,
) -> CrossCheckReport:
    """Solve the instance, export it, and re-solve through the file route.

    With ``command`` (a template containing ``{lp}`` and ``{sol}``) the LP
    file is handed to an external solver process that must write a
    ``name value`` solution file; its objective is recomputed from our own
    objective vector. Without a command, the LP text is parsed back and
    solved with the engine the primary solve did not use, which exercises
    writer, parser and both engines against each other.
    """
    primary = solve_milp(inst, cfg)
    if primary.status is not SolveStatus.OPTIMAL:
        raise ValueError(f"cross-check needs an optimal primary solve, got {primary.status}")

    tmp = tempfile.mkdtemp(prefix="seasonmpc_lp_") if workdir is None else str(workdir)
    lp_path = Path(tmp) / f"{inst.name}.lp"
    write_lp(inst, lp_path)

    if command is not None:
        sol_path = Path(tmp) / f"{inst.name}.sol"
        cmd = command.format(lp=str(lp_path), sol=str(sol_path))
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
        if proc.returncode != 0:
            raise RuntimeError(f"external solver failed ({proc.returncode}): {proc.stderr[:500]}")
        _, values = read_solution(sol_path)
        x = solution_vector(inst, values)
        ext_obj = inst.objective_value(x)
        mode = "subprocess"
    else:
        reparsed = parse_lp(lp_string(inst), name=inst.name + "_roundtrip")
        alt = "highs" if primary.engine == "simplex" else "simplex"
        if alt == "simplex" and reparsed.n_rows > cfg.simplex_row_limit:
            alt = "highs"
        res = solve_milp(reparsed, SolverConfig(engine=alt))
        if res.status is not SolveStatus.OPTIMAL:
            raise RuntimeError(f"round-trip solve returned {res.status}")
        ext_obj = res.objective
        mode = "reparse"

    rel = abs(ext_obj - primary.objective) / max(1.0, abs(primary.objective))
    return CrossCheckReport(primary, ext_obj, rel, str(lp_path), mode)
