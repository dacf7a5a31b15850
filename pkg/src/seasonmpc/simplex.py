"""Two-phase primal simplex for LPs with general variable bounds.

Variables carry their box bounds natively (no standard-form expansion),
slacks turn every row into an equality, and infeasible starting rows get
artificial variables that phase 1 drives to zero. Pricing is Dantzig with
deterministic index tie-breaks; a streak of degenerate pivots switches to
Bland's rule, which guarantees termination. The constraint matrix stays
sparse; the basis inverse is kept dense with product-form updates and
periodic refactorization.

This solver targets small and medium instances (up to roughly a thousand
rows); it is exact, deterministic and dependency-light, and serves as the
reference engine that larger backends are cross-checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["SimplexResult", "solve_bounded_lp", "SimplexError"]

_BASIC = 0
_AT_LB = 1
_AT_UB = 2
_FREE_NB = 3

_REFACTOR_EVERY = 64
_BLAND_TRIGGER = 50


class SimplexError(RuntimeError):
    """Internal failure (cycling safeguard or singular basis)."""


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    infeasibility: float = 0.0


def _trivial_no_rows(c, lb, ub):
    x = np.zeros(c.shape[0])
    for j in range(c.shape[0]):
        if c[j] > 0.0:
            if not np.isfinite(lb[j]):
                return SimplexResult("unbounded", x, -np.inf, np.zeros(0), c.copy(), 0)
            x[j] = lb[j]
        elif c[j] < 0.0:
            if not np.isfinite(ub[j]):
                return SimplexResult("unbounded", x, -np.inf, np.zeros(0), c.copy(), 0)
            x[j] = ub[j]
        else:
            x[j] = lb[j] if np.isfinite(lb[j]) else (ub[j] if np.isfinite(ub[j]) else 0.0)
    return SimplexResult("optimal", x, float(c @ x), np.zeros(0), c.copy(), 0)


class _Kernel:
    """Simplex state over the equality form [A I | artificials] z = b."""

    def __init__(self, A, sense, b, c, lb, ub, tol_pivot):
        A = sp.csc_matrix(A)
        m, n = A.shape
        self.m, self.n = m, n
        self.b = b
        self.tol_pivot = tol_pivot

        slack_lb = np.where(sense == "<", 0.0, np.where(sense == ">", -np.inf, 0.0))
        slack_ub = np.where(sense == "<", np.inf, 0.0)
        self.A = A
        self.lb = np.concatenate([lb, slack_lb])
        self.ub = np.concatenate([ub, slack_ub])
        self.c = np.concatenate([c, np.zeros(m)])

        self.status = np.empty(n + m, dtype=np.int8)
        self.value = np.zeros(n + m)
        for j in range(n + m):
            if np.isfinite(self.lb[j]):
                self.status[j], self.value[j] = _AT_LB, self.lb[j]
            elif np.isfinite(self.ub[j]):
                self.status[j], self.value[j] = _AT_UB, self.ub[j]
            else:
                self.status[j], self.value[j] = _FREE_NB, 0.0

        self.basis = np.arange(n, n + m)
        self.n_art = 0
        self.iterations = 0
        self._pivots_since_refactor = 0
        self.Binv = np.eye(m)
        self.W: sp.csc_matrix | None = None  # assembled in install_artificials
        self.WT: sp.csr_matrix | None = None

    # -- setup ------------------------------------------------------------

    def install_artificials(self):
        """Assemble W = [A I art] with artificials on out-of-bounds rows."""
        n, m = self.n, self.m
        resid = self.b - self.A @ self.value[:n]
        need: list[tuple[int, float]] = []
        for i in range(m):
            s = n + i
            v = resid[i]
            if self.lb[s] - 1e-12 <= v <= self.ub[s] + 1e-12:
                self.status[s] = _BASIC
                self.value[s] = v
            else:
                snap = min(max(v, self.lb[s]), self.ub[s])
                self.status[s] = _AT_LB if snap == self.lb[s] else _AT_UB
                self.value[s] = snap
                need.append((i, v - snap))
        self.n_art = len(need)
        blocks = [self.A, sp.eye(m, format="csc")]
        if need:
            rows = np.asarray([i for i, _ in need])
            signs = np.asarray([1.0 if r > 0 else -1.0 for _, r in need])
            art = sp.csc_matrix(
                (signs, (rows, np.arange(self.n_art))), shape=(m, self.n_art)
            )
            blocks.append(art)
            for k, (i, r) in enumerate(need):
                self.basis[i] = n + m + k
            self.lb = np.concatenate([self.lb, np.zeros(self.n_art)])
            self.ub = np.concatenate([self.ub, np.full(self.n_art, np.inf)])
            self.c = np.concatenate([self.c, np.zeros(self.n_art)])
            self.status = np.concatenate(
                [self.status, np.full(self.n_art, _BASIC, dtype=np.int8)]
            )
            self.value = np.concatenate(
                [self.value, np.asarray([abs(r) for _, r in need])]
            )
        self.W = sp.hstack(blocks, format="csc")
        self.WT = self.W.T.tocsr()

    def phase1_costs(self):
        cost = np.zeros(self.W.shape[1])
        cost[self.n + self.m :] = 1.0
        return cost

    def freeze_artificials(self):
        for j in range(self.n + self.m, self.W.shape[1]):
            self.lb[j] = 0.0
            self.ub[j] = 0.0
            if self.status[j] != _BASIC:
                self.status[j] = _AT_LB
                self.value[j] = 0.0

    def column(self, j: int) -> np.ndarray:
        lo, hi = self.W.indptr[j], self.W.indptr[j + 1]
        col = np.zeros(self.m)
        col[self.W.indices[lo:hi]] = self.W.data[lo:hi]
        return col

    # -- linear algebra ----------------------------------------------------

    def refactor(self):
        B = self.W[:, self.basis].toarray()
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by pivots
            raise SimplexError("singular basis during refactorization") from exc
        self._pivots_since_refactor = 0
        self.recompute_basics()

    def recompute_basics(self):
        v = self.value.copy()
        v[self.basis] = 0.0
        xb = self.Binv @ (self.b - self.W @ v)
        self.value[self.basis] = xb

    # -- one phase ---------------------------------------------------------

    def run(self, cost, max_iter, tol_cost, always_bland=False):
        """Minimize cost over the current basis; returns 'optimal'/'unbounded'."""
        self.refactor()
        bland = always_bland
        degen_streak = 0
        nonfixed = self.lb < self.ub  # fixed vars never enter

        while True:
            if self.iterations >= max_iter:
                raise SimplexError(f"iteration limit {max_iter} exceeded")
            self.iterations += 1
            if self._pivots_since_refactor >= _REFACTOR_EVERY:
                self.refactor()

            y = cost[self.basis] @ self.Binv
            d = cost - self.WT @ y
            st = self.status
            enter_up = (st == _AT_LB) & (d < -tol_cost) & nonfixed
            enter_dn = (st == _AT_UB) & (d > tol_cost) & nonfixed
            enter_fr = (st == _FREE_NB) & (np.abs(d) > tol_cost)
            cand = enter_up | enter_dn | enter_fr
            if not cand.any():
                return "optimal", y, d

            idx = np.flatnonzero(cand)
            if bland:
                j = int(idx[0])
            else:
                j = int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if (st[j] == _AT_LB or (st[j] == _FREE_NB and d[j] < 0)) else -1.0

            w = self.Binv @ self.column(j)
            xb = self.value[self.basis]
            lb_b = self.lb[self.basis]
            ub_b = self.ub[self.basis]
            denom = direction * w

            with np.errstate(divide="ignore", invalid="ignore"):
                drop = np.where(denom > self.tol_pivot, (xb - lb_b) / denom, np.inf)
                rise = np.where(denom < -self.tol_pivot, (xb - ub_b) / denom, np.inf)
            ratios = np.maximum(np.minimum(drop, rise), 0.0)

            own = self.ub[j] - self.lb[j]  # may be inf
            t_basic = ratios.min() if ratios.size else np.inf
            t = min(t_basic, own)

            if not np.isfinite(t):
                return "unbounded", y, d

            if own <= t_basic:
                # Bound flip: the entering variable crosses its whole range.
                self.value[self.basis] = xb - direction * own * w
                self.status[j] = _AT_UB if st[j] == _AT_LB else _AT_LB
                self.value[j] = self.ub[j] if self.status[j] == _AT_UB else self.lb[j]
                degen_streak = 0
                bland = False
                continue

            tie = ratios <= t_basic + 1e-12
            if bland:
                r = int(np.flatnonzero(tie)[np.argmin(self.basis[tie])])
            else:
                r = int(np.flatnonzero(tie)[np.argmax(np.abs(w[tie]))])

            leaving = int(self.basis[r])
            hit_lb = denom[r] > 0
            self.value[self.basis] = xb - direction * t * w
            self.value[j] = self.value[j] + direction * t
            self.value[leaving] = lb_b[r] if hit_lb else ub_b[r]
            self.status[leaving] = _AT_LB if hit_lb else _AT_UB
            self.status[j] = _BASIC
            self.basis[r] = j

            pivot_row = self.Binv[r, :] / w[r]
            self.Binv -= np.outer(w, pivot_row)
            self.Binv[r, :] = pivot_row
            self._pivots_since_refactor += 1

            if t <= 1e-12:
                degen_streak += 1
                if degen_streak >= _BLAND_TRIGGER:
                    bland = True
            else:
                degen_streak = 0
                bland = always_bland


def solve_bounded_lp(
    c: np.ndarray,
    A,
    sense: np.ndarray,
    b: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    *,
    feasibility_tol: float = 1e-9,
    max_iter: int | None = None,
    pivot_rule: str = "dantzig_bland",
) -> SimplexResult:
    """Minimize ``c @ x`` subject to ``A x (sense) b`` and ``lb <= x <= ub``.

    ``sense`` holds ``'='``, ``'<'`` or ``'>'`` per row. Returns an optimal
    basic solution together with row duals and reduced costs, or the
    infeasible/unbounded classification. Two runs on identical inputs take
    identical pivot sequences. ``pivot_rule`` is ``"dantzig_bland"``
    (largest reduced cost, falling back to Bland's rule after a degenerate
    streak) or ``"bland"`` (smallest index throughout).
    """
    if pivot_rule not in ("dantzig_bland", "bland"):
        raise ValueError(f"unknown pivot rule {pivot_rule!r}")
    always_bland = pivot_rule == "bland"
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m = b.shape[0]
    n = c.shape[0]
    if m == 0:
        return _trivial_no_rows(c, lb, ub)
    if max_iter is None:
        max_iter = 200 * (m + n) + 2000

    scale_b = 1.0 + float(np.max(np.abs(b))) if m else 1.0
    kern = _Kernel(A, np.asarray(sense), b, c, lb, ub, tol_pivot=1e-10)
    kern.install_artificials()

    if kern.n_art:
        p1_cost = kern.phase1_costs()
        outcome, _, _ = kern.run(p1_cost, max_iter, tol_cost=1e-10, always_bland=always_bland)
        if outcome != "optimal":  # pragma: no cover - phase 1 is bounded below
            raise SimplexError("phase 1 terminated " + outcome)
        kern.refactor()
        infeas = float(np.sum(np.abs(kern.value[n + m :])))
        if infeas > feasibility_tol * scale_b:
            x = kern.value[:n].copy()
            return SimplexResult(
                "infeasible", x, np.nan, np.full(m, np.nan), np.full(n + m, np.nan),
                kern.iterations, infeasibility=infeas,
            )
        kern.freeze_artificials()

    cost2 = np.zeros(kern.W.shape[1])
    cost2[:n] = c
    scale_c = 1.0 + float(np.max(np.abs(c))) if n else 1.0
    outcome, y, d = kern.run(cost2, max_iter, tol_cost=1e-9 * scale_c, always_bland=always_bland)
    if outcome == "unbounded":
        return SimplexResult(
            "unbounded", kern.value[:n].copy(), -np.inf, y, d[: n + m], kern.iterations
        )

    kern.refactor()  # clean residuals before reporting
    y = cost2[kern.basis] @ kern.Binv
    d = cost2 - kern.WT @ y
    x = kern.value[:n].copy()
    # snap basics marginally outside their box back onto it
    np.clip(x, np.where(np.isfinite(lb), lb, -np.inf), np.where(np.isfinite(ub), ub, np.inf), out=x)
    return SimplexResult(
        "optimal", x, float(c @ x), y.copy(), d[: n + m].copy(), kern.iterations
    )
