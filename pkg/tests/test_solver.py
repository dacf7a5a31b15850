"""Solver orchestration: engines, branch-and-bound and verification."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import seasonmpc as sm
from seasonmpc.network import Node
from seasonmpc.solver import DEFAULT_CONFIG, SolverConfig, solve_lp, solve_milp

from conftest import make_series, make_window, random_window


def enumerate_binary_fixings(inst, cfg):
    """Oracle: minimum objective over every 0/1 assignment, each as an LP."""
    bins = np.flatnonzero(inst.is_binary)
    best = np.inf
    for bits in itertools.product([0.0, 1.0], repeat=len(bins)):
        lb, ub = inst.lb.copy(), inst.ub.copy()
        lb[bins] = bits
        ub[bins] = bits
        r = solve_lp(inst, cfg, lb=lb, ub=ub)
        if r.status is sm.SolveStatus.OPTIMAL:
            best = min(best, r.objective)
    return best


class TestEngines:
    def test_auto_routes_by_size(self, small_network):
        win = random_window(small_network, 4, seed=1)
        inst = sm.build_milp(small_network, win)
        res = solve_lp(inst, SolverConfig(engine="auto"))
        assert res.engine == "simplex"
        win_big = random_window(small_network, 40, seed=1)
        inst_big = sm.build_milp(small_network, win_big)
        res_big = solve_lp(inst_big, SolverConfig(engine="auto"))
        assert res_big.engine == "highs"

    @pytest.mark.parametrize("seed", range(20))
    def test_engines_agree(self, small_network, seed):
        win = random_window(small_network, int(3 + seed % 6), seed=seed)
        inst = sm.build_milp(small_network, win)
        a = solve_lp(inst, SolverConfig(engine="simplex"))
        b = solve_lp(inst, SolverConfig(engine="highs"))
        assert a.status == b.status
        if a.status is sm.SolveStatus.OPTIMAL:
            assert a.objective == pytest.approx(b.objective, rel=1e-7, abs=1e-7)

    def test_deterministic_primal_vectors(self, small_network):
        win = random_window(small_network, 8, seed=3, neg_sell_hours=2)
        inst = sm.build_milp(small_network, win)
        for engine in ("simplex", "highs"):
            r1 = solve_milp(inst, SolverConfig(engine=engine))
            r2 = solve_milp(inst, SolverConfig(engine=engine))
            assert r1.objective == r2.objective
            assert np.array_equal(r1.x, r2.x)

    def test_infeasible_window(self, study_network):
        # 20 kW heat demand, pump capped at 15 kW, no solar, empty storage
        series = make_series(1, d_dh=20.0)
        win = make_window(study_network, series, e_init={Node.SE: 0.0, Node.SH: 0.0})
        inst = sm.build_milp(study_network, win)
        for engine in ("simplex", "highs"):
            res = solve_lp(inst, SolverConfig(engine=engine))
            assert res.status is sm.SolveStatus.INFEASIBLE

    def test_unbounded_classification(self):
        from seasonmpc.lp_io import parse_lp

        inst = parse_lp(
            "Minimize\n obj: - 1 x\nSubject To\n r0: x - y <= 1\nBounds\n"
            " x >= 0\n y >= 0\nEnd\n"
        )
        for engine in ("simplex", "highs"):
            assert (
                solve_lp(inst, SolverConfig(engine=engine)).status
                is sm.SolveStatus.UNBOUNDED
            )


class TestBranchAndBound:
    def test_no_binaries_identical_to_lp(self, small_network):
        win = random_window(small_network, 6, seed=11)
        inst = sm.build_milp(small_network, win)
        assert int(inst.is_binary.sum()) == 0
        lp = solve_lp(inst, SolverConfig(engine="simplex"))
        milp = solve_milp(inst, SolverConfig(engine="simplex"))
        assert milp.objective == lp.objective
        assert np.array_equal(milp.x, lp.x)

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_enumeration_simplex(self, small_network, seed):
        win = random_window(small_network, 5, seed=100 + seed, neg_sell_hours=2)
        inst = sm.build_milp(small_network, win)
        cfg = SolverConfig(engine="simplex", milp_method="branch_and_bound")
        res = solve_milp(inst, cfg)
        ref = enumerate_binary_fixings(inst, cfg)
        if res.status is sm.SolveStatus.OPTIMAL:
            assert res.objective == pytest.approx(ref, rel=1e-8, abs=1e-8)
            rep = sm.verify_solution(inst, res.x)
            assert rep.max_violation <= 1e-9
        else:
            assert not np.isfinite(ref)

    def test_six_binaries_exhaustive(self, small_network):
        win = random_window(small_network, 6, seed=42, neg_sell_hours=3)
        inst = sm.build_milp(small_network, win)
        assert int(inst.is_binary.sum()) == 6
        cfg = SolverConfig(engine="highs", milp_method="branch_and_bound")
        res = solve_milp(inst, cfg)
        ref = enumerate_binary_fixings(inst, cfg)
        assert res.objective == pytest.approx(ref, rel=1e-8, abs=1e-8)

    @given(seed=st.integers(0, 100_000), k=st.integers(1, 3))
    @settings(max_examples=15, deadline=None)
    def test_enumeration_property(self, small_network, seed, k):
        win = random_window(small_network, 4, seed=seed, neg_sell_hours=k)
        inst = sm.build_milp(small_network, win)
        cfg = SolverConfig(engine="highs", milp_method="branch_and_bound")
        res = solve_milp(inst, cfg)
        ref = enumerate_binary_fixings(inst, cfg)
        if res.status is sm.SolveStatus.OPTIMAL:
            assert res.objective == pytest.approx(ref, rel=1e-8, abs=1e-8)
        else:
            assert not np.isfinite(ref)

    def test_highs_milp_route_agrees(self, small_network):
        win = random_window(small_network, 8, seed=17, neg_sell_hours=3)
        inst = sm.build_milp(small_network, win)
        bb = solve_milp(inst, SolverConfig(engine="highs", milp_method="branch_and_bound"))
        hm = solve_milp(inst, SolverConfig(milp_method="highs"))
        assert hm.engine == "highs-milp"
        assert hm.objective == pytest.approx(bb.objective, rel=1e-8, abs=1e-8)
        assert sm.verify_solution(inst, hm.x).max_violation <= 1e-9

    def test_node_limit_reports_bound(self, small_network):
        win = random_window(small_network, 8, seed=23, neg_sell_hours=4)
        inst = sm.build_milp(small_network, win)
        res = solve_milp(
            inst,
            SolverConfig(engine="highs", milp_method="branch_and_bound", node_limit=2),
        )
        assert res.status is sm.SolveStatus.NODE_LIMIT
        assert res.best_bound is not None

    def test_all_fixings_infeasible(self, study_network):
        series = make_series(1, d_dh=20.0, c_sell=-0.1)
        win = make_window(study_network, series, e_init={Node.SE: 0.0, Node.SH: 0.0})
        inst = sm.build_milp(study_network, win)
        assert int(inst.is_binary.sum()) == 2
        res = solve_milp(inst, SolverConfig(engine="simplex"))
        assert res.status is sm.SolveStatus.INFEASIBLE


class TestVerification:
    def test_optimal_solution_clean(self, small_network):
        win = random_window(small_network, 10, seed=5)
        inst = sm.build_milp(small_network, win)
        res = solve_milp(inst, DEFAULT_CONFIG)
        rep = sm.verify_solution(inst, res.x)
        assert rep.ok(1e-9)

    def test_perturbed_flow_flags_demand_row(self, study_network):
        series = make_series(2, d_de=5.0, c_buy=0.2)
        win = make_window(study_network, series, e_init={Node.SE: 0.0, Node.SH: 3000.0})
        inst = sm.build_milp(study_network, win)
        res = solve_milp(inst, SolverConfig(engine="simplex"))
        x = res.x.copy()
        x[inst.flow_index[(Node.PG, Node.DE)][0]] += 1.0
        rep = sm.verify_solution(inst, x)
        assert not rep.ok(1e-9)
        flagged = {name for _, name, _ in rep.rows}
        assert any("demand_balance_DE_t0000" == n for n in flagged)

    def test_bound_violation_reported(self, small_network):
        win = random_window(small_network, 3, seed=2)
        inst = sm.build_milp(small_network, win)
        res = solve_milp(inst, DEFAULT_CONFIG)
        x = res.x.copy()
        x[inst.state_index[Node.SH][0]] = 1e6
        rep = sm.verify_solution(inst, x)
        assert rep.bounds and rep.bounds[0][2] > 1.0

    def test_relaxed_binaries_opt_out(self, small_network):
        win = random_window(small_network, 4, seed=9, neg_sell_hours=2)
        inst = sm.build_milp(small_network, win)
        res = solve_lp(inst, SolverConfig(engine="highs"))
        full = sm.verify_solution(inst, res.x)
        relaxed = sm.verify_solution(inst, res.x, check_binaries=False)
        assert relaxed.max_violation <= 1e-9
        assert full.max_violation >= relaxed.max_violation

    @pytest.mark.parametrize("engine", ["simplex", "highs"])
    def test_dual_certificate_matches_primal(self, small_network, engine):
        for seed in (1, 7, 13):
            win = random_window(small_network, 6, seed=seed)
            inst = sm.build_milp(small_network, win)
            res = solve_lp(inst, SolverConfig(engine=engine))
            assert res.status is sm.SolveStatus.OPTIMAL
            dv = sm.dual_objective(inst, res)
            assert dv == pytest.approx(res.objective, rel=1e-8, abs=1e-8)


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(feasibility_tol=0.0),
            dict(integrality_tol=-1.0),
            dict(engine="cplex"),
            dict(milp_method="cuts"),
            dict(pivot_rule="steepest"),
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            SolverConfig(**kwargs)

    def test_bland_pivot_rule_reaches_same_optimum(self, small_network):
        win = random_window(small_network, 6, seed=55)
        inst = sm.build_milp(small_network, win)
        a = solve_lp(inst, SolverConfig(engine="simplex"))
        b = solve_lp(inst, SolverConfig(engine="simplex", pivot_rule="bland"))
        assert b.status is sm.SolveStatus.OPTIMAL
        assert b.objective == pytest.approx(a.objective, rel=1e-9, abs=1e-9)

    def test_dual_objective_requires_duals(self, small_network):
        win = random_window(small_network, 3, seed=56, neg_sell_hours=1)
        inst = sm.build_milp(small_network, win)
        res = solve_milp(inst, SolverConfig(milp_method="highs"))
        assert res.duals is None
        with pytest.raises(ValueError, match="no duals"):
            sm.dual_objective(inst, res)


class TestCanonicalPolish:
    def test_polish_preserves_objective_and_raises_states(self, small_network):
        # free end, spillable solar thermal: storing spilled heat is free
        series = make_series(4, d_dh=2.0, p_st=8.0, c_buy=0.2)
        win = make_window(small_network, series, e_init={Node.SE: 0.0, Node.SH: 0.0})
        inst = sm.build_milp(small_network, win)
        base = solve_milp(inst, SolverConfig(engine="highs"))
        pol = sm.solve_canonical(inst, SolverConfig(engine="highs"))
        assert pol.objective == pytest.approx(base.objective, rel=1e-9, abs=1e-9)
        sh = inst.state_index[Node.SH]
        assert pol.x[sh].sum() >= base.x[sh].sum() - 1e-9
        assert sm.verify_solution(inst, pol.x).ok(1e-9)

    def test_polish_deterministic(self, small_network):
        win = random_window(small_network, 6, seed=31, neg_sell_hours=1)
        inst = sm.build_milp(small_network, win)
        a = sm.solve_canonical(inst, SolverConfig(engine="highs"))
        b = sm.solve_canonical(inst, SolverConfig(engine="highs"))
        assert np.array_equal(a.x, b.x)

    def test_explicit_polish_indices(self, small_network):
        win = random_window(small_network, 4, seed=32)
        inst = sm.build_milp(small_network, win)
        idx = inst.state_index[Node.SE]
        base = solve_milp(inst, SolverConfig(engine="highs"))
        pol = sm.solve_canonical(
            inst, SolverConfig(engine="highs"), polish_indices=idx
        )
        assert pol.objective == pytest.approx(base.objective, rel=1e-9, abs=1e-9)
        assert pol.x[idx].sum() >= base.x[idx].sum() - 1e-9


class TestRelaxationClaim:
    @pytest.mark.parametrize("seed", range(10))
    def test_no_simultaneous_charge_discharge_at_positive_prices(
        self, small_network, seed
    ):
        win = random_window(small_network, 8, seed=400 + seed)
        assert sm.flag_binary_steps(win).size == 0
        inst = sm.build_milp(small_network, win)
        res = solve_lp(inst, SolverConfig(engine="highs"))
        assert res.status is sm.SolveStatus.OPTIMAL
        for node in (Node.SE, Node.SH):
            inflow = sum(
                res.x[idx] for (a, b), idx in inst.flow_index.items() if b is node
            )
            outflow = sum(
                res.x[idx] for (a, b), idx in inst.flow_index.items() if a is node
            )
            overlap = np.minimum(inflow, outflow)
            assert overlap.max() <= 1e-9
