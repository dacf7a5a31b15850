"""CLI verbs wired end to end on a miniature synthetic case."""

import csv

import pytest
import yaml

from seasonmpc.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main


@pytest.fixture(scope="module")
def case_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("case")
    assert main(["synth", "--out", str(d), "--days", "6", "--seed", "5"]) == EXIT_OK
    # shrink storages so six days of data exercise them
    cfg_path = d / "case.yaml"
    cfg = yaml.safe_load(cfg_path.read_text())
    cfg["battery"].update(e_max_kwh=20.0, e_init_kwh=4.0, e_end_kwh=4.0)
    cfg["heat_storage"].update(
        e_max_kwh=90.0, e_init_kwh=30.0, e_end_kwh=30.0,
        p_ch_max_kw=8.0, p_dis_max_kw=8.0,
    )
    cfg_path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return d


@pytest.fixture(scope="module")
def run_dir(case_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    rc = main(
        ["full-horizon", "--config", str(case_dir / "case.yaml"),
         "--out", str(out), "--engine", "highs"]
    )
    assert rc == EXIT_OK
    return out


class TestVerbs:
    def test_synth_writes_files(self, case_dir):
        for name in (
            "case.yaml", "electric_load.csv", "heat_electricity.csv",
            "pv_unit.csv", "irradiance.csv", "spot_price.csv",
        ):
            assert (case_dir / name).exists()

    def test_full_horizon_trace(self, run_dir):
        assert (run_dir / "trace_full-horizon.csv").exists()
        assert (run_dir / "results.csv").exists()

    def test_derive_targets_from_trace(self, case_dir, run_dir):
        rc = main(
            ["derive-targets", "--config", str(case_dir / "case.yaml"),
             "--trace", str(run_dir / "trace_full-horizon.csv"),
             "--out", str(run_dir / "targets.csv")]
        )
        assert rc == EXIT_OK
        with (run_dir / "targets.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6 * 24

    def test_rolling_hybrid_and_report(self, case_dir, run_dir):
        rc = main(
            ["rolling", "--config", str(case_dir / "case.yaml"),
             "--strategy", "hybrid", "--horizon-days", "2",
             "--targets", str(run_dir / "targets.csv"),
             "--out", str(run_dir), "--engine", "highs"]
        )
        assert rc == EXIT_OK
        rc = main(
            ["rolling", "--config", str(case_dir / "case.yaml"),
             "--strategy", "fixed-level", "--horizon-days", "2",
             "--out", str(run_dir), "--engine", "highs"]
        )
        assert rc == EXIT_OK
        rc = main(
            ["report", "--out", str(run_dir / "report"),
             "--benchmark", str(run_dir / "trace_full-horizon.csv"),
             "--trace", str(run_dir / "trace_hybrid-2d.csv"),
             "--trace", str(run_dir / "trace_fixed-level-2d.csv"),
             "--infeasible", "hybrid:1:0"]
        )
        assert rc == EXIT_OK
        table = (run_dir / "report" / "results.csv").read_text().splitlines()
        assert len(table) == 5
        assert (run_dir / "report" / "results_soe_sh.svg").exists()

    def test_min_horizon_single_day(self, case_dir, tmp_path):
        rc = main(
            ["min-horizon", "--config", str(case_dir / "case.yaml"),
             "--day", "0", "--max-days", "3",
             "--out", str(tmp_path), "--engine", "highs"]
        )
        assert rc == EXIT_OK
        text = (tmp_path / "min_horizon.csv").read_text()
        assert text.startswith("day,min_horizon_days")

    def test_dump_lp(self, case_dir, tmp_path):
        rc = main(
            ["rolling", "--config", str(case_dir / "case.yaml"),
             "--strategy", "free", "--horizon-days", "2",
             "--out", str(tmp_path), "--engine", "highs",
             "--dump-lp", str(tmp_path / "lps")]
        )
        assert rc == EXIT_OK
        lps = list((tmp_path / "lps").glob("*.lp"))
        assert len(lps) == 6  # one per day
        from seasonmpc.lp_io import read_lp

        inst = read_lp(lps[0])
        assert inst.n_rows > 0


class TestExitCodes:
    def test_missing_config_is_input_error(self, tmp_path):
        rc = main(["full-horizon", "--config", str(tmp_path / "no.yaml"),
                   "--out", str(tmp_path)])
        assert rc == EXIT_INPUT

    def test_hybrid_without_targets_is_input_error(self, case_dir, tmp_path):
        rc = main(
            ["rolling", "--config", str(case_dir / "case.yaml"),
             "--strategy", "hybrid", "--horizon-days", "2", "--out", str(tmp_path)]
        )
        assert rc == EXIT_INPUT

    def test_infeasible_exit_code(self, case_dir, run_dir, tmp_path):
        # a 60 kWh target jump against a 1 kW charger (under 19 kWh per day)
        import numpy as np

        import seasonmpc as sm

        cfg = yaml.safe_load((case_dir / "case.yaml").read_text())
        cfg["heat_storage"]["p_ch_max_kw"] = 1.0
        for entry in cfg["series"].values():  # config moves: make paths absolute
            entry["path"] = str((case_dir / entry["path"]).resolve())
        slow = tmp_path / "slow.yaml"
        slow.write_text(yaml.safe_dump(cfg, sort_keys=False))

        jump = np.full(6 * 24, 30.0)
        jump[47:] = 90.0
        sm.write_targets_csv(tmp_path / "jump.csv", sm.TargetSeries(jump))
        rc = main(
            ["rolling", "--config", str(slow),
             "--strategy", "hybrid", "--horizon-days", "1",
             "--targets", str(tmp_path / "jump.csv"),
             "--out", str(tmp_path), "--engine", "highs"]
        )
        assert rc == EXIT_INFEASIBLE
        table = (tmp_path / "results_hybrid-1d.csv").read_text()
        assert "infeasible" in table
