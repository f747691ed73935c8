"""Seeded trials, sweeps, CSV and manifest output, and the command-line entry point."""

import csv
import json

import numpy as np
import pytest

from sparse_isac.beamforming import StopRule
from sparse_isac.cli import EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, main
from sparse_isac.config import TargetScene, profile_config
from sparse_isac.harness import (
    RECORD_FIELDS,
    ExperimentPlan,
    MetricRecord,
    aggregate,
    atomic_write,
    random_scene,
    records_to_csv,
    run_sweep,
    run_trial,
    strategy_mask,
    trial_seed,
)
from sparse_isac.sensing import bins_to_parameters

SHORT = StopRule(max_iter=40)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestSeeds:
    def test_deterministic_and_distinct(self):
        assert trial_seed(0, 3) == trial_seed(0, 3)
        assert len({trial_seed(0, t) for t in range(100)}) == 100
        assert trial_seed(0, 1) != trial_seed(1, 1)

    def test_fits_64_bits(self):
        assert 0 <= trial_seed(2 ** 64 - 1, 7) < 2 ** 64

    def test_scene_within_bounds(self, desk):
        cfg = desk.replace(n_targets=50)
        scene = random_scene(cfg, 4)
        assert scene.Q == 50
        assert np.all((scene.theta >= cfg.theta_a) & (scene.theta <= cfg.theta_b))
        assert np.all((scene.d >= cfg.d_ref) & (scene.d <= cfg.d_0))
        assert np.all(np.abs(scene.v) <= cfg.v_max)

    def test_unknown_strategy(self, desk):
        with pytest.raises(ValueError):
            strategy_mask(desk, "radar_only", 0)


class TestRunTrial:
    def test_comm_only_ignores_sensing(self, desk):
        a = run_trial(desk, "comm_only", 5, SHORT)
        b = run_trial(desk.replace(Gamma_0=10.0), "comm_only", 5, SHORT)
        assert a.sum_rate_bits == b.sum_rate_bits
        assert a.rmse_d_m is None and a.misses is None and a.min_snr_margin_db is None

    @pytest.mark.parametrize("strategy", ["cs_assisted", "full_subcarrier"])
    def test_deterministic(self, desk, strategy):
        a = run_trial(desk, strategy, 8, SHORT)
        b = run_trial(desk, strategy, 8, SHORT)
        assert a.row() == b.row()
        assert a.rmse_theta_rad is not None

    @pytest.mark.parametrize("strategy", ["cs_assisted", "full_subcarrier"])
    def test_on_grid_noiseless_scene_is_exact(self, desk, strategy):
        s, d, v = bins_to_parameters(0, -1, 2, desk)
        scene = TargetScene(np.arcsin(s), d, v, 1.0)
        rec = run_trial(desk, strategy, 12, SHORT, scene=scene, noiseless=True)
        assert rec.misses == 0
        assert rec.rmse_theta_rad == pytest.approx(0.0, abs=1e-12)
        assert rec.rmse_d_m == pytest.approx(0.0, abs=1e-9)
        assert rec.rmse_v_mps == pytest.approx(0.0, abs=1e-9)


class TestRecords:
    def test_row_formatting(self):
        rec = MetricRecord("cs_assisted", 3, 1.25, rmse_d_m=float("nan"), converged=True, value=0.1)
        row = rec.row()
        assert list(row) == list(RECORD_FIELDS)
        assert row["sum_rate_bits"] == "1.25" and row["rmse_d_m"] == "" and row["rmse_v_mps"] == ""
        assert row["converged"] == 1 and row["value"] == "0.1"

    def test_csv_round_trip_is_exact(self):
        rec = MetricRecord("full_subcarrier", 1, 0.1 + 0.2, value=-5.0)
        rows = list(csv.DictReader(records_to_csv([rec]).splitlines()))
        assert float(rows[0]["sum_rate_bits"]) == 0.1 + 0.2

    def test_aggregate_is_arithmetic_mean(self):
        recs = [MetricRecord("cs_assisted", t, 1.0 + t / 3, rmse_d_m=2.0 * t, misses=t % 2, value=1.0,
                             converged=True, feasible=True, iterations=10 + t) for t in range(5)]
        recs.append(MetricRecord("cs_assisted", 9, float("nan"), value=1.0, status="error: boom"))
        (mean,) = aggregate(recs)
        assert mean.sum_rate_bits == pytest.approx(np.mean([1.0 + t / 3 for t in range(5)]), abs=1e-12)
        assert mean.rmse_d_m == pytest.approx(4.0, abs=1e-12)
        assert mean.misses == 2 and mean.iterations == 12 and mean.trial == "mean"
        assert mean.rmse_theta_rad is None

    def test_atomic_write_replaces(self, tmp_path):
        path = tmp_path / "sub" / "f.txt"
        atomic_write(path, "one")
        atomic_write(path, "two")
        assert path.read_text() == "two"
        assert [p.name for p in path.parent.iterdir()] == ["f.txt"]


class TestPlan:
    def test_bad_axis(self, desk):
        with pytest.raises(ValueError):
            ExperimentPlan(desk, "bandwidth", [1.0])

    def test_non_integer_size(self, desk):
        with pytest.raises(ValueError):
            ExperimentPlan(desk, "N_t", [6.5])

    def test_invalid_point_rejected_up_front(self, desk):
        with pytest.raises(ValueError):
            ExperimentPlan(desk, "K", [2, 20])

    def test_job_order(self, desk):
        plan = ExperimentPlan(desk, "P_0", [1.0, 2.0], trials=2, strategies=("comm_only",))
        assert plan.jobs() == [("comm_only", 0, 0), ("comm_only", 0, 1), ("comm_only", 1, 0), ("comm_only", 1, 1)]
        assert plan.config_at(2.0).P_0 == 2.0


@pytest.fixture(scope="module")
def small_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    plan = ExperimentPlan(profile_config("desk"), "Gamma_0_db", [-10.0, -5.0], trials=2,
                          strategies=("cs_assisted", "comm_only"), out=out, master_seed=3, stop=SHORT)
    return plan, run_sweep(plan)


class TestSweep:
    def test_outputs(self, small_sweep):
        plan, result = small_sweep
        rows = read_rows(result.csv_path)
        assert len(rows) == 2 * 2 * 2 + 2 * 2
        assert sum(r["trial"] == "mean" for r in rows) == 4
        timings = (plan.out / "sweep_Gamma_0_db.timings.csv").read_text().splitlines()
        assert timings[0] == "strategy,value,trial,runtime_ms" and len(timings) == 9
        manifest = json.loads((plan.out / "sweep_Gamma_0_db.manifest.json").read_text())
        assert manifest["trial_seeds"] == [trial_seed(3, 0), trial_seed(3, 1)]
        assert manifest["config_hash"] == plan.base.digest()
        assert "runtime_ms" not in rows[0]

    def test_means_match_rows(self, small_sweep):
        plan, result = small_sweep
        for value in plan.values:
            for strategy in plan.strategies:
                rates = [r.sum_rate_bits for r in result.records if r.strategy == strategy and r.value == value]
                assert result.mean(strategy, value).sum_rate_bits == pytest.approx(np.mean(rates), abs=1e-12)

    def test_trials_share_draws_across_values(self, small_sweep):
        _, result = small_sweep
        comm = [r for r in result.records if r.strategy == "comm_only"]
        by_trial = {}
        for r in comm:
            by_trial.setdefault(r.trial, set()).add(r.sum_rate_bits)
        assert all(len(v) == 1 for v in by_trial.values())

    def test_rerun_is_byte_identical(self, small_sweep, tmp_path):
        plan, result = small_sweep
        again = ExperimentPlan(plan.base, plan.axis, plan.values, trials=plan.trials, strategies=plan.strategies,
                               out=tmp_path, master_seed=plan.master_seed, stop=plan.stop)
        assert run_sweep(again).csv_path.read_bytes() == result.csv_path.read_bytes()


class TestCli:
    def test_validate_ok(self, tmp_path, capsys):
        path = tmp_path / "c.yaml"
        path.write_text("beamforming:\n  p_0_w: 5\n")
        assert main(["validate", "--config", str(path)]) == EXIT_OK
        assert capsys.readouterr().out.startswith("ok:")

    def test_unknown_key(self, tmp_path, capsys):
        path = tmp_path / "c.yaml"
        path.write_text("beamforming:\n  p0: 5\n")
        assert main(["validate", "--config", str(path)]) == EXIT_USAGE
        assert "config error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "none.yaml")]) == EXIT_USAGE

    def test_bad_sweep_value(self, tmp_path):
        assert main(["run", "--sweep", "K", "--values", "1.5", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_usage_error_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--sweep", "K", "--values", "1", "--out", str(tmp_path), "--strategies", "nope"])
        assert exc.value.code == 2

    def test_run(self, tmp_path, capsys):
        args = ["run", "--sweep", "P_0", "--values", "5", "--trials", "1", "--strategies", "comm_only",
                "--out", str(tmp_path), "--max-iter", "3"]
        assert main(args) == EXIT_NONCONVERGED
        assert main(args + ["--allow-nonconverged"]) == EXIT_OK
        assert "wrote" in capsys.readouterr().out
        assert len(read_rows(tmp_path / "sweep_P_0.csv")) == 2
