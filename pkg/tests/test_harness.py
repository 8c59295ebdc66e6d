"""Experiment harness and command-line interface, end to end."""

import json

import numpy as np
import pytest

import fogas
from fogas import harness
from fogas.cli import main as cli_main
from fogas.oracle import evaluate_policy, solve_optimal


class TestBehaviorPolicy:
    def test_uniform(self, default_mdp):
        beh = harness.behavior_policy(default_mdp, "uniform")
        assert np.allclose(beh.probs, 1.0 / 3.0)

    def test_eps_zero_is_optimal(self, default_mdp):
        beh = harness.behavior_policy(default_mdp, "eps:0")
        pi_star, _ = solve_optimal(default_mdp)
        assert np.array_equal(beh.probs, pi_star.probs)

    def test_eps_one_is_uniform(self, default_mdp):
        beh = harness.behavior_policy(default_mdp, "eps:1")
        assert np.allclose(beh.probs, 1.0 / 3.0)

    def test_invalid_specs(self, default_mdp):
        with pytest.raises(ValueError):
            harness.behavior_policy(default_mdp, "eps:1.5")
        with pytest.raises(ValueError):
            harness.behavior_policy(default_mdp, "greedy")


class TestExperimentConfig:
    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({
            "mdp": {"states": 5, "actions": 3, "dim": 4, "gamma": 0.9},
            "bogus": 1,
        }))
        with pytest.raises(ValueError, match="bogus"):
            harness.ExperimentConfig.from_json(path)

    def test_empty_seeds_rejected(self):
        with pytest.raises(ValueError, match="seeds"):
            harness.ExperimentConfig(mdp={"path": "x"}, seeds=())

    def test_bad_n_rejected(self):
        with pytest.raises(ValueError):
            harness.ExperimentConfig(mdp={"path": "x"}, n_values=(0,))

    def test_generator_params(self):
        cfg = harness.ExperimentConfig(
            mdp={"states": 5, "actions": 3, "dim": 4, "gamma": 0.9, "seed": 2})
        mdp = cfg.load_mdp()
        assert mdp.num_states == 5 and mdp.dim == 4


class TestResolveIterations:
    def test_explicit_wins(self, default_mdp):
        assert harness.resolve_iterations(default_mdp, 4096, {"T": 7}) == 7

    def test_cap_applies(self, default_mdp):
        T = harness.resolve_iterations(default_mdp, 10**7, {"T_cap": 500})
        assert T == 500

    def test_theorem_minimum_used(self, default_mdp):
        from fogas.solver import theoretical_min_iterations
        T = harness.resolve_iterations(default_mdp, 1024, {})
        assert T == int(np.ceil(theoretical_min_iterations(default_mdp, 1024, 0.05)))


class TestRunCell:
    def test_record_sane(self, default_mdp):
        beh = fogas.uniform_policy(5, 3)
        record, run = harness.run_cell(default_mdp, beh, "uniform", 256, 0,
                                       {"auto_tune": True, "T": 40})
        assert record.n == 256 and record.T == 40
        assert record.suboptimality >= -1e-9
        assert record.suboptimality <= 1.0 / (1.0 - 0.9)
        assert record.mean_suboptimality >= -1e-9
        assert record.coverage_ratio > 0
        assert record.status == "ok"

    def test_t1_suboptimality_is_uniform_gap(self, default_mdp):
        beh = fogas.uniform_policy(5, 3)
        record, _ = harness.run_cell(default_mdp, beh, "uniform", 128, 0,
                                     {"auto_tune": True, "T": 1})
        _, star = solve_optimal(default_mdp)
        uniform_gap = star.return_value \
            - evaluate_policy(default_mdp, beh).return_value
        assert abs(record.suboptimality - uniform_gap) <= 1e-10


class TestSweep:
    def make_config(self, **overrides):
        fields = dict(
            mdp={"states": 5, "actions": 3, "dim": 4, "gamma": 0.9, "seed": 0},
            behavior="uniform",
            sampling_mode="uniform",
            n_values=(64, 128),
            seeds=(0, 1),
            fogas={"auto_tune": True, "T": 30},
        )
        fields.update(overrides)
        return harness.ExperimentConfig(**fields)

    def test_grid_shape_and_schema(self, tmp_path):
        records = harness.run_sweep(self.make_config())
        assert len(records) == 4
        out = tmp_path / "results.csv"
        harness.write_records(records, out)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == ("mdp_id,n,seed,T,coverage_ratio,suboptimality,"
                            "mean_suboptimality,wall_time_ms,status")
        assert len(lines) == 5

    def test_reproducible_modulo_timing(self):
        def strip_timing(records):
            return [(r.mdp_id, r.n, r.seed, r.T, r.coverage_ratio,
                     r.suboptimality, r.mean_suboptimality, r.status)
                    for r in records]
        a = harness.run_sweep(self.make_config())
        b = harness.run_sweep(self.make_config())
        assert strip_timing(a) == strip_timing(b)

    def test_failures_recorded_per_row(self):
        config = self.make_config(
            fogas={"auto_tune": True, "T": 30, "eta": 1e250, "d_theta": 1e100})
        records = harness.run_sweep(config)
        assert all(r.status.startswith("error:") for r in records)

    def test_summary_median(self):
        records = harness.run_sweep(self.make_config())
        summary = harness.summarize_by_n(records)
        assert set(summary) == {64, 128}
        assert all(np.isfinite(v) for v in summary.values())

    def test_median_suboptimality_improves_with_n(self, default_mdp):
        """Sample-size sweep on the default environment: the bigger dataset
        should score better in the median."""
        beh = fogas.uniform_policy(5, 3)
        medians = {}
        for n in (256, 16384):
            subs = [harness.run_cell(default_mdp, beh, "uniform", n, seed,
                                     {"auto_tune": True, "T_cap": 20000})[0]
                    .suboptimality for seed in range(10)]
            medians[n] = np.median(subs)
        assert medians[16384] < medians[256]


class TestCli:
    def generate(self, tmp_path):
        mdp_path = tmp_path / "m.json"
        code = cli_main(["generate", "--states", "5", "--actions", "3",
                         "--dim", "4", "--gamma", "0.9", "--seed", "1",
                         "--out", str(mdp_path)])
        assert code == 0
        return mdp_path

    def test_generate_validate(self, tmp_path, capsys):
        mdp_path = self.generate(tmp_path)
        out = capsys.readouterr().out
        assert "R = " in out and "d = 4" in out
        assert cli_main(["validate", "--mdp", str(mdp_path)]) == 0
        assert "ok" in capsys.readouterr().out

    def test_generate_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        for p in (a, b):
            cli_main(["generate", "--states", "5", "--actions", "3",
                      "--dim", "4", "--gamma", "0.9", "--seed", "1",
                      "--out", str(p)])
        assert a.read_bytes() == b.read_bytes()

    def test_generate_bad_dim(self, tmp_path, capsys):
        code = cli_main(["generate", "--states", "5", "--actions", "3",
                         "--dim", "0", "--gamma", "0.9",
                         "--out", str(tmp_path / "m.json")])
        assert code == 2
        assert "dim must be" in capsys.readouterr().err

    def test_validate_flags_corruption(self, tmp_path, capsys):
        mdp_path = self.generate(tmp_path)
        doc = json.loads(mdp_path.read_text())
        doc["omega"] = [3.0] * 4  # norm exceeds sqrt(d)
        mdp_path.write_text(json.dumps(doc))
        assert cli_main(["validate", "--mdp", str(mdp_path)]) == 1
        assert "omega-norm" in capsys.readouterr().out

    def test_missing_file_exit_code(self, tmp_path, capsys):
        assert cli_main(["validate", "--mdp", str(tmp_path / "nope.json")]) == 1
        assert "not found" in capsys.readouterr().err

    def test_collect_row_count(self, tmp_path, capsys):
        mdp_path = self.generate(tmp_path)
        data_path = tmp_path / "d.csv"
        code = cli_main(["collect", "--mdp", str(mdp_path), "--n", "10",
                         "--seed", "0", "--out", str(data_path)])
        assert code == 0
        lines = data_path.read_text().strip().split("\n")
        assert lines[0] == "x,a,r,x_next"
        assert len(lines) == 11

    def pipeline(self, tmp_path, extra_solve_args=()):
        mdp_path = self.generate(tmp_path)
        data_path = tmp_path / "d.csv"
        run_path = tmp_path / "run.json"
        cli_main(["collect", "--mdp", str(mdp_path), "--n", "256",
                  "--seed", "0", "--out", str(data_path)])
        code = cli_main(["solve", "--mdp", str(mdp_path), "--data",
                         str(data_path), "--auto-tune", "--T", "40",
                         "--seed", "0", "--out", str(run_path),
                         *extra_solve_args])
        assert code == 0
        return mdp_path, data_path, run_path

    def test_solve_and_diagnose(self, tmp_path, capsys):
        mdp_path, data_path, run_path = self.pipeline(
            tmp_path, ("--record-trajectory",))
        report_path = tmp_path / "gap.csv"
        code = cli_main(["diagnose", "--mdp", str(mdp_path), "--data",
                         str(data_path), "--run", str(run_path),
                         "--out", str(report_path)])
        assert code == 0
        lines = report_path.read_text().strip().split("\n")
        assert lines[0].startswith("gap,regret_pi,regret_lambda")
        values = dict(zip(lines[0].split(","), lines[1].split(",")))
        assert float(values["decomposition_residual"]) <= 1e-8
        assert float(values["identity_residual"]) <= 1e-8

    def test_diagnose_without_trajectory_advises(self, tmp_path, capsys):
        mdp_path, data_path, run_path = self.pipeline(tmp_path)
        code = cli_main(["diagnose", "--mdp", str(mdp_path), "--data",
                         str(data_path), "--run", str(run_path),
                         "--out", str(tmp_path / "gap.csv")])
        assert code == 1
        assert "--record-trajectory" in capsys.readouterr().err

    def test_solve_manual_rates(self, tmp_path, capsys):
        mdp_path = self.generate(tmp_path)
        data_path = tmp_path / "d.csv"
        cli_main(["collect", "--mdp", str(mdp_path), "--n", "128",
                  "--seed", "0", "--out", str(data_path)])
        results = tmp_path / "results.csv"
        code = cli_main(["solve", "--mdp", str(mdp_path), "--data",
                         str(data_path), "--rates", "0.01,0.1,0.05,0.001",
                         "--T", "30", "--seed", "0",
                         "--out", str(tmp_path / "run.json"),
                         "--results", str(results)])
        assert code == 0
        lines = results.read_text().strip().split("\n")
        assert len(lines) == 2 and lines[1].split(",")[1] == "128"

    def test_solve_requires_rates_or_auto(self, tmp_path, capsys):
        mdp_path = self.generate(tmp_path)
        data_path = tmp_path / "d.csv"
        cli_main(["collect", "--mdp", str(mdp_path), "--n", "16",
                  "--seed", "0", "--out", str(data_path)])
        code = cli_main(["solve", "--mdp", str(mdp_path), "--data",
                         str(data_path), "--T", "5", "--seed", "0",
                         "--out", str(tmp_path / "run.json")])
        assert code == 2

    def test_sweep_csv(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "mdp": {"states": 5, "actions": 3, "dim": 4, "gamma": 0.9,
                    "seed": 0},
            "n_values": [64, 128],
            "seeds": [0, 1],
            "fogas": {"auto_tune": True, "T": 20},
        }))
        out = tmp_path / "results.csv"
        assert cli_main(["sweep", "--config", str(cfg_path),
                         "--out", str(out)]) == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 5
        printed = capsys.readouterr().out
        assert "median_mean_suboptimality" in printed
