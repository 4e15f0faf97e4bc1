import csv
import json
import math

import numpy as np
import pytest

from cempid.cli import main
from cempid.config import DEFAULT_CONFIG, config_digest, load_config
from cempid.errors import ConfigError
from cempid.harness import (AGGREGATE_HEADER, HISTORY_HEADER, TRACE_HEADER,
                            build_scenario, evaluate, train)
from cempid.policy import NUM_WEIGHTS, load_weights


@pytest.fixture()
def tiny_cfg(tmp_path):
    """Fast end-to-end config: light plant, small population, short runs."""
    cfg = {
        "vehicle": {
            "rigid_body_mass_matrix": [12.0, 12.0, 12.0, 2.0, 2.5, 2.2],
            "added_mass_matrix": [6.0, 6.0, 6.0, 1.0, 1.25, 1.1],
            "linear_damping": [6.0, 6.0, 9.0, 1.5, 1.8, 1.6],
            "quadratic_damping": [8.0, 10.0, 16.0, 4.0, 5.0, 3.5],
            "weight_N": 117.72,
            "buoyancy_N": 117.92,
            "cog_to_cob_offset": [0.0, 0.0, -0.08],
            "thruster_allocation_B": [1.0] * 6,
        },
        "cem": {"population": 4, "elite_fraction": 0.5, "noise_var": 0.05,
                "init_var": 1.0, "epochs": 3, "checkpoint_every": 2,
                "workers": 1},
        "scenarios": {
            "train": {"episode_steps": 25,
                      "init_pose_bounds": [[-1.0, 1.0]] + [[0.0, 0.0]] * 5},
            "eval": {"episode_steps": 40, "episodes": 2,
                     "init_pose_bounds": [[-0.5, 0.5], [-0.5, 0.5],
                                          [0.0, 0.0], [0.0, 0.0],
                                          [0.0, 0.0], [-0.3, 0.3]],
                     "sensor_noise_std": [0.05] * 3 + [0.02] * 3,
                     "actuator_noise_std": [0.6] * 3 + [0.25] * 3,
                     "current": {"v_c": 0.3, "h_c": 0.785, "j_c": 0.0}},
        },
        "rng": {"master_seed": 0, "basis_seed": 42},
    }
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(cfg))
    return load_config(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def strip_wallclock(path):
    rows = read_csv(path)
    return [{k: v for k, v in row.items() if k != "wallclock_s"}
            for row in rows]


class TestConfig:
    def test_defaults_load(self):
        cfg = load_config(None)
        assert cfg == DEFAULT_CONFIG

    def test_digest_stable_and_sensitive(self):
        a = load_config(None)
        b = load_config(None)
        assert config_digest(a) == config_digest(b)
        b["cem"]["population"] = 13
        assert config_digest(a) != config_digest(b)

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")

    def test_invalid_json_is_config_error(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_unknown_key_warned_and_ignored(self, tmp_path, caplog):
        p = tmp_path / "extra.json"
        p.write_text(json.dumps({"cem": {"population": 10, "turbo": True}}))
        cfg = load_config(p)
        assert cfg["cem"]["population"] == 10
        assert "turbo" in caplog.text

    def test_zero_elite_rejected(self, tmp_path):
        p = tmp_path / "z.json"
        p.write_text(json.dumps({"cem": {"population": 3,
                                         "elite_fraction": 0.1}}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_bad_bounds_rejected(self, tmp_path):
        p = tmp_path / "b.json"
        p.write_text(json.dumps(
            {"scenarios": {"train": {"init_pose_bounds": [[1, -1]] * 6}}}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_scenario_mapping(self):
        cfg = load_config(None)
        assert build_scenario(cfg, "train").kind == "none"
        assert build_scenario(cfg, "none").kind == "none"
        assert build_scenario(cfg, "sensor").kind == "sensor_noise"
        sc = build_scenario(cfg, "actuator-current")
        assert sc.kind == "actuator_noise_with_current"
        assert sc.current.v_c == 0.5
        with pytest.raises(ConfigError):
            build_scenario(cfg, "storm")


class TestTrainArtifacts:
    def test_artifacts_and_headers(self, tiny_cfg, tmp_path):
        out = tmp_path / "run"
        summary = train(tiny_cfg, out, master_seed=1)
        assert (out / "history.csv").exists()
        assert (out / "weights_best.json").exists()
        assert (out / "checkpoint_0002.json").exists()
        assert (out / "checkpoint_final.json").exists()
        assert (out / "run_metadata.json").exists()

        rows = read_csv(out / "history.csv")
        assert list(rows[0].keys()) == HISTORY_HEADER
        assert len(rows) == 3
        assert math.isfinite(summary["best_cost"])

        weights, scale, meta = load_weights(out / "weights_best.json")
        assert weights.shape == (NUM_WEIGHTS,)
        assert meta["seed"] == 1

        ckpt = json.loads((out / "checkpoint_final.json").read_text())
        assert len(ckpt["cem"]["mean"]) == NUM_WEIGHTS
        assert len(ckpt["cem"]["variance"]) == NUM_WEIGHTS
        assert ckpt["cem"]["iteration"] == 3

        md = json.loads((out / "run_metadata.json").read_text())
        for key in ("master_seed", "config_digest", "basis_seed", "scenario",
                    "controller_id", "code_version"):
            assert key in md
        assert md["config_digest"] == config_digest(tiny_cfg)

    def test_best_cost_non_increasing(self, tiny_cfg, tmp_path):
        train(tiny_cfg, tmp_path / "r", master_seed=2)
        bests = [float(r["best_cost"]) for r in read_csv(tmp_path / "r/history.csv")]
        assert all(b2 <= b1 for b1, b2 in zip(bests, bests[1:]))

    def test_deterministic_across_runs_and_workers(self, tiny_cfg, tmp_path):
        train(tiny_cfg, tmp_path / "a", master_seed=3, workers=1)
        train(tiny_cfg, tmp_path / "b", master_seed=3, workers=4)
        assert strip_wallclock(tmp_path / "a/history.csv") == \
            strip_wallclock(tmp_path / "b/history.csv")
        assert (tmp_path / "a/weights_best.json").read_bytes() == \
            (tmp_path / "b/weights_best.json").read_bytes()

    def test_mean_cost_decreases_on_smoke_config(self):
        cfg = load_config("configs/smoke.json")
        import tempfile
        with tempfile.TemporaryDirectory() as td:
            train(cfg, td, master_seed=0, epochs=12)
            rows = read_csv(f"{td}/history.csv")
        first, last = float(rows[0]["mean_cost"]), float(rows[-1]["mean_cost"])
        assert last < first


class TestEvaluateArtifacts:
    def test_naive_only(self, tiny_cfg, tmp_path):
        out = tmp_path / "eval"
        summary = evaluate(tiny_cfg, out, "none", weights_path=None,
                           episodes=2, master_seed=5)
        assert set(summary) == {"naive_pid"}
        rows = read_csv(out / "aggregate.csv")
        assert list(rows[0].keys()) == AGGREGATE_HEADER
        assert [r["controller"] for r in rows] == ["naive_pid"]
        traces = sorted(out.glob("trace_*.csv"))
        assert len(traces) == 2
        assert list(read_csv(traces[0])[0].keys()) == TRACE_HEADER

    def test_both_controllers_with_weights(self, tiny_cfg, tmp_path):
        run = tmp_path / "train"
        summary = train(tiny_cfg, run, master_seed=1)
        out = tmp_path / "eval"
        result = evaluate(tiny_cfg, out, "sensor",
                          weights_path=summary["weights"], episodes=2,
                          master_seed=5)
        assert set(result) == {"lb_pid", "naive_pid"}
        rows = read_csv(out / "aggregate.csv")
        assert sorted(r["controller"] for r in rows) == ["lb_pid", "naive_pid"]
        assert all(r["scenario"] == "sensor" for r in rows)
        assert len(list(out.glob("trace_*.csv"))) == 4
        assert len(list(out.glob("*.png"))) >= 3

    def test_deterministic_outputs(self, tiny_cfg, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        evaluate(tiny_cfg, a, "actuator-current", episodes=2, master_seed=9)
        evaluate(tiny_cfg, b, "actuator-current", episodes=2, master_seed=9,
                 workers=4)
        for name in [p.name for p in a.glob("*.csv")]:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_cumulative_columns_match_recomputation(self, tiny_cfg, tmp_path):
        out = tmp_path / "eval"
        evaluate(tiny_cfg, out, "none", episodes=1, master_seed=7)
        trace = read_csv(next(iter(sorted(out.glob("trace_naive*.csv")))))
        stable = [row["state_stable"] == "1" for row in trace]
        allflags = [all(row[f"c{i}"] == "1" for i in range(1, 6))
                    for row in trace]
        hits_s = hits_p = 0
        for k, row in enumerate(trace):
            if k >= 1 and stable[k]:
                hits_s += 1
            if allflags[k]:
                hits_p += 1
            if k >= 1:
                assert float(row["cum_state_pct"]) == pytest.approx(
                    100.0 * hits_s / k)
            else:
                assert math.isnan(float(row["cum_state_pct"]))
            assert float(row["cum_param_pct"]) == pytest.approx(
                100.0 * hits_p / (k + 1))

    def test_aggregate_consistency_with_traces(self, tiny_cfg, tmp_path):
        out = tmp_path / "eval"
        summary = evaluate(tiny_cfg, out, "none", episodes=2, master_seed=11)
        js = []
        for ep in range(2):
            rows = read_csv(out / f"trace_naive_pid_none_ep{ep:03d}.csv")
            js.append(sum(float(r["cost"]) for r in rows))
        assert summary["naive_pid"]["j_mean"] == pytest.approx(np.mean(js))


class TestCli:
    def test_check_ok(self, capsys):
        assert main(["check"]) == 0
        out = capsys.readouterr().out
        assert "config OK" in out
        assert "FAIL" not in out

    def test_train_eval_plot_pipeline(self, tiny_cfg, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_cfg))
        train_dir = tmp_path / "t"
        assert main(["train", "--config", str(cfg_path), "--seed", "1",
                     "--out", str(train_dir), "--epochs", "2"]) == 0
        eval_dir = tmp_path / "e"
        assert main(["eval", "--config", str(cfg_path),
                     "--weights", str(train_dir / "weights_best.json"),
                     "--scenario", "none", "--episodes", "1",
                     "--out", str(eval_dir), "--seed", "2"]) == 0
        plot_dir = tmp_path / "p"
        assert main(["plot", "--in", str(eval_dir), "--out", str(plot_dir)]) == 0
        assert len(list(plot_dir.glob("*.png"))) >= 3

    def test_eval_naive_flag(self, tiny_cfg, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(tiny_cfg))
        assert main(["eval", "--config", str(cfg_path), "--naive",
                     "--scenario", "sensor", "--episodes", "1",
                     "--out", str(tmp_path / "ne")]) == 0

    def test_bad_config_exit_code(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{broken")
        assert main(["train", "--config", str(p),
                     "--out", str(tmp_path / "x")]) == 2

    def test_missing_weights_exit_code(self, tmp_path):
        assert main(["eval", "--weights", str(tmp_path / "missing.json"),
                     "--scenario", "none", "--out", str(tmp_path / "y")]) == 4

    def test_invalid_weights_exit_code(self, tmp_path):
        bad = tmp_path / "w.json"
        bad.write_text(json.dumps({"weights": [0.0] * 10,
                                   "state_scale": [1.0] * 18}))
        assert main(["eval", "--weights", str(bad), "--scenario", "none",
                     "--out", str(tmp_path / "z")]) == 2
