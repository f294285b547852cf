import json
import math
import os

import pytest

from obd.cli import Config, run_cli


def test_help_exits_zero(capsys):
    assert run_cli(["--help"]) == 0
    assert "experiment" in capsys.readouterr().out


def test_version(capsys):
    assert run_cli(["--version"]) == 0
    assert "obd" in capsys.readouterr().out


class TestConfig:
    def test_roundtrip_identity(self):
        cfg = Config(experiment="lower_bound", dims=(4, 9), seed=3, beta=0.6)
        again = Config.from_dict(cfg.to_dict())
        assert again == cfg
        assert Config.from_dict(again.to_dict()) == again

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            Config.from_dict({"experiment": "lower_bound", "betaa": 0.5})

    def test_invalid_fields_named(self):
        with pytest.raises(ValueError, match="experiment"):
            Config(experiment="nope")
        with pytest.raises(ValueError, match="trials"):
            Config(trials=0)

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"experiment": "lower_bound",
                                    "dims": [4], "out": str(tmp_path / "a")}))
        rc = run_cli(["--config", str(path), "--dims", "9",
                      "--out", str(tmp_path / "b")])
        assert rc == 0
        dat = (tmp_path / "b" / "plot_lower_bound.dat").read_text()
        assert dat.splitlines()[1].startswith("9.0")

    def test_bad_config_file_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"nonsense": 1}))
        assert run_cli(["--config", str(path)]) == 1
        assert "config error" in capsys.readouterr().err


class TestLowerBound:
    def test_dat_rows_are_exact(self, tmp_path):
        out = tmp_path / "lb"
        assert run_cli(["--experiment", "lower_bound", "--dims", "4,9,16",
                        "--out", str(out)]) == 0
        rows = [l.split() for l in
                (out / "plot_lower_bound.dat").read_text().splitlines()[1:]]
        for row in rows:
            d, online, offline, ratio = (float(v) for v in row)
            assert online == d
            assert offline == math.sqrt(d)
            assert abs(ratio - math.sqrt(d)) <= 1e-9


class TestCrVsDim:
    def test_deterministic_csv(self, tmp_path):
        args = ["--experiment", "cr_vs_dim", "--dims", "2,3", "--trials", "2",
                "--seed", "11", "--T", "12", "--family", "norm_tracking"]
        assert run_cli(args + ["--out", str(tmp_path / "x")]) == 0
        assert run_cli(args + ["--out", str(tmp_path / "y")]) == 0
        a = (tmp_path / "x" / "results.csv").read_bytes()
        b = (tmp_path / "y" / "results.csv").read_bytes()
        assert a == b
        header = a.decode().splitlines()[0]
        assert header == ("family,d,trial,seed,algo,total_cost,opt_cost,cr,"
                          "regret_L,bound,audit_worst_residual")

    def test_json_format_also_writes_csv(self, tmp_path):
        out = tmp_path / "j"
        rc = run_cli(["--experiment", "cr_vs_dim", "--dims", "2", "--trials", "1",
                      "--seed", "1", "--T", "8", "--family", "norm_tracking",
                      "--format", "json", "--out", str(out)])
        assert rc == 0
        rows = json.loads((out / "results.json").read_text())
        assert rows and rows[0]["family"] == "norm_tracking"
        assert (out / "results.csv").exists()


class TestSingleRun:
    def test_trajectory_schema(self, tmp_path):
        out = tmp_path / "s"
        rc = run_cli(["--experiment", "single_run", "--family", "quadratic",
                      "--d", "2", "--T", "6", "--seed", "5",
                      "--algo", "primal_obd", "--beta", "0.5",
                      "--out", str(out)])
        assert rc == 0
        traj_files = [f for f in os.listdir(out) if f.startswith("run_")]
        assert len(traj_files) == 1
        payload = json.loads((out / traj_files[0]).read_text())
        assert set(payload) == {"spec", "algo", "steps", "totals"}
        step = payload["steps"][0]
        assert set(step) == {"t", "x", "hit", "move", "level", "eta_t", "branch"}
        assert payload["algo"] == "primal_obd"
        assert len(payload["steps"]) == 6

    def test_dual_auto_eta_needs_bounded_set(self, tmp_path, capsys):
        rc = run_cli(["--experiment", "single_run", "--family", "quadratic",
                      "--d", "2", "--T", "4", "--seed", "5", "--algo", "dual_obd",
                      "--out", str(tmp_path / "d")])
        assert rc == 1
        assert "eta" in capsys.readouterr().err

    def test_dual_run_on_ball(self, tmp_path):
        cfg = {"experiment": "single_run", "family": "quadratic", "d": 2,
               "T": 5, "seed": 5, "algo": "dual_obd", "feasible_kind": "ball",
               "feasible_radius": 10.0, "out": str(tmp_path / "db")}
        path = tmp_path / "c.json"
        path.write_text(json.dumps(cfg))
        assert run_cli(["--config", str(path)]) == 0


def test_audit_suite_exit_code(tmp_path):
    rc = run_cli(["--experiment", "audit_suite", "--dims", "2", "--trials", "1",
                  "--seed", "4", "--T", "10", "--out", str(tmp_path / "a")])
    assert rc == 0
    csv_text = (tmp_path / "a" / "results.csv").read_text()
    assert len(csv_text.splitlines()) > 1


def test_obd_log_env(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("OBD_LOG", "info")
    rc = run_cli(["--experiment", "lower_bound", "--dims", "4",
                  "--out", str(tmp_path / "l")])
    assert rc == 0
