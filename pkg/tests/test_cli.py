import json

import numpy as np
import pytest

from treebound.cli import load_config, main


@pytest.fixture
def expr_file(tmp_path):
    path = tmp_path / "quad.txt"
    path.write_text("dims: 2\ndomain: [-2, 2] x 2\n(x0 - 0.5)^2 + x1^2\n")
    return str(path)


@pytest.fixture
def nn_file(tmp_path):
    rng = np.random.default_rng(0)
    payload = {
        "n": 3, "h": 4,
        "W1": rng.normal(size=(4, 3)).tolist(),
        "b1": rng.normal(size=4).tolist(),
        "w2": rng.normal(size=4).tolist(),
        "b2": 0.0,
        "domain": [-1.0, 1.0],
    }
    path = tmp_path / "net.json"
    path.write_text(json.dumps(payload))
    return str(path)


class TestOptimizeCommand:
    def test_builtin_smoke(self, tmp_path, capsys):
        out = tmp_path / "runs"
        code = main(["optimize", "--fn", "ackley", "--dims", "2",
                     "--steps", "5", "--seed", "1", "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "best y" in printed and "trace:" in printed
        assert (out / "ackley-2d-seed1.csv").exists()
        summary = json.loads(
            (out / "ackley-2d-seed1-summary.json").read_text())
        assert summary["config"]["seed"] == 1
        assert summary["config"]["step_budget"] == 5
        assert summary["termination_reason"] == "steps"

    def test_expression_file(self, tmp_path, expr_file):
        code = main(["optimize", "--expr-file", expr_file, "--steps", "10",
                     "--out", str(tmp_path / "r")])
        assert code == 0
        summary = json.loads(
            (tmp_path / "r" / "quad-2d-seed0-summary.json").read_text())
        assert summary["best_y"] < 1e-4

    def test_nn_weights(self, tmp_path, nn_file):
        code = main(["optimize", "--nn-weights", nn_file, "--steps", "5",
                     "--out", str(tmp_path / "r")])
        assert code == 0

    def test_zero_dims_is_usage_error(self):
        assert main(["optimize", "--fn", "ackley", "--dims", "0",
                     "--steps", "1"]) == 2

    def test_no_source_is_usage_error(self, capsys):
        assert main(["optimize", "--steps", "1"]) == 2

    def test_two_sources_is_usage_error(self, expr_file):
        assert main(["optimize", "--fn", "ackley", "--dims", "2",
                     "--expr-file", expr_file, "--steps", "1"]) == 2

    def test_unknown_flag(self):
        assert main(["optimize", "--fn", "ackley", "--dims", "2",
                     "--frobnicate"]) == 2

    def test_byte_identical_reruns(self, tmp_path):
        for sub in ("a", "b"):
            assert main(["optimize", "--fn", "levy", "--dims", "2",
                         "--steps", "8", "--seed", "7",
                         "--out", str(tmp_path / sub)]) == 0
        a = (tmp_path / "a" / "levy-2d-seed7.csv").read_bytes()
        b = (tmp_path / "b" / "levy-2d-seed7.csv").read_bytes()
        assert a == b


class TestSuiteCommand:
    def test_two_seeds(self, tmp_path, capsys):
        out = tmp_path / "suite"
        code = main(["suite", "--fn", "ackley", "--dims", "2",
                     "--steps", "4", "--seeds", "0,1", "--out", str(out)])
        assert code == 0
        assert (out / "ackley-2d-aggregate.json").exists()
        agg = json.loads((out / "ackley-2d-aggregate.json").read_text())
        assert agg["seeds"] == [0, 1]

    def test_bad_seed_list(self, tmp_path):
        assert main(["suite", "--fn", "ackley", "--dims", "2",
                     "--steps", "2", "--seeds", "0,x",
                     "--out", str(tmp_path)]) == 2


class TestBoundCommand:
    def test_prints_enclosure(self, tmp_path, capsys):
        path = tmp_path / "f.txt"
        path.write_text("dims: 1\ndomain: [-1, 2] x 1\nx0^2\n")
        assert main(["bound", "--expr-file", str(path)]) == 0
        printed = capsys.readouterr().out
        assert "lb=0.0" in printed and "ub=4.0" in printed


class TestDiffCheckCommand:
    def test_smooth_expression_passes(self, tmp_path, capsys):
        path = tmp_path / "f.txt"
        path.write_text("dims: 2\ndomain: [-2, 2] x 2\nsin(x0) * x1 + x0^3\n")
        assert main(["diff-check", "--expr-file", str(path),
                     "--points", "25"]) == 0
        assert "PASS" in capsys.readouterr().out


class TestLoadConfig:
    def test_empty_object_gives_defaults(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{}")
        cfg = load_config(path)
        assert (cfg.c_lb, cfg.c_v, cfg.c_x) == (50.0, 0.5, 0.5)
        assert cfg.root_child_cap == 64

    def test_negative_coefficient_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"c_lb": -1}))
        with pytest.raises(ValueError, match="c_lb"):
            load_config(path)

    def test_partial_override(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"num_children": 20}))
        cfg = load_config(path)
        assert cfg.num_children == 20
        assert cfg.c_lb == 50.0

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"numchildren": 20}))
        with pytest.raises(ValueError, match="unknown config keys"):
            load_config(path)

    def test_config_flag_feeds_run(self, tmp_path):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({"num_children": 3, "seed": 5}))
        out = tmp_path / "r"
        code = main(["optimize", "--fn", "ackley", "--dims", "2",
                     "--steps", "3", "--config", str(cfg_path),
                     "--out", str(out)])
        assert code == 0
        summary = json.loads(
            (out / "ackley-2d-seed5-summary.json").read_text())
        assert summary["config"]["num_children"] == 3
        assert summary["config"]["seed"] == 5
        # an explicit flag still wins over the config file
        code = main(["optimize", "--fn", "ackley", "--dims", "2",
                     "--steps", "3", "--config", str(cfg_path),
                     "--seed", "8", "--out", str(out)])
        assert code == 0
        assert (out / "ackley-2d-seed8-summary.json").exists()

    def test_rerun_from_embedded_config_reproduces_trace(self, tmp_path):
        out = tmp_path / "first"
        assert main(["optimize", "--fn", "levy", "--dims", "2",
                     "--steps", "6", "--seed", "4",
                     "--out", str(out)]) == 0
        summary = json.loads(
            (out / "levy-2d-seed4-summary.json").read_text())
        cfg_path = tmp_path / "embedded.json"
        cfg_path.write_text(json.dumps(summary["config"]))
        again = tmp_path / "second"
        assert main(["optimize", "--fn", "levy", "--dims", "2",
                     "--config", str(cfg_path), "--out", str(again)]) == 0
        a = (out / "levy-2d-seed4.csv").read_bytes()
        b = (again / "levy-2d-seed4.csv").read_bytes()
        assert a == b
