import json
import os

import numpy as np
import pytest
import yaml

from drfs.cli import main
from drfs.config import (ConfigError, ExperimentConfig, config_from_dict, default_config_dict,
                         dump_config, load_config, validate_config)
from drfs.data import load_csv
from drfs.experiment import (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, StageError, numeric_payload,
                             run_experiment)

TINY = {
    "data": {"source": "synthetic", "dataset": 1, "n_total": 300, "dim": 15},
    "budget": 5,
    "seeds": [0],
    "objective": {"b": 1, "K": 40, "lambda": 1.0},
    "optimizer": {"epochs": 3},
    "baselines": {"T_max": 2, "random_draws": 2},
}


def write_cfg(tmp_path, doc, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


class TestConfig:
    def test_default_is_clean_and_round_trips(self, tmp_path):
        path = write_cfg(tmp_path, default_config_dict())
        assert validate_config(path) == []
        cfg = load_config(path)
        assert cfg == ExperimentConfig()
        assert config_from_dict(yaml.safe_load(dump_config(cfg)))[0] == cfg

    def test_negative_lambda_single_diagnostic(self, tmp_path):
        doc = default_config_dict()
        doc["objective"]["lambda"] = -1.0
        diags = validate_config(write_cfg(tmp_path, doc))
        assert len(diags) == 1 and "objective.lambda" in diags[0]

    def test_dim_below_required(self, tmp_path):
        doc = default_config_dict()
        doc["data"].update(dataset=2, dim=10, n_total=4400)
        diags = validate_config(write_cfg(tmp_path, doc))
        assert any("dim below required 50" in d for d in diags)

    def test_reports_every_violation(self, tmp_path):
        doc = default_config_dict()
        doc["objective"]["b"] = 0
        doc["optimizer"]["learning_rate"] = -1
        doc["seeds"] = []
        doc["bogus"] = 1
        diags = validate_config(write_cfg(tmp_path, doc))
        assert len(diags) == 4

    def test_budget_above_m(self, tmp_path):
        doc = dict(TINY, budget=16)
        assert any("exceeds the 15" in d for d in validate_config(write_cfg(tmp_path, doc)))

    def test_syntax_error_has_location(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("objective:\n  b: [1, 2\n")
        (diag,) = validate_config(path)
        assert diag.startswith(f"{path}:") and "syntax error" in diag

    def test_csv_source_checks(self, tmp_path):
        doc = {"data": {"source": "csv", "path": "missing.csv"}}
        assert any("not found" in d for d in validate_config(write_cfg(tmp_path, doc)))
        (tmp_path / "d.csv").write_text("g,x0,x1,y\nA,1,2,3\n")
        doc = {"data": {"source": "csv", "path": "d.csv", "population_column": "g"}, "budget": 2}
        assert validate_config(write_cfg(tmp_path, doc)) == []
        doc["budget"] = 3
        assert any("exceeds" in d for d in validate_config(write_cfg(tmp_path, doc)))

    def test_inf_beta_accepted(self):
        cfg, diags = config_from_dict({"objective": {"beta": ".inf"}})
        assert diags == [] and cfg.objective.beta == float("inf")


class TestRun:
    def test_bundle_and_determinism(self, tmp_path):
        cfg, _ = config_from_dict(TINY, str(tmp_path))
        r1 = run_experiment(cfg, str(tmp_path / "a"))
        r2 = run_experiment(cfg, str(tmp_path / "b"))
        assert numeric_payload(r1) == numeric_payload(r2)
        for name in ("report.json", "trace.csv", "comparison.csv", "alpha.json"):
            assert (tmp_path / "a" / name).exists()
        report = json.loads((tmp_path / "a" / "report.json").read_text())
        assert report["schema_version"] == "1.0"
        seed0 = report["results"]["seeds"][0]
        assert len(seed0["selected"]["drfs"]) == 5 and len(seed0["alpha"]) == 15
        # echoed config rebuilds the same configuration
        assert config_from_dict(report["config"])[0] == cfg
        assert not [p for p in os.listdir(tmp_path) if p.startswith(".drfs-")]

    def test_parallel_matches_sequential(self, tmp_path):
        cfg, _ = config_from_dict(dict(TINY, seeds=[0, 1], methods=["drfs", "random"]))
        seq = run_experiment(cfg, str(tmp_path / "s"))
        par = run_experiment(cfg, str(tmp_path / "p"), parallel=2)
        assert numeric_payload(seq) == numeric_payload(par)

    def test_data_error_is_stage_tagged_and_leaves_nothing(self, tmp_path):
        (tmp_path / "d.csv").write_text("population,x0,y\nA,1,2\nA,2,3\n")
        cfg, diags = config_from_dict({"data": {"source": "csv", "path": "d.csv"}, "budget": 1,
                                       "seeds": [0]}, str(tmp_path))
        assert diags == []
        with pytest.raises(StageError) as info:
            run_experiment(cfg, str(tmp_path / "out"))
        assert info.value.code == EXIT_DATA and str(info.value).startswith("[")
        assert not (tmp_path / "out").exists()


class TestCli:
    def test_validate_exit_codes(self, tmp_path, capsys):
        assert main(["validate", "--config", str(write_cfg(tmp_path, TINY))]) == 0
        bad = dict(TINY, objective={"lambda": -2})
        assert main(["validate", "--config", str(write_cfg(tmp_path, bad, "bad.yaml"))]) == EXIT_CONFIG
        assert "objective.lambda" in capsys.readouterr().out

    def test_run_k_above_m_fails_before_compute(self, tmp_path, capsys):
        path = write_cfg(tmp_path, dict(TINY, budget=99))
        assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
        assert not (tmp_path / "o").exists()
        assert "[config]" in capsys.readouterr().err

    def test_run_with_overrides(self, tmp_path):
        path = write_cfg(tmp_path, dict(TINY, methods=["drfs"]))
        out = tmp_path / "o"
        assert main(["run", "--config", str(path), "--out", str(out), "--seeds", "2,3"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert [s["seed"] for s in report["results"]["seeds"]] == [2, 3]

    def test_gradcheck(self, capsys):
        assert main(["gradcheck", "--points", "2"]) == 0
        assert "PASS" in capsys.readouterr().out
        assert main(["gradcheck", "--points", "2", "--corrupt"]) == EXIT_NUMERIC
        assert main(["gradcheck", "--populations", "1", "--n", "1", "--m", "1"]) == 0

    def test_generate_data(self, tmp_path):
        out = tmp_path / "d2.csv"
        assert main(["generate-data", "--dataset", "2", "--n-total", "400", "--dim", "50",
                     "--out", str(out)]) == 0
        data = load_csv(out, "population", "y")
        assert data.ids == ["A", "B", "C", "D"] and data.m == 50
        assert main(["generate-data", "--dataset", "2", "--n-total", "400", "--dim", "10",
                     "--out", str(out)]) == EXIT_DATA
