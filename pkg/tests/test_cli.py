"""End-to-end tests of the command-line interface and scenario config."""

import json
from pathlib import Path

import pytest

from oransim.cli import main
from oransim.config import config_from_dict, derive_seed, load_config
from oransim.ric import validate_jsonl

TINY = {
    "master_seed": 5,
    "horizon_hours": 12,
    "traffic": {
        "synthetic": {
            "n_enb": 1,
            "cells_per_enb": 2,
            "n_days": 3,
            "peak_prb_util": 92.0,
            "congested_cell_fraction": 0.5,
        }
    },
    "lstm": {"n_layers": 1, "units_per_layer": 4},
    "training": {"epochs": 3, "lookback": 6},
    "loop": {"split_cooldown_hours": 6, "retrain_cooldown_hours": 6},
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestConfig:
    def test_defaults_mirror_reference_setup(self):
        cfg = load_config(None)
        assert cfg.profile.n_enb == 17
        assert cfg.profile.cells_per_enb == 18
        assert cfg.profile.n_days == 25
        assert cfg.lstm.n_layers == 2
        assert cfg.lstm.units_per_layer == 12
        assert cfg.training.batch_size == 16
        assert cfg.training.epochs == 150
        assert cfg.rule.throughput_max == 1.0
        assert cfg.rule.prb_min == 80.0
        assert cfg.split.r_min == 60.0 and cfg.split.r_max == 75.0

    def test_master_seed_derives_component_seeds(self):
        a = config_from_dict({"master_seed": 1})
        b = config_from_dict({"master_seed": 2})
        assert a.profile.seed != b.profile.seed
        assert a.training.seed != b.training.seed
        assert a.split.seed != b.split.seed
        # derivation is stable
        assert a.profile.seed == derive_seed(1, 0)

    def test_explicit_component_seed_wins(self):
        cfg = config_from_dict(
            {"master_seed": 1, "traffic": {"synthetic": {"seed": 777}}}
        )
        assert cfg.profile.seed == 777

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown keys"):
            config_from_dict({"master_seed": 1, "bogus": 2})
        with pytest.raises(ValueError, match="unknown keys"):
            config_from_dict({"training": {"momentum": 0.9}})

    def test_factor_mismatch_rejected(self):
        with pytest.raises(ValueError, match="agree"):
            config_from_dict(
                {"split": {"max_factor": 4}, "loop": {"max_split_factor": 2}}
            )

    def test_split_factor_propagates_to_loop(self):
        cfg = config_from_dict({"split": {"max_factor": 8}})
        assert cfg.loop.max_split_factor == 8

    def test_resolved_dict_round_trips(self):
        cfg = config_from_dict(TINY)
        again = config_from_dict(cfg.to_resolved_dict())
        assert again == cfg


class TestGenerate:
    def test_writes_dataset_and_manifest(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        out = tmp_path / "out"
        assert main(["generate", "-c", str(cfg), "-o", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["n_cells"] == 2
        assert manifest["n_hours"] == 72
        assert (out / "dataset.csv").exists()
        assert (out / "config.json").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["generate", "-c", str(cfg), "-o", str(out_a)]) == 0
        assert main(["generate", "-c", str(cfg), "-o", str(out_b)]) == 0
        assert tree_bytes(out_a) == tree_bytes(out_b)

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["generate", "-c", str(cfg), "-o", str(out_a)])
        main(["generate", "-c", str(cfg), "-o", str(out_b), "--seed", "99"])
        assert (out_a / "dataset.csv").read_bytes() != (out_b / "dataset.csv").read_bytes()

    def test_invalid_profile_exits_one(self, tmp_path, capsys):
        bad = dict(TINY, traffic={"synthetic": {"n_days": 1}})
        cfg = write_config(tmp_path, bad)
        assert main(["generate", "-c", str(cfg), "-o", str(tmp_path / "x")]) == 1
        assert "error" in capsys.readouterr().err

    def test_csv_traffic_cannot_generate(self, tmp_path):
        cfg = write_config(tmp_path, dict(TINY, traffic={"csv": {"path": "x.csv"}}))
        assert main(["generate", "-c", str(cfg), "-o", str(tmp_path / "x")]) == 1

    def test_default_config_produces_reference_fleet(self, tmp_path):
        # no config file: 17 eNBs x 18 cells over 25 days
        out = tmp_path / "full"
        assert main(["generate", "-o", str(out)]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["n_cells"] == 306
        assert manifest["n_hours"] == 600
        assert manifest["n_rows"] == 306 * 600


class TestTrain:
    def test_models_and_accuracy_report(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        gen = tmp_path / "gen"
        out = tmp_path / "train"
        main(["generate", "-c", str(cfg), "-o", str(gen)])
        assert main(["train", "-c", str(cfg), "-d", str(gen / "dataset.csv"),
                     "-o", str(out)]) == 0
        report = json.loads((out / "accuracy_report.json").read_text())
        assert report["n_cells_trained"] == 2
        assert set(report["per_cell_accuracy"]) == {"e0c0g0", "e0c1g0"}
        assert 0.0 <= report["mean_accuracy"] <= 100.0
        models = sorted(p.name for p in (out / "models").glob("*.json"))
        assert models == ["e0c0g0.json", "e0c1g0.json"]

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        gen = tmp_path / "gen"
        main(["generate", "-c", str(cfg), "-o", str(gen)])
        a, b = tmp_path / "a", tmp_path / "b"
        main(["train", "-c", str(cfg), "-d", str(gen / "dataset.csv"), "-o", str(a)])
        main(["train", "-c", str(cfg), "-d", str(gen / "dataset.csv"), "-o", str(b)])
        assert tree_bytes(a) == tree_bytes(b)

    def test_missing_dataset_exits_one(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        assert main(["train", "-c", str(cfg), "-d", str(tmp_path / "nope.csv"),
                     "-o", str(tmp_path / "x")]) == 1


class TestRun:
    def run_outputs(self, tmp_path, doc, name="run"):
        cfg = write_config(tmp_path, doc, name=f"{name}.json")
        out = tmp_path / name
        assert main(["run", "-c", str(cfg), "-o", str(out)]) == 0
        return out

    def test_outputs_and_valid_log(self, tmp_path):
        out = self.run_outputs(tmp_path, TINY)
        for fname in (
            "events.jsonl", "summary.json", "histogram_baseline.csv",
            "histogram_after.csv", "a1_deployments.jsonl", "e2_requests.jsonl",
            "config.json",
        ):
            assert (out / fname).exists(), fname
        assert validate_jsonl((out / "events.jsonl").read_text()).ok
        summary = json.loads((out / "summary.json").read_text())
        assert summary["window_hours"] == 12
        assert summary["n_cells_baseline"] == 2

    def test_cli_validate_accepts_run_log(self, tmp_path, capsys):
        out = self.run_outputs(tmp_path, TINY)
        assert main(["validate", str(out / "events.jsonl")]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_corrupted_log_fails_validation(self, tmp_path, capsys):
        out = self.run_outputs(tmp_path, TINY)
        lines = (out / "events.jsonl").read_text().splitlines(keepends=True)
        # drop the first BusPublish record
        idx = next(i for i, l in enumerate(lines) if '"tag":"BusPublish"' in l)
        (out / "corrupt.jsonl").write_text("".join(lines[:idx] + lines[idx + 1:]))
        assert main(["validate", str(out / "corrupt.jsonl")]) == 1
        assert "FAIL" in capsys.readouterr().err

    def test_empty_log_passes_validation(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        assert main(["validate", str(empty)]) == 0

    def test_no_congestion_scenario_zero_splits(self, tmp_path):
        quiet = json.loads(json.dumps(TINY))
        quiet["traffic"]["synthetic"]["congested_cell_fraction"] = 0.0
        out = self.run_outputs(tmp_path, quiet, name="quiet")
        summary = json.loads((out / "summary.json").read_text())
        assert summary["splits_issued"] == 0
        assert (out / "e2_requests.jsonl").read_text() == ""
        # identical traffic and no action: histograms match the baseline
        assert (out / "histogram_after.csv").read_bytes() == (
            out / "histogram_baseline.csv"
        ).read_bytes()

    def test_full_pipeline_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, TINY)
        for sub in ("a", "b"):
            root = tmp_path / sub
            main(["generate", "-c", str(cfg), "-o", str(root / "gen")])
            main(["train", "-c", str(cfg), "-d", str(root / "gen" / "dataset.csv"),
                  "-o", str(root / "train")])
            main(["run", "-c", str(cfg), "-o", str(root / "run")])
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_csv_traffic_run(self, tmp_path):
        cfg_doc = json.loads(json.dumps(TINY))
        gen_cfg = write_config(tmp_path, TINY, name="gen.json")
        main(["generate", "-c", str(gen_cfg), "-o", str(tmp_path / "gen")])
        cfg_doc["traffic"] = {"csv": {"path": str(tmp_path / "gen" / "dataset.csv")}}
        out = self.run_outputs(tmp_path, cfg_doc, name="csvrun")
        assert validate_jsonl((out / "events.jsonl").read_text()).ok

    def test_config_echo_reproduces_run(self, tmp_path):
        out1 = self.run_outputs(tmp_path, TINY, name="first")
        echo = json.loads((out1 / "config.json").read_text())
        cfg2 = write_config(tmp_path, echo, name="echo.json")
        out2 = tmp_path / "second"
        assert main(["run", "-c", str(cfg2), "-o", str(out2)]) == 0
        assert (out1 / "events.jsonl").read_bytes() == (out2 / "events.jsonl").read_bytes()
        assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
