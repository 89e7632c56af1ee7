"""Unit tests for the command-line interface and the INI experiment config."""

import csv
import dataclasses
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ordadapt.cli import (EXIT_CONFIG, EXIT_MISSING, EXIT_OK, EXIT_SHAPE,
                          ConfigError, ExperimentConfig, entry)
from ordadapt.network import Network
from ordadapt.synthetic import load_csv
from ordadapt.training import evaluate_frames

TINY = """
[data]
source_subjects = 2
target_subjects = 2
sequences_per_subject = 1
frames = 48
feature_dim = 4
[network]
feature_units = 5
feature_hidden = 6
domain_hidden = 3
[train]
epochs = 2
window = 16
stride = 8
[experiment]
seed = 0
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(TINY)
    return path


def run(*argv) -> int:
    return entry([str(a) for a in argv])


class TestExperimentConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.frames == 300
        assert cfg.mode == "adversarial"

    def test_ini_round_trip(self, tmp_path):
        cfg = dataclasses.replace(ExperimentConfig(), frames=77, lr=0.123,
                                  pooling="max", seed=9)
        path = tmp_path / "cfg.ini"
        cfg.to_ini(path)
        assert ExperimentConfig.from_ini(path) == cfg

    def test_partial_file_keeps_defaults(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[train]\nepochs = 5\n")
        cfg = ExperimentConfig.from_ini(path)
        assert cfg.epochs == 5
        assert cfg.frames == 300

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[optimizer]\nlr = 0.1\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_ini(path)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[train]\nlearning_rate = 0.1\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_ini(path)

    def test_bad_value(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[train]\nepochs = many\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_ini(path)

    def test_bad_choice(self, tmp_path):
        path = tmp_path / "cfg.ini"
        path.write_text("[experiment]\npooling = median\n")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_ini(path)

    def test_projections(self):
        cfg = ExperimentConfig(feature_dim=4, shift_strength=1.0)
        source_spec, target_spec = cfg.domain_specs()
        assert source_spec.shift_scale is None
        assert target_spec.shift_scale.shape == (4, 4)
        tc = cfg.train_config(mode="source-only")
        assert tc.mode == "source-only"
        nc = cfg.network_config(input_dim=4)
        assert nc.input_dim == 4


class TestGenerate:
    def test_writes_dataset(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        assert run("generate", "--config", tiny_config, "--out", out,
                   "--quiet") == EXIT_OK
        source = load_csv(out / "source.csv")
        target = load_csv(out / "target.csv")
        assert len(source) == 2
        assert len(target) == 2
        assert all(len(s) == 48 for s in source)
        manifest = json.loads((out / "generate_manifest.json").read_text())
        assert manifest["source_rows"] == 2 * 48
        assert manifest["config"]["frames"] == 48

    def test_regeneration_is_byte_identical(self, tiny_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run("generate", "--config", tiny_config, "--out", a, "--quiet")
        run("generate", "--config", tiny_config, "--out", b, "--quiet")
        assert (a / "source.csv").read_bytes() == (b / "source.csv").read_bytes()
        assert (a / "target.csv").read_bytes() == (b / "target.csv").read_bytes()

    def test_seed_override_changes_data(self, tiny_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run("generate", "--config", tiny_config, "--out", a, "--quiet")
        run("generate", "--config", tiny_config, "--out", b, "--seed", 1,
            "--quiet")
        assert (a / "source.csv").read_bytes() != (b / "source.csv").read_bytes()

    def test_bad_config_exit_code(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text("[data]\nframes = lots\n")
        assert run("generate", "--config", bad, "--out", tmp_path / "runs",
                   "--quiet") == EXIT_CONFIG

    def test_missing_config_exit_code(self, tmp_path):
        assert run("generate", "--config", tmp_path / "nope.ini",
                   "--out", tmp_path / "runs", "--quiet") == EXIT_MISSING


class TestTrain:
    def test_writes_checkpoint_and_history(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        assert run("train", "--config", tiny_config, "--out", out,
                   "--quiet") == EXIT_OK
        network = Network.load(out / "checkpoint.json")
        assert network.config.input_dim == 4
        history = json.loads((out / "history.json").read_text())
        assert len(history) == 2
        assert {"epoch", "mode", "val_pcc"} <= set(history[0])
        manifest = json.loads((out / "train_manifest.json").read_text())
        assert manifest["validation_subject"] == 1
        assert manifest["epochs_run"] == 2

    def test_requires_generated_dataset(self, tiny_config, tmp_path):
        assert run("train", "--config", tiny_config, "--out",
                   tmp_path / "empty", "--quiet") == EXIT_MISSING


class TestEvaluate:
    def test_metrics_match_library_evaluation(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        run("train", "--config", tiny_config, "--out", out, "--quiet")
        assert run("evaluate", "--config", tiny_config, "--out", out,
                   "--quiet") == EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        network = Network.load(out / "checkpoint.json")
        target = load_csv(out / "target.csv")
        report = evaluate_frames(network, target)
        expected_mae = report.mae
        assert_allclose(metrics["mae"], expected_mae, atol=1e-12)
        assert metrics["level"] == "frame"
        assert len(metrics["per_sequence"]) == len(target)

    def test_traces_cover_every_frame(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        run("train", "--config", tiny_config, "--out", out, "--quiet")
        run("evaluate", "--config", tiny_config, "--out", out, "--quiet")
        with open(out / "traces.csv") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["subject", "sequence", "frame", "truth", "predicted"]
        assert len(rows) - 1 == 2 * 48

    def test_sequence_level(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        run("train", "--config", tiny_config, "--out", out, "--quiet")
        assert run("evaluate", "--config", tiny_config, "--out", out,
                   "--level", "sequence", "--quiet") == EXIT_OK
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["level"] == "sequence"

    def test_missing_checkpoint_exit_code(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        assert run("evaluate", "--config", tiny_config, "--out", out,
                   "--quiet") == EXIT_MISSING

    def test_dimension_mismatch_exit_code(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        run("train", "--config", tiny_config, "--out", out, "--quiet")
        other_ini = tmp_path / "wide.ini"
        other_ini.write_text(TINY.replace("feature_dim = 4", "feature_dim = 6"))
        wide = tmp_path / "wide"
        run("generate", "--config", other_ini, "--out", wide, "--quiet")
        assert run("evaluate", "--config", other_ini, "--out", wide,
                   "--checkpoint", out / "checkpoint.json",
                   "--quiet") == EXIT_SHAPE

    def test_corrupt_checkpoint_exit_code(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        (out / "checkpoint.json").write_text("{}")
        assert run("evaluate", "--config", tiny_config, "--out", out,
                   "--quiet") == EXIT_SHAPE


class TestAblate:
    def test_encoding_pooling_grid(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        assert run("ablate", "--config", tiny_config, "--out", out,
                   "--quiet") == EXIT_OK
        with open(out / "ablation.csv") as handle:
            rows = list(csv.DictReader(handle))
        assert [r["cell"] for r in rows] == ["onehot-max", "onehot-adaptive",
                                             "gaussian-max", "gaussian-adaptive"]
        assert all(int(r["folds"]) == 2 for r in rows)
        manifest = json.loads((out / "ablate_manifest.json").read_text())
        assert manifest["shared_seed"] == 0

    def test_scenario_rows(self, tiny_config, tmp_path):
        out = tmp_path / "runs"
        run("generate", "--config", tiny_config, "--out", out, "--quiet")
        assert run("ablate", "--config", tiny_config, "--out", out,
                   "--scenarios", "--quiet") == EXIT_OK
        with open(out / "ablation.csv") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 9
        assert [r["cell"] for r in rows][4:] == [
            "mode-source-only", "mode-target-only", "mode-joint-no-DA",
            "mode-transfer", "mode-adversarial"]


class TestEncode:
    def test_prints_code_values(self, capsys):
        assert run("encode", "--label", "2", "--sigma", "0.5",
                   "--levels", "4") == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "label 2 sigma 0.5 levels 4"
        values = [float(line.split(":")[1]) for line in lines[1:]]
        expected = np.exp(-((np.arange(4) - 2.0) ** 2) / (2.0 * 0.25))
        assert_allclose(values, expected, atol=1e-9)

    def test_invalid_label_exit_code(self, capsys):
        assert run("encode", "--label", "9", "--levels", "4") == EXIT_CONFIG
