#!/usr/bin/env python3
"""
Command-line tests: subcommands, artifacts and exit codes
"""
import os
import sys

import numpy as np
import pytest
import yaml

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from har_templates import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main  # noqa: E402


@pytest.fixture
def workspace(tmp_path):
    config = {
        "pipeline": {"dw": 16, "bw": 8, "cut": 0.5},
        "synth": {"train_per_activity": 6, "test_per_activity": 3, "activities": 3, "seed": 2},
        "logging": {"level": "WARNING"},
    }
    config_path = tmp_path / "config.yaml"
    with open(config_path, "w") as f:
        yaml.safe_dump(config, f)
    return tmp_path, config_path


def _run(*argv):
    return main([str(a) for a in argv], environ={})


def _synth(tmp_path, config_path):
    assert _run("synth", "--config", config_path, "--output", tmp_path / "data") == EXIT_OK
    return tmp_path / "data"


def _data_flags(data_dir, split):
    return [
        f"--{split}-signals", data_dir / split / f"acc_x_{split}.txt",
        f"--{split}-labels", data_dir / split / f"y_{split}.txt",
    ]


def test_synth_train_predict(workspace):
    tmp_path, config_path = workspace
    data_dir = _synth(tmp_path, config_path)
    assert (data_dir / "manifest.yaml").exists()
    assert (data_dir / "train" / "acc_x_train.txt").exists()

    status = _run(
        "train", "--config", config_path, "--output", tmp_path / "model",
        "--export-dir", tmp_path / "plots", *_data_flags(data_dir, "train"),
    )
    assert status == EXIT_OK
    assert (tmp_path / "model" / "svm.txt").exists()
    assert any((tmp_path / "plots").iterdir())

    status = _run(
        "predict", "--config", config_path, "--model", tmp_path / "model",
        "--output", tmp_path / "predictions.txt", *_data_flags(data_dir, "test"),
    )
    assert status == EXIT_OK
    text = (tmp_path / "predictions.txt").read_text()
    assert text.startswith("# har-templates predictions v1\n")
    assert "index actual predicted" in text
    assert "confusion rows=actual columns=predicted" in text
    assert "accuracy = " in text
    rows = [line for line in text.splitlines() if line and line[0].isdigit() and len(line.split()) == 3]
    assert len(rows) >= 9
    print("✅ CLI synth/train/predict test passed")


def test_cluster_writes_per_activity_files(workspace):
    tmp_path, config_path = workspace
    data_dir = _synth(tmp_path, config_path)
    status = _run("cluster", "--config", config_path, "--output", tmp_path / "clusters",
                  "--no-flat-filter", *_data_flags(data_dir, "train"))
    assert status == EXIT_OK
    for label in range(3):
        assert (tmp_path / "clusters" / f"distances_label{label}.txt").exists()
        assignments = (tmp_path / "clusters" / f"clusters_label{label}.txt").read_text()
        assert assignments.startswith("# har-templates clusters v1\n")
        assert "pipeline.flat_quantile = None" in assignments


def test_bench_on_synthetic_data(workspace):
    tmp_path, config_path = workspace
    status = _run("bench", "--config", config_path, "--output", tmp_path / "bench.txt", "--cuts", "0.5")
    assert status == EXIT_OK
    lines = [line for line in (tmp_path / "bench.txt").read_text().splitlines() if not line.startswith("#")]
    assert len(lines) == 5


def test_usage_errors_exit_2(workspace):
    tmp_path, config_path = workspace
    assert _run("train", "--config", config_path, "--bogus") == EXIT_USAGE
    assert _run("frobnicate") == EXIT_USAGE
    assert _run("train", "--config", config_path, "--output", tmp_path / "m", "--cut", "1.5") == EXIT_USAGE
    assert _run("train", "--config", tmp_path / "missing.yaml", "--output", tmp_path / "m") == EXIT_USAGE
    # no training data configured
    assert _run("train", "--config", config_path, "--output", tmp_path / "m") == EXIT_USAGE


def test_data_errors_exit_1(workspace):
    tmp_path, config_path = workspace
    signals = tmp_path / "acc_x.txt"
    signals.write_text("1 2 3\n4 oops 6\n")
    labels = tmp_path / "y.txt"
    labels.write_text("0\n1\n")
    status = _run("train", "--config", config_path, "--output", tmp_path / "m",
                  "--train-signals", signals, "--train-labels", labels)
    assert status == EXIT_FAILURE

    status = _run("train", "--config", config_path, "--output", tmp_path / "m",
                  "--train-signals", tmp_path / "absent.txt", "--train-labels", labels)
    assert status == EXIT_FAILURE

    status = _run("predict", "--config", config_path, "--model", tmp_path / "no-model",
                  "--output", tmp_path / "p.txt", "--test-signals", signals, "--test-labels", labels)
    assert status == EXIT_FAILURE


def test_cluster_indices_refer_to_input_rows(workspace):
    tmp_path, config_path = workspace
    t = np.arange(32)
    rows = [np.zeros(32)] + [np.sin(2 * np.pi * (t + k) / 8) * (1 + 0.1 * k) for k in range(1, 20)]
    signals = tmp_path / "acc_x.txt"
    np.savetxt(signals, np.array(rows))
    labels = tmp_path / "y.txt"
    labels.write_text("0\n" * 20)

    status = _run("cluster", "--config", config_path, "--output", tmp_path / "clusters", "--cut", "1.0",
                  "--train-signals", signals, "--train-labels", labels)
    assert status == EXIT_OK
    text = (tmp_path / "clusters" / "clusters_label0.txt").read_text()
    assert "# flat rows removed (1): 0\n" in text
    indices = [int(line.split()[0]) for line in text.splitlines() if not line.startswith("#")]
    assert indices == list(range(1, 20))


def test_displacement_window_only_needed_for_distances(workspace):
    tmp_path, config_path = workspace
    config = yaml.safe_load(config_path.read_text())
    del config["pipeline"]["dw"]
    bare = tmp_path / "no_dw.yaml"
    bare.write_text(yaml.safe_dump(config))

    assert _run("synth", "--config", bare, "--output", tmp_path / "data") == EXIT_OK
    data_dir = tmp_path / "data"
    train_flags = _data_flags(data_dir, "train")
    assert _run("train", "--config", bare, "--output", tmp_path / "m", *train_flags) == EXIT_USAGE
    assert _run("train", "--config", bare, "--dw", 16, "--output", tmp_path / "m", *train_flags) == EXIT_OK

    # the bundle carries dw
    status = _run("predict", "--config", bare, "--model", tmp_path / "m",
                  "--output", tmp_path / "p.txt", *_data_flags(data_dir, "test"))
    assert status == EXIT_OK
    assert "pipeline.dw = 16" in (tmp_path / "p.txt").read_text()
