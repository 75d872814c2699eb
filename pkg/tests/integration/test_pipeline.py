#!/usr/bin/env python3
"""
End-to-end tests: synthetic data -> templates -> PCA -> SVM -> predictions
"""
import filecmp
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from models.schemas import PipelineConfig, RunConfig, SynthConfig  # noqa: E402
from modules.dataset import Dataset, LabeledSeries, TimeSeries  # noqa: E402
from modules.errors import ArtifactFormatError, DomainError  # noqa: E402
from modules.synth import generate_dataset  # noqa: E402
from services.experiment_service import bench_table, run_bench, with_pipeline, write_bench  # noqa: E402
from services.export_service import export_samples, export_templates  # noqa: E402
from services.pipeline_service import (  # noqa: E402
    load_model_bundle,
    predict,
    save_model_bundle,
    train_pipeline,
    write_prediction_report,
)


def _config(train_per_activity=10, test_per_activity=5, **pipeline):
    return RunConfig(
        pipeline=PipelineConfig(dw=16, **pipeline),
        synth=SynthConfig(train_per_activity=train_per_activity, test_per_activity=test_per_activity, seed=1),
    )


@pytest.fixture(scope="module")
def small_run():
    config = _config()
    data = generate_dataset(config.synth)
    model = train_pipeline(data.train, config)
    return config, data, model


def test_model_shapes(small_run):
    config, data, model = small_run
    assert {t.label for t in model.templates} == {0, 1, 2, 3}
    assert model.pca.components.shape[1] == len(model.templates)
    assert model.svm.weights.shape == (4, model.pca.n_components)
    assert list(model.svm.classes) == [0, 1, 2, 3]


def test_prediction_report(small_run):
    config, data, model = small_run
    report = predict(model, data.test)
    assert report.confusion.shape == (4, 4)
    assert report.confusion.sum() == len(data.test)
    assert report.accuracy == pytest.approx(np.trace(report.confusion) / len(data.test))
    # four synthetic activities are not the UCI label set
    assert report.merged_static_accuracy is None
    assert report.filtered_count is not None and report.filtered_count <= len(data.test)
    print(f"✅ Small synthetic run accuracy: {report.accuracy:.3f}")


def test_bundle_round_trip(small_run, tmp_path):
    config, data, model = small_run
    save_model_bundle(model, tmp_path / "bundle")
    for name in ("templates.txt", "pca.txt", "svm.txt", "config.yaml"):
        first_line = (tmp_path / "bundle" / name).read_text().splitlines()[0]
        assert first_line.startswith("# har-templates ")

    loaded = load_model_bundle(tmp_path / "bundle")
    assert loaded.config == model.config
    np.testing.assert_array_equal(loaded.svm.weights, model.svm.weights)
    np.testing.assert_array_equal(loaded.pca.components, model.pca.components)
    np.testing.assert_array_equal(loaded.predict_labels(data.test), model.predict_labels(data.test))


def test_incomplete_bundle(tmp_path):
    (tmp_path / "templates.txt").write_text("")
    with pytest.raises(ArtifactFormatError):
        load_model_bundle(tmp_path)


def test_predict_rejects_other_shapes(small_run):
    config, data, model = small_run
    other = generate_dataset(SynthConfig(train_per_activity=1, test_per_activity=1, series_length=64, fft_length=128))
    with pytest.raises(DomainError):
        predict(model, other.test)


def test_training_is_deterministic(tmp_path):
    """Same config and seeds: byte-identical bundles and prediction files"""
    config = _config(averaging="dba", threads=1)
    data = generate_dataset(config.synth)

    train_pipeline(data.train, config, output_dir=tmp_path / "a")
    threaded = with_pipeline(config, threads=4)
    train_pipeline(data.train, threaded, output_dir=tmp_path / "b")
    for name in ("templates.txt", "pca.txt", "svm.txt"):
        first = [line for line in (tmp_path / "a" / name).read_text().splitlines() if "pipeline.threads" not in line]
        second = [line for line in (tmp_path / "b" / name).read_text().splitlines() if "pipeline.threads" not in line]
        assert first == second

    train_pipeline(data.train, config, output_dir=tmp_path / "c")
    for name in ("templates.txt", "pca.txt", "svm.txt", "config.yaml"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "c" / name, shallow=False)

    for run in ("a", "c"):
        model = load_model_bundle(tmp_path / run)
        write_prediction_report(predict(model, data.test), tmp_path / f"{run}.txt", model.config)
    assert filecmp.cmp(tmp_path / "a.txt", tmp_path / "c.txt", shallow=False)
    print("✅ Determinism test passed")


def test_bench_grid(tmp_path):
    config = _config(train_per_activity=6, test_per_activity=3)
    data = generate_dataset(config.synth)
    rows = run_bench(data.train, data.test, config, cuts=(0.5,))
    assert [(r.distance, r.averaging) for r in rows] == [
        ("dtw", "dpa"), ("dtw", "dba"), ("dtwsubseq", "dpa"), ("dtwsubseq", "dba"),
    ]
    assert all(0.0 <= r.accuracy <= 1.0 and r.n_templates >= 4 for r in rows)

    path = tmp_path / "bench.txt"
    write_bench(rows, path, config)
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    assert lines[0].split()[:4] == ["cut", "distance", "averaging", "accuracy"]
    assert len(lines) == 5
    assert bench_table(rows).row_count == 4


def test_exports(small_run, tmp_path):
    config, data, model = small_run
    paths = export_templates(model.templates[:2], tmp_path / "templates")
    assert len(paths) == 2
    rows = paths[0].read_text().splitlines()
    assert len(rows) == 128
    assert rows[0].split()[0] == "0"

    sample_paths = export_samples(data.train, tmp_path / "samples", per_label=1)
    assert len(sample_paths) == 4


@pytest.mark.slow
def test_synthetic_experiment_accuracy():
    """4 activities, 50 train / 20 test each, DPA at cut 0.25"""
    config = _config(train_per_activity=50, test_per_activity=20, cut=0.25, averaging="dpa")
    data = generate_dataset(config.synth)

    subseq = predict(train_pipeline(data.train, with_pipeline(config, distance="dtwsubseq")), data.test)
    plain = predict(train_pipeline(data.train, with_pipeline(config, distance="dtw")), data.test)
    print(f"DTWsubseq-DPA {subseq.accuracy:.3f}, DTW-DPA {plain.accuracy:.3f}")
    assert subseq.accuracy >= 0.60
    assert subseq.accuracy >= plain.accuracy - 0.05
    print("✅ Synthetic experiment test passed")


def test_full_cut_gives_one_template_per_activity():
    t = np.arange(64)
    samples = []
    for label, period in ((0, 16), (1, 9)):
        for shift in range(6):
            values = np.sin(2 * np.pi * (t + shift) / period) + 0.01 * shift
            samples.append(LabeledSeries(TimeSeries(values), label))
    train = Dataset(tuple(samples))

    config = RunConfig(pipeline=PipelineConfig(dw=8, bw=4, cut=1.0, flat_quantile=None))
    model = train_pipeline(train, config)
    assert len(model.templates) == 2
    assert model.pca.mean.shape == (2,)
    report = predict(model, train)
    assert report.accuracy == 1.0
