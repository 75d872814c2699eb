#!/usr/bin/env python3
"""
Unit tests for the radix-2 FFT and synthetic data generation
"""
import os
import sys

import numpy as np
import pytest
import yaml

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from models.schemas import SynthConfig  # noqa: E402
from modules.dataset import TimeSeries, load_uci_layout  # noqa: E402
from modules.errors import DomainError  # noqa: E402
from modules.synth import (  # noqa: E402
    fft,
    generate_dataset,
    generate_sample,
    ifft,
    perturb_spectrum,
    pseudo_activity_sources,
    pseudo_activity_template,
    tile_template,
    write_synthetic,
)


def _naive_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) @ x


def test_fft_matches_naive_dft():
    rng = np.random.default_rng(0)
    for n in (8, 16, 64, 256, 1024):
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        np.testing.assert_allclose(fft(x), _naive_dft(x), atol=1e-9)
        np.testing.assert_allclose(ifft(fft(x)), x, atol=1e-9)
        # Parseval
        assert np.sum(np.abs(x) ** 2) == pytest.approx(np.sum(np.abs(fft(x)) ** 2) / n, rel=1e-9)
    print("✅ FFT oracle test passed")


def test_fft_trivial_lengths():
    np.testing.assert_allclose(fft([3.0]), [3.0])
    np.testing.assert_allclose(fft([1.0, 2.0]), [3.0, -1.0])
    with pytest.raises(DomainError):
        fft(np.zeros(12))


def test_tile_template_is_normalised_repetition():
    template = pseudo_activity_template(0, 0, 128)
    tiled = tile_template(template, 256)
    assert tiled.shape == (256,)
    np.testing.assert_array_equal(tiled[:128], tiled[128:])
    assert tiled[:128].mean() == pytest.approx(0.0, abs=1e-12)
    assert tiled[:128].std() == pytest.approx(1.0)


def test_generate_sample_window_and_determinism():
    config = SynthConfig()
    template = pseudo_activity_template(1, 0, config.series_length)
    first = generate_sample(template, config, np.random.default_rng(4))
    second = generate_sample(template, config, np.random.default_rng(4))
    assert first.series == second.series
    assert first.series.shape == (128, 1)
    assert 0 <= first.window_offset <= 128
    assert 0 <= first.noise_offset <= 246


def test_noise_touches_one_burst_of_bins():
    config = SynthConfig()
    template = pseudo_activity_template(0, 1, config.series_length)
    tiled = tile_template(template, config.fft_length)
    clean = fft(tiled)

    for seed in range(5):
        spectrum, offset = perturb_spectrum(tiled, config, np.random.default_rng(seed))
        changed = np.flatnonzero(spectrum != clean)
        np.testing.assert_array_equal(changed, np.arange(offset, offset + config.noise_length))
        # real mode leaves the imaginary parts alone
        np.testing.assert_array_equal(spectrum.imag, clean.imag)

        sample = generate_sample(template, config, np.random.default_rng(seed))
        assert sample.noise_offset == offset
        start = sample.window_offset
        np.testing.assert_array_equal(
            sample.series.values[:, 0], ifft(spectrum).real[start: start + config.series_length]
        )


def test_zero_noise_returns_a_template_window():
    config = SynthConfig(noise_scale=0.0)
    template = pseudo_activity_template(2, 1, 128)
    sample = generate_sample(template, config, np.random.default_rng(1))
    tiled = tile_template(template, 256)
    expected = tiled[sample.window_offset: sample.window_offset + 128]
    np.testing.assert_allclose(sample.series.values[:, 0], expected, atol=1e-9)


def test_generate_sample_preconditions():
    config = SynthConfig()
    with pytest.raises(DomainError):
        generate_sample(TimeSeries(np.ones((128, 2))), config, np.random.default_rng(0))
    with pytest.raises(DomainError):
        generate_sample(TimeSeries(np.arange(64.0)), config, np.random.default_rng(0))
    with pytest.raises(DomainError):
        generate_sample(TimeSeries(np.ones(128)), config, np.random.default_rng(0))


def test_config_bounds():
    with pytest.raises(ValueError):
        SynthConfig(fft_length=200)
    with pytest.raises(ValueError):
        SynthConfig(fft_length=128, series_length=128)
    assert SynthConfig(noise_scale=4.0).noise_std == pytest.approx(2.0)
    assert SynthConfig(noise_scale=4.0, noise_scale_kind="std").noise_std == 4.0


def test_generate_dataset_counts_and_seed():
    config = SynthConfig(train_per_activity=5, test_per_activity=3, seed=11)
    data = generate_dataset(config)
    assert len(data.train) == 20
    assert len(data.test) == 12
    assert data.train.label_set == [0, 1, 2, 3]
    assert data.train.label_names[3] == "sitting"
    for label, chosen in data.manifest["sources"].items():
        assert chosen["train"] != chosen["test"]

    again = generate_dataset(config)
    np.testing.assert_array_equal(data.train.values(), again.train.values())
    np.testing.assert_array_equal(data.test.values(), again.test.values())

    other = generate_dataset(config.model_copy(update={"seed": 12}))
    assert not np.array_equal(data.train.values(), other.train.values())
    print("✅ Synthetic dataset test passed")


def test_per_sample_seeds_and_complex_noise():
    config = SynthConfig(train_per_activity=2, test_per_activity=2, per_sample_seeds=True, noise_mode="complex")
    first = generate_dataset(config)
    second = generate_dataset(config)
    np.testing.assert_array_equal(first.train.values(), second.train.values())


def test_generate_dataset_needs_two_sources():
    sources = pseudo_activity_sources(activities=2, variants=2)
    sources[1] = sources[1][:1]
    with pytest.raises(DomainError):
        generate_dataset(SynthConfig(activities=2), sources)


def test_write_synthetic(tmp_path):
    config = SynthConfig(train_per_activity=2, test_per_activity=1, activities=2)
    data = generate_dataset(config)
    paths = write_synthetic(data, tmp_path, ["synth.seed = 0"])

    reloaded = load_uci_layout([paths["train_signals"]], paths["train_labels"])
    np.testing.assert_array_equal(reloaded.values(), data.train.values())
    with open(paths["manifest"]) as f:
        manifest = yaml.safe_load(f)
    assert manifest["seed"] == 0
    assert len(manifest["samples"]["train"]) == 4
