"""
Synthetic activity data: radix-2 FFT and spectral noise injection

Each sample is the source template, normalised and tiled to the FFT length,
with a short normal noise burst added to a random stretch of its spectrum,
transformed back and cut to a random window.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from models.schemas import SynthConfig

from .dataset import Dataset, LabeledSeries, TimeSeries, UCI_ACTIVITY_NAMES, save_uci_layout
from .errors import DomainError
from .templates import Template

logger = logging.getLogger(__name__)

SYNTH_ACTIVITIES = (0, 1, 2, 3)  # walking, upstairs, downstairs, sitting
SPLITS = ("train", "test")

# Bundled stand-ins for templates computed from real data (not derived from it):
# base cycles per window and (harmonic, amplitude, phase) triples per activity
PSEUDO_ACTIVITIES: Dict[int, Tuple[float, Tuple[Tuple[int, float, float], ...]]] = {
    0: (4.0, ((1, 1.0, 0.0), (2, 0.5, 0.6))),
    1: (3.0, ((1, 1.0, 0.0), (3, 0.7, 1.1))),
    2: (5.0, ((1, 1.0, 0.0), (2, 0.4, 2.0))),
    3: (1.0, ((1, 0.3, 0.0),)),
}


def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    indices = np.arange(n)
    reversed_indices = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        reversed_indices |= ((indices >> b) & 1) << (bits - 1 - b)
    return reversed_indices


def fft(signal: Sequence[complex], inverse: bool = False) -> np.ndarray:
    """
    Iterative radix-2 decimation-in-time FFT.

    Forward uses exp(-2*pi*i*k*n/N); the inverse uses the conjugate kernel and
    divides by N.
    """
    x = np.asarray(signal, dtype=np.complex128).ravel()
    n = x.shape[0]
    if n < 1 or n & (n - 1):
        raise DomainError(f"FFT length must be a power of two, got {n}")

    x = x[_bit_reversal(n)]
    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        twiddles = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = x.reshape(-1, size)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * twiddles
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        x = blocks.reshape(n)
        size *= 2
    if inverse:
        x = x / n
    return x


def ifft(spectrum: Sequence[complex]) -> np.ndarray:
    return fft(spectrum, inverse=True)


@dataclass(frozen=True)
class SyntheticSample:
    series: TimeSeries
    window_offset: int
    noise_offset: int


class SyntheticData(NamedTuple):
    train: Dataset
    test: Dataset
    manifest: dict


def pseudo_activity_template(label: int, variant: int = 0, length: int = 128) -> TimeSeries:
    """
    Deterministic sinusoid mixture standing in for an activity template.

    Variants of one activity differ slightly in tempo, phase and harmonic
    weight, the way two subjects performing the same activity would.
    """
    if label not in PSEUDO_ACTIVITIES:
        raise DomainError(f"no pseudo-activity generator for label {label}")
    cycles, harmonics = PSEUDO_ACTIVITIES[label]
    t = np.arange(length) / length
    freq = cycles * (1.0 + 0.04 * variant)
    x = np.zeros(length)
    for harmonic, amplitude, phase in harmonics:
        weight = amplitude * (1.0 + 0.15 * variant) if harmonic > 1 else amplitude
        x += weight * np.sin(2 * np.pi * harmonic * freq * t + phase + 0.9 * variant * harmonic)
    if label == 3:
        # static activity: one spike, then nearly flat
        centre = 0.3 + 0.1 * variant
        x += 2.0 * np.exp(-(((t - centre) / 0.03) ** 2))
    return TimeSeries(x)


def pseudo_activity_sources(activities: int = 4, variants: int = 2, length: int = 128) -> Dict[int, List[TimeSeries]]:
    return {
        label: [pseudo_activity_template(label, v, length) for v in range(variants)]
        for label in SYNTH_ACTIVITIES[:activities]
    }


def sources_from_templates(templates: Sequence[Template], channel: int = 0) -> Dict[int, List[TimeSeries]]:
    """Group a template set by activity, keeping one channel (0 = acceleration x)"""
    sources: Dict[int, List[TimeSeries]] = {}
    for template in templates:
        if channel >= template.series.p:
            raise DomainError(f"template has {template.series.p} channels, channel {channel} requested")
        sources.setdefault(template.label, []).append(template.series.channel(channel))
    return sources


def normalize(values: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance"""
    std = values.std()
    if std == 0:
        raise DomainError("cannot normalise a constant template")
    return (values - values.mean()) / std


def tile_template(template: Union[TimeSeries, np.ndarray], length: int) -> np.ndarray:
    """Normalised template repeated to `length` samples"""
    values = template.values[:, 0] if isinstance(template, TimeSeries) else np.asarray(template, dtype=float)
    return np.resize(normalize(values), length)


def perturb_spectrum(
    tiled: np.ndarray, config: SynthConfig, rng: np.random.Generator
) -> Tuple[np.ndarray, int]:
    """
    FFT of the tiled series with a noise burst added at a random offset.

    Returns:
        Tuple of (perturbed spectrum, noise offset)
    """
    spectrum = fft(tiled)
    noise = rng.normal(0.0, config.noise_std, config.noise_length)
    if config.noise_mode == "complex":
        noise = noise + 1j * rng.normal(0.0, config.noise_std, config.noise_length)
    offset = int(rng.integers(0, config.fft_length - config.noise_length + 1))
    spectrum[offset: offset + config.noise_length] += noise
    return spectrum, offset


def generate_sample(template: TimeSeries, config: SynthConfig, rng: np.random.Generator) -> SyntheticSample:
    """
    One noisy sample from a single-channel source template.

    Random draws happen in a fixed order: noise vector (real, then imaginary
    in complex mode), noise offset, window offset.
    """
    if template.p != 1:
        raise DomainError(f"source template must have one channel, got {template.p}")
    if template.m != config.series_length:
        raise DomainError(f"source template length {template.m} != series_length {config.series_length}")

    tiled = tile_template(template, config.fft_length)
    spectrum, noise_offset = perturb_spectrum(tiled, config, rng)
    restored = ifft(spectrum).real
    window_offset = int(rng.integers(0, config.fft_length - config.series_length + 1))
    window = restored[window_offset: window_offset + config.series_length]
    return SyntheticSample(TimeSeries(window), window_offset, noise_offset)


def _sample_rng(config: SynthConfig, rng: np.random.Generator, split: int, label: int, index: int):
    if config.per_sample_seeds:
        return np.random.default_rng([config.seed, split, label, index])
    return rng


def generate_dataset(
    config: SynthConfig, sources: Optional[Mapping[int, Sequence[TimeSeries]]] = None
) -> SyntheticData:
    """
    Training and test sets from per-activity source templates.

    For each activity two different sources are drawn at random: one generates
    the training samples, the other the test samples (a different subject).
    """
    if sources is None:
        sources = pseudo_activity_sources(config.activities, config.variants, config.series_length)
    labels = sorted(sources)[: config.activities]
    if not labels:
        raise DomainError("no source templates")

    rng = np.random.default_rng(config.seed)
    chosen: Dict[int, Tuple[int, int]] = {}
    for label in labels:
        if len(sources[label]) < 2:
            raise DomainError(f"activity {label} needs at least 2 source templates, got {len(sources[label])}")
        train_index, test_index = rng.choice(len(sources[label]), size=2, replace=False)
        chosen[label] = (int(train_index), int(test_index))

    counts = {"train": config.train_per_activity, "test": config.test_per_activity}
    names = {label: UCI_ACTIVITY_NAMES.get(label, f"activity_{label}") for label in labels}
    datasets = {}
    offsets = {}
    for split_id, split in enumerate(SPLITS):
        samples = []
        records = []
        for label in labels:
            source = sources[label][chosen[label][split_id]]
            for index in range(counts[split]):
                sample = generate_sample(source, config, _sample_rng(config, rng, split_id, label, index))
                samples.append(LabeledSeries(sample.series, label))
                records.append([label, sample.window_offset, sample.noise_offset])
                logger.debug(
                    f"{split} label={label} #{index}: window={sample.window_offset} "
                    f"noise={sample.noise_offset}"
                )
        datasets[split] = Dataset(tuple(samples), names)
        offsets[split] = records

    manifest = {
        "seed": config.seed,
        "config": config.model_dump(),
        "sources": {int(label): {"train": pair[0], "test": pair[1]} for label, pair in chosen.items()},
        "samples": offsets,
    }
    logger.info(
        f"Generated {len(datasets['train'])} train / {len(datasets['test'])} test samples "
        f"(seed={config.seed})"
    )
    return SyntheticData(datasets["train"], datasets["test"], manifest)


def write_synthetic(data: SyntheticData, directory: Union[str, Path], header: Sequence[str] = ()) -> Dict[str, Path]:
    """
    Write both splits in the UCI layout plus manifest.yaml.

    Returns:
        Mapping of artifact name to path
    """
    directory = Path(directory)
    paths = {}
    for split, dataset in (("train", data.train), ("test", data.test)):
        split_dir = directory / split
        signal_paths, label_path = save_uci_layout(dataset, split_dir, split, channel_names=["acc_x"])
        paths[f"{split}_signals"] = signal_paths[0]
        paths[f"{split}_labels"] = label_path

    manifest_path = directory / "manifest.yaml"
    with open(manifest_path, "w") as f:
        f.write("# har-templates synthetic-manifest v1\n")
        for line in header:
            f.write(f"# {line}\n")
        yaml.safe_dump(data.manifest, f, default_flow_style=None, sort_keys=False)
    paths["manifest"] = manifest_path
    logger.info(f"Synthetic dataset written to {directory}")
    return paths
