"""
Time-series datasets: domain types, UCI HAR "Inertial Signals" ingestion
and the flat-curve filter
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DatasetConsistencyError,
    DatasetFormatError,
    DatasetParseError,
    DomainError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

UCI_ACTIVITY_NAMES: Dict[int, str] = {
    0: "walking",
    1: "walking_upstairs",
    2: "walking_downstairs",
    3: "sitting",
    4: "standing",
    5: "lying",
}

# Acceleration then angular velocity, x-y-z, as in the UCI "Inertial Signals" folder
UCI_SIGNAL_NAMES = (
    "body_acc_x", "body_acc_y", "body_acc_z",
    "body_gyro_x", "body_gyro_y", "body_gyro_z",
)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Fixed-length, p-dimensional, uniformly sampled sequence (m rows, p columns)"""
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise DomainError(f"time series must be 1-D or 2-D, got {values.ndim}-D")
        if values.shape[0] < 2:
            raise DomainError(f"time series needs at least 2 samples, got {values.shape[0]}")
        if values.shape[1] < 1:
            raise DomainError("time series needs at least one dimension")
        if not np.all(np.isfinite(values)):
            raise DomainError("time series contains NaN or infinite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def channel(self, index: int) -> "TimeSeries":
        """Single-dimension view of one channel"""
        return TimeSeries(self.values[:, index])

    def __len__(self) -> int:
        return self.m

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.shape, self.values.tobytes()))


@dataclass(frozen=True)
class LabeledSeries:
    series: TimeSeries
    label: int
    subject: Optional[int] = None


@dataclass(frozen=True)
class FlatCurveReport:
    """Outcome of remove_flat_curves: per-dimension thresholds and removed indices"""
    quantile: float
    thresholds: np.ndarray
    removed_indices: Tuple[int, ...]
    kept_indices: Tuple[int, ...]

    @property
    def removed_count(self) -> int:
        return len(self.removed_indices)


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of labeled series sharing the same m and p"""
    samples: Tuple[LabeledSeries, ...]
    label_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        names = dict(self.label_names)
        if not names:
            names = default_label_names(s.label for s in samples)
        object.__setattr__(self, "label_names", names)

        if samples:
            shape = samples[0].series.shape
            for i, sample in enumerate(samples):
                if sample.series.shape != shape:
                    raise DomainError(
                        f"sample {i} has shape {sample.series.shape}, expected {shape}"
                    )
        unknown = {s.label for s in samples} - set(names)
        if unknown:
            raise DomainError(f"labels {sorted(unknown)} are not in the declared label set")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, index: int) -> LabeledSeries:
        return self.samples[index]

    @property
    def m(self) -> int:
        self._require_samples()
        return self.samples[0].series.m

    @property
    def p(self) -> int:
        self._require_samples()
        return self.samples[0].series.p

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=np.int64)

    @property
    def label_set(self) -> List[int]:
        return sorted(self.label_names)

    def values(self) -> np.ndarray:
        """Stacked values, shape (n, m, p)"""
        self._require_samples()
        return np.stack([s.series.values for s in self.samples])

    def series(self) -> List[TimeSeries]:
        return [s.series for s in self.samples]

    def indices_for(self, label: int) -> List[int]:
        return [i for i, s in enumerate(self.samples) if s.label == label]

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.samples[i] for i in indices), self.label_names)

    def require_all_labels(self):
        """Training needs at least one sample for every declared label"""
        present = {s.label for s in self.samples}
        missing = sorted(set(self.label_names) - present)
        if missing:
            raise DomainError(f"no training samples for labels {missing}")

    def _require_samples(self):
        if not self.samples:
            raise DomainError("dataset is empty")


def default_label_names(labels: Iterable[int]) -> Dict[int, str]:
    """UCI activity names where the label is a UCI activity, a generic name otherwise"""
    return {
        label: UCI_ACTIVITY_NAMES.get(label, f"activity_{label}")
        for label in sorted(set(labels))
    }


def is_uci_label_set(labels: Iterable[int]) -> bool:
    return set(labels) == set(UCI_ACTIVITY_NAMES)


def _read_matrix(path: Path, expected_columns: Optional[int] = None) -> np.ndarray:
    """
    Read a whitespace-separated numeric matrix, one sample per row.

    The fast path is numpy; when it fails the file is scanned line by line so
    the error names the offending line.
    """
    try:
        matrix = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError:
        matrix = None

    if matrix is None or (expected_columns is not None and matrix.shape[1] != expected_columns):
        _diagnose_matrix(path, expected_columns)
        # loadtxt failed on something the scan accepts (should not happen)
        raise DatasetFormatError("unreadable numeric matrix", str(path))
    return matrix


def _diagnose_matrix(path: Path, expected_columns: Optional[int]):
    width = expected_columns
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens:
                continue
            for column, token in enumerate(tokens, start=1):
                try:
                    float(token)
                except ValueError:
                    raise DatasetParseError(str(path), line_no, column, token) from None
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DatasetFormatError(
                    f"row has {len(tokens)} columns, expected {width}", str(path), line_no
                )


def _read_integers(path: Path) -> np.ndarray:
    values = []
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 1:
                raise DatasetFormatError(
                    f"expected one integer per row, got {len(tokens)} tokens", str(path), line_no
                )
            try:
                values.append(int(tokens[0]))
            except ValueError:
                try:
                    as_float = float(tokens[0])
                except ValueError:
                    raise DatasetParseError(str(path), line_no, 1, tokens[0]) from None
                if not as_float.is_integer():
                    raise DatasetParseError(str(path), line_no, 1, tokens[0]) from None
                values.append(int(as_float))
    return np.array(values, dtype=np.int64)


def load_uci_layout(
    signal_paths: Sequence[PathLike],
    label_path: PathLike,
    subject_path: Optional[PathLike] = None,
    label_names: Optional[Mapping[int, str]] = None,
    label_offset: int = 0,
) -> Dataset:
    """
    Load a dataset stored in the UCI HAR "Inertial Signals" layout.

    Args:
        signal_paths: One file per channel; row i of file c is channel c of sample i
        label_path: One integer label per row
        subject_path: Optional subject identifier file, parallel to the labels
        label_names: Declared label set; defaults to the labels found in the file
        label_offset: Subtracted from every raw label (1 for the raw UCI files)

    Returns:
        Dataset with p = len(signal_paths)
    """
    if not signal_paths:
        raise DomainError("at least one signal file is required")

    channels = []
    width = None
    for path in map(Path, signal_paths):
        matrix = _read_matrix(path, width)
        width = matrix.shape[1]
        if channels and matrix.shape[0] != channels[0].shape[0]:
            raise DatasetConsistencyError(
                f"{path} has {matrix.shape[0]} rows, {signal_paths[0]} has {channels[0].shape[0]}"
            )
        channels.append(matrix)

    n_rows = channels[0].shape[0]
    labels = _read_integers(Path(label_path)) - label_offset
    if labels.shape[0] != n_rows:
        raise DatasetConsistencyError(
            f"{label_path} has {labels.shape[0]} labels for {n_rows} signal rows"
        )

    subjects = None
    if subject_path is not None:
        subjects = _read_integers(Path(subject_path))
        if subjects.shape[0] != n_rows:
            raise DatasetConsistencyError(
                f"{subject_path} has {subjects.shape[0]} rows for {n_rows} signal rows"
            )

    values = np.stack(channels, axis=-1)  # (n, m, p)
    samples = tuple(
        LabeledSeries(
            TimeSeries(values[i]),
            int(labels[i]),
            None if subjects is None else int(subjects[i]),
        )
        for i in range(n_rows)
    )
    names = dict(label_names) if label_names else default_label_names(labels.tolist())
    dataset = Dataset(samples, names)
    logger.info(
        f"Loaded {len(dataset)} samples (m={width}, p={len(channels)}) from {label_path}"
    )
    return dataset


def format_number(value: float) -> str:
    """17 significant digits: bit-exact float64 round-trip"""
    return format(float(value), ".17g")


def save_uci_layout(
    dataset: Dataset,
    directory: PathLike,
    prefix: str = "train",
    channel_names: Optional[Sequence[str]] = None,
    label_offset: int = 0,
) -> Tuple[List[Path], Path]:
    """
    Write a dataset in the UCI layout (one file per channel plus a label file).

    Returns:
        Tuple of (signal_paths, label_path)
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    values = dataset.values()
    p = values.shape[2]
    if channel_names is None:
        channel_names = UCI_SIGNAL_NAMES[:p] if p <= len(UCI_SIGNAL_NAMES) else [
            f"channel_{c}" for c in range(p)
        ]

    signal_paths = []
    for c in range(p):
        path = directory / f"{channel_names[c]}_{prefix}.txt"
        with open(path, "w") as f:
            for row in values[:, :, c]:
                f.write(" ".join(format_number(v) for v in row) + "\n")
        signal_paths.append(path)

    label_path = directory / f"y_{prefix}.txt"
    with open(label_path, "w") as f:
        for label in dataset.labels:
            f.write(f"{int(label) + label_offset}\n")

    subjects = [s.subject for s in dataset.samples]
    if subjects and all(s is not None for s in subjects):
        with open(directory / f"subject_{prefix}.txt", "w") as f:
            for subject in subjects:
                f.write(f"{subject}\n")

    logger.info(f"Wrote {len(dataset)} samples to {directory} ({prefix})")
    return signal_paths, label_path


def remove_flat_curves(data: Dataset, quantile: float = 0.05) -> Tuple[Dataset, FlatCurveReport]:
    """
    Drop samples whose every dimension is flat.

    A dimension is flat when its range (max - min over time) is at or below the
    quantile of that dimension's ranges across the dataset. Thresholds come from
    the input dataset only; survivors keep their original order.
    """
    if len(data) == 0:
        raise DomainError("cannot filter an empty dataset")
    if not 0.0 < quantile < 1.0:
        raise DomainError(f"quantile must lie in (0, 1), got {quantile}")

    values = data.values()
    ranges = values.max(axis=1) - values.min(axis=1)  # (n, p)
    thresholds = np.quantile(ranges, quantile, axis=0, method="linear")
    flat = np.all(ranges <= thresholds, axis=1)

    removed = tuple(int(i) for i in np.flatnonzero(flat))
    kept = tuple(int(i) for i in np.flatnonzero(~flat))
    report = FlatCurveReport(quantile, thresholds, removed, kept)
    logger.info(
        f"Flat-curve filter (q={quantile}): removed {report.removed_count} of {len(data)} samples"
    )
    return data.subset(kept), report
