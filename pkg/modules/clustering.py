"""
Per-activity pairwise DTW distances and complete-linkage agglomerative
clustering with the `cut` flat-cluster rule
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataset import Dataset, TimeSeries, format_number
from .dtw import DistanceKind, DtwParams, as_array, series_distance
from .errors import DomainError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PairwiseDistances:
    matrix: np.ndarray
    kind: DistanceKind
    bw: int
    dw: int

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DomainError(f"distance matrix must be square, got {matrix.shape}")
        if np.any(np.diag(matrix) != 0.0):
            raise DomainError("distance matrix diagonal must be exactly 0")
        if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
            raise DomainError("distances must be finite and non-negative")
        if not np.allclose(matrix, matrix.T, rtol=0.0, atol=SYMMETRY_TOLERANCE):
            raise DomainError("distance matrix is not symmetric")
        object.__setattr__(self, "matrix", matrix)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d_max(self) -> float:
        return float(self.matrix.max()) if self.n else 0.0


@dataclass(frozen=True)
class ClusterSet:
    """
    Flat clusters of one activity.

    `clusters` hold positions into `sample_indices` (the activity's samples in
    the parent dataset); clusters are ordered by their smallest member.
    """
    label: Optional[int]
    clusters: Tuple[Tuple[int, ...], ...]
    cut: float
    d_max: float
    threshold: float
    merge_heights: Tuple[float, ...]
    sample_indices: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.clusters)

    def members(self, cluster_index: int) -> List[int]:
        """Dataset indices of one cluster's members"""
        return [self.sample_indices[i] for i in self.clusters[cluster_index]]

    def assignments(self) -> np.ndarray:
        """Cluster id per local position"""
        out = np.empty(len(self.sample_indices), dtype=np.int64)
        for cluster_id, members in enumerate(self.clusters):
            out[list(members)] = cluster_id
        return out


def pairwise_distances(
    samples: Sequence[Union[TimeSeries, np.ndarray]],
    params: DtwParams,
    kind: DistanceKind = DistanceKind.DTWSUBSEQ,
    threads: int = 1,
) -> PairwiseDistances:
    """
    Symmetric distance matrix; each unordered pair is computed once and mirrored.

    Args:
        samples: Series of identical shape
        params: Bandwidth / displacement window
        kind: DTW or DTWsubseq
        threads: Worker threads (the DP kernels release the GIL)
    """
    kind = DistanceKind(kind)
    arrays = [as_array(s) for s in samples]
    n = len(arrays)
    if n < 1:
        raise DomainError("need at least one sample")
    shape = arrays[0].shape
    for i, arr in enumerate(arrays):
        if arr.shape != shape:
            raise DomainError(f"sample {i} has shape {arr.shape}, expected {shape}")
    if kind is DistanceKind.DTWSUBSEQ:
        params.check_length(shape[0])

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def compute(pair):
        i, j = pair
        return series_distance(arrays[i], arrays[j], params, kind)

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(compute, pairs))
    else:
        values = [compute(pair) for pair in pairs]

    matrix = np.zeros((n, n))
    for (i, j), value in zip(pairs, values):
        matrix[i, j] = matrix[j, i] = value
    return PairwiseDistances(matrix, kind, params.bw, params.dw)


def complete_linkage_cluster(
    dists: PairwiseDistances,
    cut: float,
    label: Optional[int] = None,
    sample_indices: Optional[Sequence[int]] = None,
) -> ClusterSet:
    """
    Agglomerative clustering under complete linkage, stopped at cut * d_max.

    Merges proceed in order of linkage height; equal heights merge the pair with
    the lexicographically smallest (min-index, max-index). A merge is taken while
    its height is <= cut * d_max, so every flat cluster's diameter respects the
    bound and cut = 1 always yields one cluster.
    """
    if not 0.0 < cut <= 1.0:
        raise DomainError(f"cut must lie in (0, 1], got {cut}")
    n = dists.n
    if sample_indices is None:
        sample_indices = range(n)
    sample_indices = tuple(int(i) for i in sample_indices)
    if len(sample_indices) != n:
        raise DomainError(f"{len(sample_indices)} sample indices for {n} samples")

    d_max = dists.d_max
    threshold = cut * d_max

    # Slot i holds the cluster whose smallest member is i
    linkage = dists.matrix.copy()
    np.fill_diagonal(linkage, np.inf)
    members: Dict[int, List[int]] = {i: [i] for i in range(n)}
    heights: List[float] = []

    while len(members) > 1:
        flat_index = int(np.argmin(linkage))
        i, j = divmod(flat_index, n)
        height = float(linkage[i, j])
        if height > threshold:
            break
        if i > j:
            i, j = j, i
        members[i].extend(members.pop(j))
        merged = np.maximum(linkage[i], linkage[j])
        linkage[i, :] = merged
        linkage[:, i] = merged
        linkage[j, :] = np.inf
        linkage[:, j] = np.inf
        linkage[i, i] = np.inf
        heights.append(height)

    clusters = tuple(tuple(sorted(members[slot])) for slot in sorted(members))
    logger.debug(
        f"Complete linkage (label={label}): {n} samples -> {len(clusters)} clusters "
        f"at threshold {threshold:.6g}"
    )
    return ClusterSet(
        label=label,
        clusters=clusters,
        cut=cut,
        d_max=d_max,
        threshold=threshold,
        merge_heights=tuple(heights),
        sample_indices=sample_indices,
    )


def cluster_dataset(
    dataset: Dataset,
    params: DtwParams,
    kind: DistanceKind,
    cut: float,
    threads: int = 1,
) -> Dict[int, Tuple[PairwiseDistances, ClusterSet]]:
    """Cluster every activity separately; d_max is taken per activity"""
    result = {}
    for label in dataset.label_set:
        indices = dataset.indices_for(label)
        if not indices:
            raise DomainError(f"no samples for label {label}")
        dists = pairwise_distances([dataset[i].series for i in indices], params, kind, threads)
        cluster_set = complete_linkage_cluster(dists, cut, label, indices)
        logger.info(
            f"Activity {label} ({dataset.label_names[label]}): "
            f"{len(indices)} samples -> {len(cluster_set)} clusters"
        )
        result[label] = (dists, cluster_set)
    return result


def cluster_diameter(dists: PairwiseDistances, members: Sequence[int]) -> float:
    """Largest pairwise distance inside a cluster"""
    members = list(members)
    return float(dists.matrix[np.ix_(members, members)].max())


def save_distance_matrix(dists: PairwiseDistances, path: Union[str, Path], header: Sequence[str] = ()):
    """Row-major, whitespace-separated dump of a distance matrix"""
    with open(path, "w") as f:
        for line in header:
            f.write(f"# {line}\n")
        f.write(f"# kind={dists.kind.value} bw={dists.bw} dw={dists.dw} n={dists.n}\n")
        for row in dists.matrix:
            f.write(" ".join(format_number(v) for v in row) + "\n")


def load_distance_matrix(path: Union[str, Path]) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=2)


def save_cluster_assignments(
    cluster_set: ClusterSet,
    path: Union[str, Path],
    header: Sequence[str] = (),
    rows: Optional[Sequence[int]] = None,
):
    """
    One `sample_index cluster_id` line per sample.

    `rows` maps dataset indices back to rows of the input files when the
    clustered dataset is a filtered subset; sample_index is then the input row.
    """
    assignments = cluster_set.assignments()
    with open(path, "w") as f:
        for line in header:
            f.write(f"# {line}\n")
        f.write(
            f"# label={cluster_set.label} cut={cluster_set.cut} d_max={format_number(cluster_set.d_max)} "
            f"clusters={len(cluster_set)}\n"
        )
        for position, sample_index in enumerate(cluster_set.sample_indices):
            if rows is not None:
                sample_index = rows[sample_index]
            f.write(f"{sample_index} {assignments[position]}\n")
