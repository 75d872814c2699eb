"""
Template construction from clusters: DTW pointwise averaging (DPA) and
DTW barycenter averaging (DBA), plus the template-set file format
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .clustering import ClusterSet
from .dataset import Dataset, TimeSeries, format_number
from .dtw import (
    DistanceKind,
    DtwParams,
    align,
    as_array,
    dtw_distance,
    dtw_path,
    series_distance,
)
from .errors import ArtifactFormatError, DomainError

logger = logging.getLogger(__name__)

TEMPLATE_FORMAT_VERSION = 1
SEPARATOR = "---"

DBA_MAX_ITERS = 10
DBA_TOL = 1e-6


class AveragingMethod(str, Enum):
    DPA = "dpa"
    DBA = "dba"


@dataclass(frozen=True)
class TemplateProvenance:
    cluster_size: int
    source_label: int
    medoid_index: Optional[int] = None
    init_index: Optional[int] = None
    iterations: Optional[int] = None
    objective_trace: Tuple[float, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class Template:
    series: TimeSeries
    label: int
    method: AveragingMethod
    provenance: TemplateProvenance


def _check_cluster(cluster: Sequence[Union[TimeSeries, np.ndarray]]) -> List[np.ndarray]:
    if len(cluster) == 0:
        raise DomainError("cannot average an empty cluster")
    arrays = [as_array(x) for x in cluster]
    shape = arrays[0].shape
    for i, arr in enumerate(arrays):
        if arr.shape != shape:
            raise DomainError(f"cluster member {i} has shape {arr.shape}, expected {shape}")
    return arrays


def find_medoid(
    cluster: Sequence[Union[TimeSeries, np.ndarray]],
    params: DtwParams,
    kind: DistanceKind = DistanceKind.DTWSUBSEQ,
    distances: Optional[np.ndarray] = None,
) -> Tuple[int, np.ndarray]:
    """
    Member minimising the summed distance to all members (ties: lowest index).

    Returns:
        Tuple of (medoid_index, per-member distance sums)
    """
    arrays = _check_cluster(cluster)
    n = len(arrays)
    if distances is None:
        distances = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                distances[i, j] = distances[j, i] = series_distance(
                    arrays[i], arrays[j], params, kind
                )
    sums = np.asarray(distances).sum(axis=1)
    return int(np.argmin(sums)), sums


def dpa_template(
    cluster: Sequence[Union[TimeSeries, np.ndarray]],
    params: DtwParams,
    label: int = 0,
    kind: DistanceKind = DistanceKind.DTWSUBSEQ,
    distances: Optional[np.ndarray] = None,
) -> Template:
    """
    DTW pointwise averaging.

    The medoid is chosen under `kind` (DTWsubseq by default); every member is
    then aligned to it with plain DTW and the aligned members are averaged
    pointwise.

    Args:
        cluster: Member series
        params: DTW parameters (bw for alignment, dw for the medoid search)
        label: Activity of the cluster
        kind: Distance used to pick the medoid
        distances: Optional precomputed member distance matrix under `kind`
    """
    arrays = _check_cluster(cluster)
    medoid, _ = find_medoid(arrays, params, kind, distances)
    reference = arrays[medoid]
    aligned = [align(reference, x, params.bw).values for x in arrays]
    average = np.mean(aligned, axis=0)
    return Template(
        series=TimeSeries(average),
        label=label,
        method=AveragingMethod.DPA,
        provenance=TemplateProvenance(
            cluster_size=len(arrays), source_label=label, medoid_index=medoid
        ),
    )


def dba_objective(average: np.ndarray, members: Sequence[np.ndarray], bw: int) -> float:
    """Sum over members of the squared plain DTW distance to the average"""
    return float(sum(dtw_distance(average, x, bw) ** 2 for x in members))


def _dba_update(average: np.ndarray, members: Sequence[np.ndarray], bw: int) -> np.ndarray:
    """Mean of every member value associated with each average coordinate"""
    m, p = average.shape
    sums = np.zeros((m, p))
    counts = np.zeros(m)
    for x in members:
        path = dtw_path(average, x, bw).pairs
        np.add.at(sums, path[:, 0], x[path[:, 1]])
        np.add.at(counts, path[:, 0], 1.0)
    return sums / counts[:, None]


def dba_template(
    cluster: Sequence[Union[TimeSeries, np.ndarray]],
    params: DtwParams,
    max_iters: int = DBA_MAX_ITERS,
    tol: float = DBA_TOL,
    seed: Union[int, Sequence[int], np.random.Generator] = 0,
    label: int = 0,
) -> Template:
    """
    DTW barycenter averaging started from a random cluster member.

    Each iteration associates every average coordinate with the member values
    on the plain-DTW optimal paths and replaces it with their mean. Iteration
    stops after `max_iters` updates or when the relative objective decrease is
    at most `tol`; an update that would raise the objective is discarded, so the
    recorded objective trace never increases.
    """
    arrays = _check_cluster(cluster)
    if max_iters < 1:
        raise DomainError(f"max_iters must be >= 1, got {max_iters}")
    if tol < 0:
        raise DomainError(f"tol must be >= 0, got {tol}")

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    init_index = int(rng.integers(len(arrays)))
    average = arrays[init_index].copy()
    objective = dba_objective(average, arrays, params.bw)
    trace = [objective]

    # counts accepted updates only
    iterations = 0
    for attempt in range(1, max_iters + 1):
        candidate = _dba_update(average, arrays, params.bw)
        candidate_objective = dba_objective(candidate, arrays, params.bw)
        if candidate_objective > objective:
            logger.debug(
                f"DBA update rejected at attempt {attempt}: "
                f"{candidate_objective:.6g} > {objective:.6g}"
            )
            break
        iterations += 1
        previous = objective
        average, objective = candidate, candidate_objective
        trace.append(objective)
        if previous - objective <= tol * previous:
            break

    logger.debug(
        f"DBA (label={label}, size={len(arrays)}, init={init_index}): "
        f"{iterations} iterations, objective {trace[0]:.6g} -> {objective:.6g}"
    )
    return Template(
        series=TimeSeries(average),
        label=label,
        method=AveragingMethod.DBA,
        provenance=TemplateProvenance(
            cluster_size=len(arrays),
            source_label=label,
            init_index=init_index,
            iterations=iterations,
            objective_trace=tuple(trace),
        ),
    )


def build_templates(
    dataset: Dataset,
    clusters: Mapping[int, ClusterSet],
    method: AveragingMethod,
    params: DtwParams,
    seed: int = 0,
    kind: DistanceKind = DistanceKind.DTWSUBSEQ,
    max_iters: int = DBA_MAX_ITERS,
    tol: float = DBA_TOL,
    distances: Optional[Mapping[int, np.ndarray]] = None,
    threads: int = 1,
) -> List[Template]:
    """
    One template per cluster, in activity-major then cluster-index order.

    DBA clusters draw their start member from a generator seeded with
    (seed, label, cluster index), so the result does not depend on `threads`.

    Args:
        dataset: Training data the cluster indices point into
        clusters: ClusterSet per activity label
        method: DPA or DBA
        params: DTW parameters
        seed: Base seed for DBA initialisation
        kind: Distance used for the DPA medoid search
        distances: Optional per-activity distance matrices (local indices) under `kind`
        threads: Worker threads for independent clusters
    """
    method = AveragingMethod(method)
    jobs = []
    for label in sorted(clusters):
        cluster_set = clusters[label]
        for cluster_index, local in enumerate(cluster_set.clusters):
            jobs.append((label, cluster_index, cluster_set, local))

    def run(job) -> Template:
        label, cluster_index, cluster_set, local = job
        members = [dataset[i].series for i in cluster_set.members(cluster_index)]
        if method is AveragingMethod.DPA:
            sub = None
            if distances is not None and label in distances:
                sub = np.asarray(distances[label])[np.ix_(local, local)]
            return dpa_template(members, params, label, kind, sub)
        return dba_template(
            members, params, max_iters, tol, seed=[seed, label, cluster_index], label=label
        )

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            templates = list(pool.map(run, jobs))
    else:
        templates = [run(job) for job in jobs]

    logger.info(f"Built {len(templates)} {method.value.upper()} templates")
    return templates


def _optional(value) -> str:
    return "-" if value is None else str(value)


def _parse_optional(value: str) -> Optional[int]:
    return None if value == "-" else int(value)


def save_templates(templates: Sequence[Template], path: Union[str, Path], header: Sequence[str] = ()):
    """
    Write a template set.

    Each template is a header line followed by m lines of p numbers
    (17 significant digits); templates are separated by `---` lines.
    """
    with open(path, "w") as f:
        f.write(f"# har-templates template-set v{TEMPLATE_FORMAT_VERSION}\n")
        for line in header:
            f.write(f"# {line}\n")
        for index, template in enumerate(templates):
            if index:
                f.write(f"{SEPARATOR}\n")
            prov = template.provenance
            series = template.series
            f.write(
                f"TEMPLATE v{TEMPLATE_FORMAT_VERSION} m={series.m} p={series.p} "
                f"label={template.label} method={template.method.value} "
                f"cluster_size={prov.cluster_size} source_label={prov.source_label} "
                f"medoid_index={_optional(prov.medoid_index)} "
                f"init_index={_optional(prov.init_index)} "
                f"iterations={_optional(prov.iterations)}\n"
            )
            for row in series.values:
                f.write(" ".join(format_number(v) for v in row) + "\n")
    logger.info(f"Saved {len(templates)} templates to {path}")


def load_templates(path: Union[str, Path]) -> List[Template]:
    """Read a template set written by save_templates"""
    with open(path, "r") as f:
        lines = [line.rstrip("\n") for line in f if line.strip() and not line.startswith("#")]

    templates = []
    position = 0
    while position < len(lines):
        header = lines[position]
        if header == SEPARATOR:
            position += 1
            continue
        fields = header.split()
        if not fields or fields[0] != "TEMPLATE":
            raise ArtifactFormatError(f"{path}: expected a TEMPLATE header, got {header!r}")
        if fields[1] != f"v{TEMPLATE_FORMAT_VERSION}":
            raise ArtifactFormatError(f"{path}: unsupported template version {fields[1]}")
        try:
            meta = dict(item.split("=", 1) for item in fields[2:])
            m, p = int(meta["m"]), int(meta["p"])
            rows = [
                [float(token) for token in line.split()]
                for line in lines[position + 1: position + 1 + m]
            ]
            values = np.array(rows, dtype=np.float64)
            if values.shape != (m, p):
                raise ValueError(f"values have shape {values.shape}, expected {(m, p)}")
            templates.append(
                Template(
                    series=TimeSeries(values),
                    label=int(meta["label"]),
                    method=AveragingMethod(meta["method"]),
                    provenance=TemplateProvenance(
                        cluster_size=int(meta["cluster_size"]),
                        source_label=int(meta["source_label"]),
                        medoid_index=_parse_optional(meta["medoid_index"]),
                        init_index=_parse_optional(meta["init_index"]),
                        iterations=_parse_optional(meta["iterations"]),
                    ),
                )
            )
        except (KeyError, ValueError, DomainError) as e:
            raise ArtifactFormatError(f"{path}: malformed template: {e}") from e
        position += 1 + m
    return templates
