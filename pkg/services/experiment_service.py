"""
Experiment grid: cut x distance kind x averaging method
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from rich.console import Console
from rich.table import Table

from models.schemas import RunConfig
from modules.clustering import PairwiseDistances, complete_linkage_cluster, pairwise_distances
from modules.dataset import Dataset, format_number
from modules.dtw import DistanceKind

from .pipeline_service import artifact_header, dtw_params, fit_from_clusters, predict, prepare_training_set

logger = logging.getLogger(__name__)

BENCH_CUTS = (0.25, 0.5)
BENCH_DISTANCES = ("dtw", "dtwsubseq")
BENCH_AVERAGING = ("dpa", "dba")


@dataclass(frozen=True)
class BenchRow:
    cut: float
    distance: str
    averaging: str
    accuracy: float
    n_templates: int
    merged_static_accuracy: Optional[float] = None
    flat_quantile: Optional[float] = None


def with_pipeline(config: RunConfig, **updates) -> RunConfig:
    """Copy of the config with pipeline fields replaced"""
    return config.model_copy(update={"pipeline": config.pipeline.model_copy(update=updates)})


def run_bench(
    train: Dataset,
    test: Dataset,
    config: RunConfig,
    cuts: Sequence[float] = BENCH_CUTS,
    distances: Sequence[str] = BENCH_DISTANCES,
    averaging: Sequence[str] = BENCH_AVERAGING,
    threads: Optional[int] = None,
) -> List[BenchRow]:
    """
    Train and score one pipeline per grid point.

    Pairwise distances are computed once per distance kind and shared by every
    cut and averaging method.
    """
    threads = threads or config.pipeline.threads
    train, _ = prepare_training_set(train, config)
    rows = []
    for distance in distances:
        kind = DistanceKind(distance)
        params = dtw_params(config)
        if kind is DistanceKind.DTWSUBSEQ:
            params.check_length(train.m)
        per_label: Dict[int, PairwiseDistances] = {
            label: pairwise_distances(
                [train[i].series for i in train.indices_for(label)], params, kind, threads
            )
            for label in train.label_set
        }
        for cut in cuts:
            clusters = {
                label: complete_linkage_cluster(dists, cut, label, train.indices_for(label))
                for label, dists in per_label.items()
            }
            for method in averaging:
                run_config = with_pipeline(config, cut=cut, distance=kind.value, averaging=method)
                model = fit_from_clusters(
                    train,
                    run_config,
                    clusters,
                    {label: dists.matrix for label, dists in per_label.items()},
                    threads,
                )
                report = predict(model, test, threads)
                rows.append(
                    BenchRow(
                        cut=cut,
                        distance=kind.value,
                        averaging=method,
                        accuracy=report.accuracy,
                        n_templates=len(model.templates),
                        merged_static_accuracy=report.merged_static_accuracy,
                        flat_quantile=config.pipeline.flat_quantile,
                    )
                )
                logger.info(
                    f"cut={cut} distance={kind.value} averaging={method}: "
                    f"accuracy {report.accuracy:.4f} with {len(model.templates)} templates"
                )
    return rows


def write_bench(rows: Sequence[BenchRow], path: Union[str, Path], config: RunConfig):
    """Whitespace-separated result table, one grid point per line"""
    with open(path, "w") as f:
        for line in artifact_header("bench", config):
            f.write(f"# {line}\n")
        f.write("cut distance averaging accuracy n_templates merged_static_accuracy flat_quantile\n")
        for row in rows:
            merged = "-" if row.merged_static_accuracy is None else format_number(row.merged_static_accuracy)
            flat = "-" if row.flat_quantile is None else format_number(row.flat_quantile)
            f.write(
                f"{format_number(row.cut)} {row.distance} {row.averaging} "
                f"{format_number(row.accuracy)} {row.n_templates} {merged} {flat}\n"
            )
    logger.info(f"Bench results written to {path}")


def bench_table(rows: Sequence[BenchRow]) -> Table:
    table = Table(title="Test accuracy")
    table.add_column("cut", justify="right")
    table.add_column("distance")
    table.add_column("averaging")
    table.add_column("accuracy", justify="right")
    table.add_column("templates", justify="right")
    if any(row.merged_static_accuracy is not None for row in rows):
        table.add_column("merged static", justify="right")
    for row in rows:
        cells = [f"{row.cut:g}", row.distance, row.averaging.upper(), f"{row.accuracy:.3f}", str(row.n_templates)]
        if row.merged_static_accuracy is not None:
            cells.append(f"{row.merged_static_accuracy:.3f}")
        table.add_row(*cells)
    return table


def print_bench(rows: Sequence[BenchRow], console: Optional[Console] = None):
    (console or Console(stderr=True)).print(bench_table(rows))
