"""
Plot-ready export of templates and samples
"""
import logging
from pathlib import Path
from typing import List, Sequence, Union

from modules.dataset import Dataset, TimeSeries, format_number
from modules.templates import Template

logger = logging.getLogger(__name__)


def export_series(series: TimeSeries, directory: Union[str, Path], stem: str) -> List[Path]:
    """
    One two-column `index value` file per dimension.

    Files are named `{stem}_dim{c}.txt`.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for c in range(series.p):
        path = directory / f"{stem}_dim{c}.txt"
        with open(path, "w") as f:
            for index, value in enumerate(series.values[:, c]):
                f.write(f"{index} {format_number(value)}\n")
        paths.append(path)
    return paths


def export_templates(templates: Sequence[Template], directory: Union[str, Path]) -> List[Path]:
    """Every template, named by label and its position in the set"""
    paths = []
    for index, template in enumerate(templates):
        stem = f"template_{index:03d}_label{template.label}_{template.method.value}"
        paths.extend(export_series(template.series, directory, stem))
    logger.info(f"Exported {len(templates)} templates to {directory}")
    return paths


def export_samples(
    dataset: Dataset, directory: Union[str, Path], per_label: int = 3, prefix: str = "sample"
) -> List[Path]:
    """The first `per_label` samples of every activity"""
    paths = []
    for label in dataset.label_set:
        for index in dataset.indices_for(label)[:per_label]:
            stem = f"{prefix}_{index:05d}_label{label}"
            paths.extend(export_series(dataset[index].series, directory, stem))
    logger.info(f"Exported samples of {len(dataset.label_set)} activities to {directory}")
    return paths
