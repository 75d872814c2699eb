"""
Template pipeline service
Runs cluster -> templates -> features -> PCA -> SVM, predicts, and persists
model bundles and prediction reports
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from sklearn.preprocessing import StandardScaler

from models.schemas import RunConfig
from modules.classify import (
    PcaModel,
    SvmModel,
    accuracy_from_confusion,
    confusion_matrix,
    featurize_many,
    fit_pca,
    fit_svm,
    merged_accuracy,
)
from modules.clustering import ClusterSet, cluster_dataset
from modules.config_helper import flatten_config, validate_config
from modules.dataset import Dataset, FlatCurveReport, format_number, is_uci_label_set, remove_flat_curves
from modules.dtw import DistanceKind, DtwParams
from modules.errors import ArtifactFormatError, ConfigError, DomainError
from modules.templates import AveragingMethod, Template, build_templates, load_templates, save_templates

logger = logging.getLogger(__name__)

BUNDLE_VERSION = 1
TEMPLATES_FILE = "templates.txt"
PCA_FILE = "pca.txt"
SVM_FILE = "svm.txt"
CONFIG_FILE = "config.yaml"


def dtw_params(config: RunConfig) -> DtwParams:
    if config.pipeline.dw is None:
        raise ConfigError("pipeline.dw is not set (config file, HAR_TEMPLATES_PIPELINE__DW or --dw)")
    return DtwParams(bw=config.pipeline.bw, dw=config.pipeline.dw)


def artifact_header(kind: str, config: RunConfig) -> List[str]:
    """Leading comment lines: artifact name, format version, effective config"""
    return [f"har-templates {kind} v{BUNDLE_VERSION}"] + flatten_config(config)


def _line(values) -> str:
    return " ".join(format_number(v) for v in np.ravel(values))


@dataclass(frozen=True)
class PipelineModel:
    templates: List[Template]
    scaler_mean: np.ndarray
    scaler_scale: np.ndarray
    pca: PcaModel
    svm: SvmModel
    config: RunConfig
    label_names: Dict[int, str] = field(default_factory=dict)

    @property
    def distance_kind(self) -> DistanceKind:
        return DistanceKind(self.config.pipeline.distance)

    def features(self, dataset: Dataset, threads: int = 1) -> np.ndarray:
        return featurize_many(
            dataset.series(), self.templates, dtw_params(self.config), self.distance_kind, threads
        )

    def project(self, features: np.ndarray) -> np.ndarray:
        return self.pca.transform((features - self.scaler_mean) / self.scaler_scale)

    def predict_labels(self, dataset: Dataset, threads: int = 1) -> np.ndarray:
        return self.svm.predict(self.project(self.features(dataset, threads)))


@dataclass(frozen=True)
class PredictionReport:
    labels: List[int]
    actual: np.ndarray
    predicted: np.ndarray
    confusion: np.ndarray
    accuracy: float
    merged_static_accuracy: Optional[float] = None
    filtered_accuracy: Optional[float] = None
    filtered_count: Optional[int] = None


def cluster_stage(train: Dataset, config: RunConfig, threads: Optional[int] = None) -> Dict[int, tuple]:
    """Per-activity distances and clusters for the configured distance and cut"""
    pipeline = config.pipeline
    kind = DistanceKind(pipeline.distance)
    params = dtw_params(config)
    if kind is DistanceKind.DTWSUBSEQ:
        params.check_length(train.m)
    return cluster_dataset(train, params, kind, pipeline.cut, threads or pipeline.threads)


def prepare_training_set(train: Dataset, config: RunConfig) -> Tuple[Dataset, Optional[FlatCurveReport]]:
    """Flat-curve filtering when configured; the report is None when the filter is off"""
    if len(train) == 0:
        raise DomainError("training set is empty")
    report = None
    if config.pipeline.flat_quantile is not None:
        train, report = remove_flat_curves(train, config.pipeline.flat_quantile)
    train.require_all_labels()
    return train, report


def train_pipeline(
    train: Dataset,
    config: RunConfig,
    output_dir: Optional[Union[str, Path]] = None,
    threads: Optional[int] = None,
) -> PipelineModel:
    """
    Fit the full template classifier.

    Args:
        train: Training dataset
        config: Effective configuration
        output_dir: When given, the model bundle is written there
        threads: Overrides pipeline.threads

    Returns:
        PipelineModel
    """
    pipeline = config.pipeline
    threads = threads or pipeline.threads
    logger.info(
        f"Training: distance={pipeline.distance} averaging={pipeline.averaging} cut={pipeline.cut} "
        f"bw={pipeline.bw} dw={pipeline.dw} seed={pipeline.seed}"
    )

    train, _ = prepare_training_set(train, config)
    staged = cluster_stage(train, config, threads)
    clusters: Dict[int, ClusterSet] = {label: pair[1] for label, pair in staged.items()}
    distances: Dict[int, np.ndarray] = {label: pair[0].matrix for label, pair in staged.items()}
    model = fit_from_clusters(train, config, clusters, distances, threads)
    if output_dir is not None:
        save_model_bundle(model, output_dir)
    return model


def fit_from_clusters(
    train: Dataset,
    config: RunConfig,
    clusters: Dict[int, ClusterSet],
    distances: Optional[Dict[int, np.ndarray]] = None,
    threads: Optional[int] = None,
) -> PipelineModel:
    """Templates, features, standardisation, PCA and SVM from finished clusters"""
    pipeline = config.pipeline
    threads = threads or pipeline.threads
    kind = DistanceKind(pipeline.distance)
    params = dtw_params(config)

    templates = build_templates(
        train,
        clusters,
        AveragingMethod(pipeline.averaging),
        params,
        seed=pipeline.seed,
        kind=kind,
        max_iters=pipeline.dba_max_iters,
        tol=pipeline.dba_tol,
        distances=distances,
        threads=threads,
    )

    features = featurize_many(train.series(), templates, params, kind, threads)
    scaler = StandardScaler().fit(features)
    standardized = scaler.transform(features)
    pca = fit_pca(standardized, pipeline.pca_variance)
    svm = fit_svm(pca.transform(standardized), train.labels, pipeline.svm_c, pipeline.svm_epochs, pipeline.seed)

    return PipelineModel(
        templates=templates,
        scaler_mean=np.asarray(scaler.mean_, dtype=np.float64),
        scaler_scale=np.asarray(scaler.scale_, dtype=np.float64),
        pca=pca,
        svm=svm,
        config=config,
        label_names=dict(train.label_names),
    )


def predict(model: PipelineModel, test: Dataset, threads: Optional[int] = None) -> PredictionReport:
    """
    Classify a test set and score it.

    Accuracy is reported on the full test set; with a flat-curve quantile
    configured it is also reported on the filtered set (thresholds from the test
    set itself). The merged-static accuracy is added for the six UCI activities.
    """
    if len(test) == 0:
        raise DomainError("test set is empty")
    template_shape = model.templates[0].series.shape
    if (test.m, test.p) != template_shape:
        raise DomainError(f"test series shape {(test.m, test.p)} does not match model {template_shape}")

    pipeline = model.config.pipeline
    actual = test.labels
    predicted = model.predict_labels(test, threads or pipeline.threads)
    labels = sorted(set(model.label_names) | set(int(c) for c in model.svm.classes) | set(test.label_names))
    confusion = confusion_matrix(actual, predicted, labels)
    accuracy = accuracy_from_confusion(confusion)

    merged = None
    if pipeline.merged_static and is_uci_label_set(labels):
        merged = merged_accuracy(actual, predicted)

    filtered_accuracy = None
    filtered_count = None
    if pipeline.flat_quantile is not None:
        _, flat_report = remove_flat_curves(test, pipeline.flat_quantile)
        kept = list(flat_report.kept_indices)
        filtered_count = len(kept)
        if kept:
            filtered_accuracy = float(np.mean(actual[kept] == predicted[kept]))

    logger.info(f"Accuracy {accuracy:.4f} on {len(test)} samples")
    if merged is not None:
        logger.info(f"Merged-static accuracy {merged:.4f}")
    if filtered_accuracy is not None:
        logger.info(f"Accuracy {filtered_accuracy:.4f} on {filtered_count} flat-filtered samples")
    return PredictionReport(labels, actual, predicted, confusion, accuracy, merged, filtered_accuracy, filtered_count)


def write_prediction_report(report: PredictionReport, path: Union[str, Path], config: RunConfig):
    """`index actual predicted` lines, then the confusion block and accuracy lines"""
    with open(path, "w") as f:
        for line in artifact_header("predictions", config):
            f.write(f"# {line}\n")
        f.write("index actual predicted\n")
        for index, (a, p) in enumerate(zip(report.actual, report.predicted)):
            f.write(f"{index} {int(a)} {int(p)}\n")
        f.write("\nconfusion rows=actual columns=predicted\n")
        f.write("label " + " ".join(str(label) for label in report.labels) + "\n")
        for label, row in zip(report.labels, report.confusion):
            f.write(f"{label} " + " ".join(str(int(v)) for v in row) + "\n")
        f.write(f"\naccuracy = {format_number(report.accuracy)}\n")
        if report.merged_static_accuracy is not None:
            f.write(f"merged_static_accuracy = {format_number(report.merged_static_accuracy)}\n")
        if report.filtered_accuracy is not None:
            f.write(f"filtered_accuracy = {format_number(report.filtered_accuracy)}\n")
            f.write(f"filtered_count = {report.filtered_count}\n")
    logger.info(f"Predictions written to {path}")


def save_model_bundle(model: PipelineModel, directory: Union[str, Path]) -> Path:
    """
    Write templates, PCA, SVM and the config echo into `directory`.

    Every file starts with its format version and the effective configuration.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    config = model.config

    save_templates(model.templates, directory / TEMPLATES_FILE, flatten_config(config))

    pca = model.pca
    with open(directory / PCA_FILE, "w") as f:
        for line in artifact_header("pca", config):
            f.write(f"# {line}\n")
        f.write(f"features {pca.mean.shape[0]} components {pca.n_components}\n")
        f.write(f"scaler_mean {_line(model.scaler_mean)}\n")
        f.write(f"scaler_scale {_line(model.scaler_scale)}\n")
        f.write(f"mean {_line(pca.mean)}\n")
        f.write(f"explained_variance {_line(pca.explained_variance)}\n")
        for row in pca.components:
            f.write(f"component {_line(row)}\n")

    svm = model.svm
    with open(directory / SVM_FILE, "w") as f:
        for line in artifact_header("svm", config):
            f.write(f"# {line}\n")
        f.write(
            f"classes {len(svm.classes)} dimension {svm.weights.shape[1]} "
            f"C {format_number(svm.C)} objective {format_number(svm.objective)}\n"
        )
        for cls, bias, weights in zip(svm.classes, svm.biases, svm.weights):
            name = model.label_names.get(int(cls), f"activity_{int(cls)}")
            f.write(f"class {int(cls)} {name} bias {format_number(bias)} weights {_line(weights)}\n")

    with open(directory / CONFIG_FILE, "w") as f:
        f.write(f"# har-templates config v{BUNDLE_VERSION}\n")
        yaml.safe_dump(config.model_dump(), f, default_flow_style=False, sort_keys=False)

    logger.info(f"Model bundle written to {directory}")
    return directory


def _data_lines(path: Path) -> List[List[str]]:
    with open(path, "r") as f:
        return [line.split() for line in f if line.strip() and not line.startswith("#")]


def _floats(tokens: Sequence[str]) -> np.ndarray:
    return np.array([float(t) for t in tokens], dtype=np.float64)


def load_model_bundle(directory: Union[str, Path]) -> PipelineModel:
    directory = Path(directory)
    for name in (TEMPLATES_FILE, PCA_FILE, SVM_FILE, CONFIG_FILE):
        if not (directory / name).exists():
            raise ArtifactFormatError(f"model bundle {directory} is missing {name}")

    with open(directory / CONFIG_FILE, "r") as f:
        config = validate_config(yaml.safe_load(f) or {})
    templates = load_templates(directory / TEMPLATES_FILE)

    try:
        rows = {}
        components = []
        for tokens in _data_lines(directory / PCA_FILE):
            if tokens[0] == "component":
                components.append(_floats(tokens[1:]))
            elif tokens[0] == "features":
                n_components = int(tokens[3])
            else:
                rows[tokens[0]] = _floats(tokens[1:])
        pca = PcaModel(rows["mean"], np.vstack(components), rows["explained_variance"], n_components)

        classes, biases, weights, names = [], [], [], {}
        for tokens in _data_lines(directory / SVM_FILE):
            if tokens[0] == "classes":
                C = float(tokens[5])
                objective = float(tokens[7])
            elif tokens[0] == "class":
                cls = int(tokens[1])
                classes.append(cls)
                names[cls] = tokens[2]
                biases.append(float(tokens[4]))
                weights.append(_floats(tokens[6:]))
        svm = SvmModel(np.array(classes), np.vstack(weights), np.array(biases), C, objective)
        scaler_mean, scaler_scale = rows["scaler_mean"], rows["scaler_scale"]
    except (KeyError, IndexError, ValueError, UnboundLocalError) as e:
        raise ArtifactFormatError(f"malformed model bundle {directory}: {e}") from e

    return PipelineModel(templates, scaler_mean, scaler_scale, pca, svm, config, names)
