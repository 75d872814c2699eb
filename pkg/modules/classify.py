"""
Distance-to-template features, PCA and a one-vs-rest linear SVM
"""
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Sequence, Union

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import LinearSVC

from .dataset import TimeSeries
from .dtw import DistanceKind, DtwParams, as_array, series_distance
from .errors import DomainError
from .templates import Template

logger = logging.getLogger(__name__)

# Tolerance on the cumulative explained-variance comparison
VARIANCE_EPS = 1e-12

UCI_STATIC_LABELS = (3, 4, 5)


def featurize(
    sample: Union[TimeSeries, np.ndarray],
    templates: Sequence[Template],
    params: DtwParams,
    kind: DistanceKind = DistanceKind.DTWSUBSEQ,
) -> np.ndarray:
    """Distance from one sample to every template, in template order"""
    if not templates:
        raise DomainError("no templates to featurize against")
    x = as_array(sample)
    for j, template in enumerate(templates):
        if template.series.shape != x.shape:
            raise DomainError(
                f"sample shape {x.shape} does not match template {j} shape {template.series.shape}"
            )
    return np.array([series_distance(x, t.series.values, params, kind) for t in templates])


def featurize_many(
    samples: Sequence[Union[TimeSeries, np.ndarray]],
    templates: Sequence[Template],
    params: DtwParams,
    kind: DistanceKind = DistanceKind.DTWSUBSEQ,
    threads: int = 1,
) -> np.ndarray:
    """Feature matrix, one row per sample"""
    if not samples:
        return np.zeros((0, len(templates)))

    def run(sample):
        return featurize(sample, templates, params, kind)

    if threads > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, samples))
    else:
        rows = [run(s) for s in samples]
    return np.vstack(rows)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, f), orthonormal rows
    explained_variance: np.ndarray  # (f,), all eigenvalues, non-increasing
    n_components: int

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(features) - self.mean) @ self.components.T

    def inverse_transform(self, projected: np.ndarray) -> np.ndarray:
        return np.atleast_2d(projected) @ self.components + self.mean

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        total = self.explained_variance.sum()
        if total <= 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / total


def fit_pca(features: np.ndarray, variance_retained: float = 0.95) -> PcaModel:
    """
    Principal components of the mean-centred features.

    Components are eigenvectors of the sample covariance ordered by decreasing
    eigenvalue; the smallest count whose cumulative explained variance reaches
    `variance_retained` is kept. Each component's sign is fixed so its largest
    absolute entry is positive.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise DomainError(f"PCA needs an n x f matrix with n >= 2, got {features.shape}")
    if not 0.0 < variance_retained <= 1.0:
        raise DomainError(f"variance_retained must lie in (0, 1], got {variance_retained}")

    mean = features.mean(axis=0)
    centered = features - mean
    covariance = np.atleast_2d(np.cov(centered, rowvar=False))
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order].T

    pivots = np.argmax(np.abs(eigenvectors), axis=1)
    signs = np.sign(eigenvectors[np.arange(len(pivots)), pivots])
    signs[signs == 0] = 1.0
    eigenvectors = eigenvectors * signs[:, None]

    total = eigenvalues.sum()
    if total <= 0:
        logger.warning("Features have zero variance; keeping one component")
        k = 1
    else:
        cumulative = np.cumsum(eigenvalues) / total
        k = int(np.searchsorted(cumulative, variance_retained - VARIANCE_EPS, side="left")) + 1
        k = min(k, len(eigenvalues))

    logger.info(f"PCA: {features.shape[1]} features -> {k} components")
    return PcaModel(mean, eigenvectors[:k].copy(), eigenvalues, k)


@dataclass(frozen=True)
class SvmModel:
    classes: np.ndarray  # sorted class ids
    weights: np.ndarray  # (k, r)
    biases: np.ndarray  # (k,)
    C: float
    objective: float

    def decision_function(self, projected: np.ndarray) -> np.ndarray:
        return np.atleast_2d(projected) @ self.weights.T + self.biases

    def predict(self, projected: np.ndarray) -> np.ndarray:
        # argmax takes the first maximum: ties go to the lowest class id
        return self.classes[np.argmax(self.decision_function(projected), axis=1)]


def hinge_objective(weights: np.ndarray, biases: np.ndarray, X: np.ndarray, y: np.ndarray,
                    classes: np.ndarray, C: float) -> float:
    """Sum over one-vs-rest problems of 0.5 |w|^2 + C * sum(hinge)"""
    total = 0.0
    for k, cls in enumerate(classes):
        target = np.where(y == cls, 1.0, -1.0)
        margins = target * (X @ weights[k] + biases[k])
        total += 0.5 * float(weights[k] @ weights[k]) + C * float(np.maximum(0.0, 1.0 - margins).sum())
    return total


def fit_svm(
    projected: np.ndarray,
    labels: Sequence[int],
    C: float = 1.0,
    epochs: int = 1000,
    seed: int = 0,
) -> SvmModel:
    """
    One-vs-rest linear soft-margin SVM on the hinge loss.

    Each binary problem is solved by liblinear's dual coordinate descent with a
    fixed random_state, so training is deterministic.
    """
    X = np.atleast_2d(np.asarray(projected, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if X.shape[0] < 2 or X.shape[0] != y.shape[0]:
        raise DomainError(f"need n >= 2 samples with one label each, got {X.shape[0]} / {y.shape[0]}")
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise DomainError("SVM training needs at least two classes")
    if C <= 0:
        raise DomainError(f"C must be positive, got {C}")

    estimator = LinearSVC(
        loss="hinge", C=C, dual=True, multi_class="ovr", max_iter=epochs, random_state=seed
    )
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        estimator.fit(X, y)
    if any(issubclass(w.category, ConvergenceWarning) for w in caught):
        logger.warning(f"SVM did not fully converge in {epochs} iterations")

    weights = np.atleast_2d(estimator.coef_).astype(np.float64)
    biases = np.ravel(estimator.intercept_).astype(np.float64)
    if classes.shape[0] == 2:
        # liblinear solves a single problem for two classes (positive = classes[1])
        weights = np.vstack([-weights[0], weights[0]])
        biases = np.array([-biases[0], biases[0]])
    objective = hinge_objective(weights, biases, X, y, classes, C)
    logger.info(f"SVM: {len(classes)} classes, C={C}, objective {objective:.6g}")
    return SvmModel(classes, weights, biases, float(C), objective)


def confusion_matrix(actual: Sequence[int], predicted: Sequence[int], labels: Sequence[int]) -> np.ndarray:
    """Rows are actual classes, columns predicted classes"""
    index: Dict[int, int] = {int(label): i for i, label in enumerate(labels)}
    matrix = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for a, p in zip(actual, predicted):
        matrix[index[int(a)], index[int(p)]] += 1
    return matrix


def accuracy_from_confusion(matrix: np.ndarray) -> float:
    total = int(matrix.sum())
    if total == 0:
        raise DomainError("accuracy of an empty confusion matrix")
    return float(np.trace(matrix)) / total


def merge_labels(labels: Sequence[int], merged: Sequence[int] = UCI_STATIC_LABELS) -> np.ndarray:
    """Collapse the labels in `merged` onto the smallest of them"""
    target = min(merged)
    labels = np.asarray(labels, dtype=np.int64).copy()
    labels[np.isin(labels, list(merged))] = target
    return labels


def merged_accuracy(actual: Sequence[int], predicted: Sequence[int],
                    merged: Sequence[int] = UCI_STATIC_LABELS) -> float:
    a = merge_labels(actual, merged)
    p = merge_labels(predicted, merged)
    return float(np.mean(a == p))

