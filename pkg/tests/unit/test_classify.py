#!/usr/bin/env python3
"""
Unit tests for featurization, PCA, the linear SVM and accuracy helpers
"""
import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from modules.classify import (  # noqa: E402
    SvmModel,
    accuracy_from_confusion,
    confusion_matrix,
    featurize,
    featurize_many,
    fit_pca,
    fit_svm,
    merge_labels,
    merged_accuracy,
)
from modules.dataset import TimeSeries  # noqa: E402
from modules.dtw import DistanceKind, DtwParams, dtw_distance  # noqa: E402
from modules.errors import DomainError  # noqa: E402
from modules.templates import AveragingMethod, Template, TemplateProvenance  # noqa: E402


def _template(values, label):
    return Template(TimeSeries(values), label, AveragingMethod.DPA, TemplateProvenance(1, label, 0))


def test_featurize_against_templates():
    rng = np.random.default_rng(0)
    templates = [_template(rng.normal(size=(16, 2)), label) for label in (0, 0, 1)]
    sample = templates[1].series
    params = DtwParams(bw=3, dw=2)

    features = featurize(sample, templates, params, DistanceKind.DTW)
    assert features.shape == (3,)
    assert features[1] == 0.0
    assert features[0] == dtw_distance(sample, templates[0].series, 3)

    many = featurize_many([t.series for t in templates], templates, params, DistanceKind.DTWSUBSEQ, threads=3)
    assert many.shape == (3, 3)
    np.testing.assert_array_equal(np.diag(many), 0.0)
    assert list(np.argmin(many, axis=1)) == [0, 1, 2]


def test_featurize_rejects_mismatched_shapes():
    templates = [_template(np.zeros((8, 1)), 0)]
    with pytest.raises(DomainError):
        featurize(np.zeros((9, 1)), templates, DtwParams(bw=1, dw=1))
    with pytest.raises(DomainError):
        featurize(np.zeros((8, 1)), [], DtwParams(bw=1, dw=1))


def test_pca_components_and_retention():
    rng = np.random.default_rng(1)
    latent = rng.normal(size=(200, 2)) * [3.0, 1.5]
    mixing = np.linalg.qr(rng.normal(size=(4, 4)))[0][:2]
    features = latent @ mixing + 0.01 * rng.normal(size=(200, 4))

    pca = fit_pca(features, 0.95)
    assert pca.n_components == 2
    np.testing.assert_allclose(pca.components @ pca.components.T, np.eye(2), atol=1e-10)
    assert np.all(np.diff(pca.explained_variance) <= 1e-12)
    for row in pca.components:
        assert row[np.argmax(np.abs(row))] > 0

    full = fit_pca(features, 1.0)
    assert full.n_components == 4
    restored = full.inverse_transform(full.transform(features))
    np.testing.assert_allclose(restored, features, atol=1e-9)
    print("✅ PCA test passed")


def test_pca_retention_threshold_is_inclusive():
    """Exactly reaching the retained fraction is enough"""
    features = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]) * [np.sqrt(3.0), 1.0]
    pca = fit_pca(features, 0.75)
    assert pca.n_components == 1
    assert pca.explained_variance_ratio[0] == pytest.approx(0.75)


def test_pca_preconditions():
    with pytest.raises(DomainError):
        fit_pca(np.zeros((1, 3)))
    with pytest.raises(DomainError):
        fit_pca(np.zeros((5, 3)), 0.0)


def test_svm_separates_blobs():
    rng = np.random.default_rng(2)
    centres = np.array([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])
    X = np.vstack([c + rng.normal(size=(30, 2)) for c in centres])
    y = np.repeat([0, 1, 2], 30)

    svm = fit_svm(X, y, C=1.0, epochs=2000, seed=0)
    assert list(svm.classes) == [0, 1, 2]
    assert svm.weights.shape == (3, 2)
    assert np.mean(svm.predict(X) == y) > 0.95
    assert svm.objective > 0

    again = fit_svm(X, y, C=1.0, epochs=2000, seed=0)
    np.testing.assert_array_equal(svm.weights, again.weights)
    print("✅ SVM test passed")


def test_svm_binary_problem_has_one_row_per_class():
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(size=(20, 2)) - 3, rng.normal(size=(20, 2)) + 3])
    y = np.repeat([4, 7], 20)
    svm = fit_svm(X, y)
    assert list(svm.classes) == [4, 7]
    np.testing.assert_array_equal(svm.weights[0], -svm.weights[1])
    assert np.mean(svm.predict(X) == y) > 0.95


def test_svm_ties_go_to_lowest_class():
    svm = SvmModel(np.array([2, 5]), np.zeros((2, 1)), np.zeros(2), 1.0, 0.0)
    assert list(svm.predict(np.array([[1.0], [-1.0]]))) == [2, 2]


def test_svm_preconditions():
    X = np.zeros((4, 2))
    with pytest.raises(DomainError):
        fit_svm(X, [1, 1, 1, 1])
    with pytest.raises(DomainError):
        fit_svm(X, [0, 1, 0, 1], C=0.0)
    with pytest.raises(DomainError):
        fit_svm(X[:1], [0])


def test_confusion_and_accuracy():
    actual = [0, 0, 1, 2, 2, 2]
    predicted = [0, 1, 1, 2, 0, 2]
    matrix = confusion_matrix(actual, predicted, [0, 1, 2])
    np.testing.assert_array_equal(matrix, [[1, 1, 0], [0, 1, 0], [1, 0, 2]])
    assert matrix.sum() == len(actual)
    assert accuracy_from_confusion(matrix) == pytest.approx(4 / 6)
    with pytest.raises(DomainError):
        accuracy_from_confusion(np.zeros((2, 2)))


def test_merged_static_accuracy():
    actual = [0, 3, 4, 5, 1]
    predicted = [0, 4, 5, 3, 2]
    assert list(merge_labels(actual)) == [0, 3, 3, 3, 1]
    assert merged_accuracy(actual, predicted) == pytest.approx(4 / 5)
    assert merged_accuracy(actual, predicted) >= np.mean(np.array(actual) == np.array(predicted))


def test_svm_separable_toy_set():
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(size=(25, 2)) * 0.5 + 5, rng.normal(size=(25, 2)) * 0.5 - 5])
    y = np.repeat([0, 1], 25)
    svm = fit_svm(X, y, C=1.0, seed=0)
    assert np.mean(svm.predict(X) == y) == 1.0

    probe = np.stack(np.meshgrid(np.linspace(-8, 8, 9), np.linspace(-8, 8, 9)), axis=-1).reshape(-1, 2)
    np.testing.assert_array_equal(svm.predict(probe), fit_svm(X, y, C=1.0, seed=0).predict(probe))
