"""AUC, threshold metrics, the split and the cross-validation harness."""
import numpy as np
import pytest

from core.errors import SingleClass, TooFewSamples
from core.evaluation import (Metrics, accuracy, auc, confusion, cross_validate, roc_points,
                             stratified_holdout_then_kfold)
from core.linear import train_lasso_logistic


def pairwise_auc(scores, labels):
    """Count ordered positive/negative pairs directly."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.1, 0.9], [1, 0]) == 0.0
    assert auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == 0.5


def test_auc_matches_pairwise_count():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = int(rng.integers(2, 40))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        # coarse scores force ties
        scores = rng.integers(0, 6, n) / 5.0
        assert auc(scores, labels) == pytest.approx(pairwise_auc(scores, labels), abs=1e-12)


def test_auc_needs_both_classes():
    with pytest.raises(SingleClass):
        auc([0.2, 0.3], [1, 1])
    with pytest.raises(ValueError):
        auc([0.2, 0.3], [1, 2])


def test_accuracy_and_confusion():
    predictions = [1, 0, 1, 1, 0]
    labels = [1, 0, 0, 1, 1]
    assert accuracy(predictions, labels) == 0.6
    assert confusion(predictions, labels).tolist() == [[1, 1], [1, 2]]


def test_metrics_from_scores():
    metrics = Metrics.from_scores([0.9, 0.8, 0.3, 0.6], [1, 1, 0, 0])
    assert metrics.count == 4
    assert metrics.accuracy == 0.75
    assert metrics.sensitivity == 1.0
    assert metrics.specificity == 0.5
    assert metrics.auc == 1.0
    assert metrics.serialize()['confusion'] == [[1, 1], [0, 2]]


def test_roc_points():
    points = roc_points([0.9, 0.4, 0.4, 0.1], [1, 1, 0, 0])
    assert points == [(0.0, 0.0), (0.0, 0.5), (0.5, 1.0), (1.0, 1.0)]


def test_split_two_per_class():
    test, folds = stratified_holdout_then_kfold([1, 1, 0, 0], test_frac=0.0, k=2, seed=0)
    assert test.size == 0
    for fold in folds:
        assert sorted(np.array([1, 1, 0, 0])[fold].tolist()) == [0, 1]


def test_split_default_cohort_sizes():
    y = np.array([1] * 156 + [0] * 191)
    test, folds = stratified_holdout_then_kfold(y, 0.10, 5, seed=42)
    assert test.size == 35
    assert int(y[test].sum()) == 16
    everything = np.concatenate([test] + folds)
    assert sorted(everything.tolist()) == list(range(347))
    sizes = [fold.size for fold in folds]
    assert max(sizes) - min(sizes) <= 2
    for fold in folds:
        assert 28 <= int(y[fold].sum()) <= 29


def test_split_deterministic():
    y = np.array([0, 1] * 30)
    first = stratified_holdout_then_kfold(y, 0.2, 3, seed=5)
    second = stratified_holdout_then_kfold(y, 0.2, 3, seed=5)
    other = stratified_holdout_then_kfold(y, 0.2, 3, seed=6)
    assert first[0].tolist() == second[0].tolist()
    assert all(a.tolist() == b.tolist() for a, b in zip(first[1], second[1]))
    assert first[0].tolist() != other[0].tolist()


def test_split_errors():
    with pytest.raises(TooFewSamples):
        stratified_holdout_then_kfold([1, 0, 0, 0, 0, 0], test_frac=0.0, k=2)
    with pytest.raises(ValueError):
        stratified_holdout_then_kfold([1, 0] * 5, k=1)
    with pytest.raises(ValueError):
        stratified_holdout_then_kfold([1, 0] * 5, test_frac=1.0)


def test_cross_validate():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(100, 3))
    y = (X[:, 0] > 0).astype(int)
    y[:2] = [0, 1]
    report, final = cross_validate('lasso', X, y,
                                   lambda a, b: train_lasso_logistic(a, b, lam=0.01),
                                   test_frac=0.1, k=5, seed=1)
    assert len(report.folds) == 5
    assert report.cv.count + report.holdout.count == 100
    assert report.cv.auc >= 0.9
    assert report.roc[0] == (0.0, 0.0) and report.roc[-1] == (1.0, 1.0)
    assert final.kind == 'lasso_logistic'
    assert report.serialize()['holdout']['count'] == report.holdout.count
