#!/usr/bin/env python3
# -*- coding: utf-8 -*-

# Fibrosis-Risk-Toolkit
# Copyright (C) 2026  Fibrosis-Risk-Toolkit contributors
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <http://www.gnu.org/licenses/>.

"""Metrics, the stratified holdout + k-fold split and the cross-validation harness."""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from core.errors import SingleClass, TooFewSamples
from core.volume_io import round_half_away

log = logging.getLogger(__name__)


def _binary(labels):
    labels = np.asarray(labels)
    if not np.isin(labels, (0, 1)).all():
        raise ValueError('labels must be 0 or 1')
    return labels.astype(np.int64)


def auc(scores, labels):
    """Mann-Whitney AUC; tied pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _binary(labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass('AUC needs both classes')
    ranks = rankdata(scores, method='average')
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(predictions, labels):
    """Fraction of equal entries."""
    predictions, labels = _binary(predictions), _binary(labels)
    return float((predictions == labels).mean())


def confusion(predictions, labels):
    """[[tn, fp], [fn, tp]]."""
    predictions, labels = _binary(predictions), _binary(labels)
    matrix = np.zeros((2, 2), dtype=np.int64)
    np.add.at(matrix, (labels, predictions), 1)
    return matrix


def roc_points(scores, labels):
    """(fpr, tpr) pairs for thresholds at every distinct score, descending."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = _binary(labels)
    n_pos, n_neg = int(labels.sum()), int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass('ROC needs both classes')
    points = [(0.0, 0.0)]
    for threshold in np.unique(scores)[::-1]:
        predicted = scores >= threshold
        points.append((float((predicted & (labels == 0)).sum() / n_neg),
                       float((predicted & (labels == 1)).sum() / n_pos)))
    return points


@dataclass
class Metrics():
    """Threshold metrics and AUC of one evaluated set."""

    count: int
    accuracy: float
    auc: float
    sensitivity: float
    specificity: float
    confusion: list

    @classmethod
    def from_scores(cls, scores, labels, predictions=None, threshold=0.5):
        """Evaluate probability scores, optionally with explicit hard predictions."""
        scores = np.asarray(scores, dtype=np.float64)
        labels = _binary(labels)
        if predictions is None:
            predictions = (scores >= threshold).astype(np.int64)
        matrix = confusion(predictions, labels)
        (tn, fp), (fn, tp) = matrix.tolist()
        return cls(int(labels.size), accuracy(predictions, labels), auc(scores, labels),
                   tp / (tp + fn), tn / (tn + fp), matrix.tolist())

    def serialize(self):
        """Plain dict form."""
        return {'count': self.count, 'accuracy': self.accuracy, 'auc': self.auc,
                'sensitivity': self.sensitivity, 'specificity': self.specificity,
                'confusion': self.confusion}


def stratified_holdout_then_kfold(y, test_frac=0.10, k=5, seed=0):
    """Return (test indices, list of k fold index arrays).

    Classes are processed as 0 then 1 with one seeded generator: each class is
    shuffled, its first round(test_frac * n_class) indices go to the test set
    and the rest are dealt round-robin into the folds.  Every class must keep
    at least k members after the holdout.
    """
    y = _binary(y)
    if k < 2:
        raise ValueError(f'k must be >= 2, got {k}')
    if not 0.0 <= test_frac < 1.0:
        raise ValueError(f'test_frac must lie in [0, 1), got {test_frac}')
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    test, folds = [], [[] for _ in range(k)]
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        n_test = int(round_half_away(test_frac * members.size))
        if members.size - n_test < k:
            raise TooFewSamples(f'class {cls} has {members.size} members, {n_test} held out; '
                                f'{k} folds need at least {k} remaining')
        shuffled = rng.permutation(members)
        test.extend(shuffled[:n_test].tolist())
        for j, index in enumerate(shuffled[n_test:].tolist()):
            folds[j % k].append(index)
    return np.array(sorted(test), dtype=np.int64), [np.array(sorted(f), dtype=np.int64)
                                                     for f in folds]


@dataclass
class EvalReport():
    """Per-fold, pooled cross-validated and held-out metrics of one model."""

    model: str
    seed: int
    folds: list = field(default_factory=list)
    cv: Metrics = None
    holdout: Metrics = None
    roc: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def serialize(self):
        """Plain dict form."""
        return {'model': self.model, 'seed': self.seed,
                'folds': [m.serialize() for m in self.folds],
                'cv': self.cv.serialize() if self.cv else None,
                'holdout': self.holdout.serialize() if self.holdout else None,
                'roc': [list(p) for p in self.roc], 'extra': self.extra}


def cross_validate(name, X, y, fit, test_frac=0.10, k=5, seed=0):
    """Run the holdout + k-fold protocol with ``fit(X_train, y_train) -> model``.

    Out-of-fold probabilities are pooled for the cross-validated metrics; the
    held-out set is scored by a model refit on all non-test rows.  Returns
    (EvalReport, final model).
    """
    X = np.asarray(X, dtype=np.float64)
    y = _binary(y)
    test, folds = stratified_holdout_then_kfold(y, test_frac, k, seed)
    pooled = np.zeros(len(y))
    report = EvalReport(name, seed)
    development = np.concatenate(folds)
    for i, fold in enumerate(folds):
        train = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        model = fit(X[train], y[train])
        pooled[fold] = model.predict_proba(X[fold])
        report.folds.append(Metrics.from_scores(pooled[fold], y[fold]))
        log.debug('%s fold %d: acc %.4f auc %.4f', name, i, report.folds[-1].accuracy,
                  report.folds[-1].auc)
    report.cv = Metrics.from_scores(pooled[development], y[development])
    report.roc = roc_points(pooled[development], y[development])
    final = fit(X[np.sort(development)], y[np.sort(development)])
    if test.size and len(np.unique(y[test])) == 2:
        report.holdout = Metrics.from_scores(final.predict_proba(X[test]), y[test])
    log.info('%s: cv acc %.4f auc %.4f', name, report.cv.accuracy, report.cv.auc)
    return report, final
