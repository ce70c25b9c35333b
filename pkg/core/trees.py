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

"""Axis-aligned decision trees, random forest and gradient boosting.

Split ties go to the lowest feature index, then the lowest threshold.
Per-tree and per-round generators are seeded with mix_seed(seed, index).
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from core.errors import SingleClass
from core.linear import Normalization
from core.phantom import mix_seed

log = logging.getLogger(__name__)

GAIN_EPS = 1e-12
HESSIAN_EPS = 1e-12


def gini(counts):
    """Gini impurity 1 - sum (c_k / n)^2 of class counts."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0 or (counts < 0).any():
        raise ValueError(f'counts must be nonnegative with a positive sum, got {counts}')
    return float(1.0 - ((counts / total) ** 2).sum())


@dataclass
class Tree():
    """Flat node arrays; feature -1 marks a leaf."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add_node(self, value):
        """Append a leaf and return its index."""
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    def depth(self, node=0):
        """Depth of the subtree under node; a lone leaf has depth 0."""
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def predict(self, X):
        """Leaf value reached by every row of X."""
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        value = np.asarray(self.value)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            internal = feature[node] >= 0
            if not internal.any():
                return value[node]
            f = np.where(internal, feature[node], 0)
            go_left = X[rows, f] <= threshold[node]
            node = np.where(internal, np.where(go_left, left[node], right[node]), node)

    def serialize(self):
        """Plain dict form."""
        return {'feature': list(self.feature), 'threshold': list(self.threshold),
                'left': list(self.left), 'right': list(self.right), 'value': list(self.value)}

    @classmethod
    def parse(cls, values):
        """Build from the dict form."""
        return cls([int(v) for v in values['feature']],
                   [float(v) for v in values['threshold']],
                   [int(v) for v in values['left']], [int(v) for v in values['right']],
                   [float(v) for v in values['value']])


def _gini_gains(target, cut):
    """Impurity decrease of splitting sorted labels after every index in cut."""
    n = len(target)
    positives = np.cumsum(target)
    n_left = cut + 1.0
    n_right = n - n_left
    p_left = positives[cut] / n_left
    p_right = (positives[-1] - positives[cut]) / n_right
    p = positives[-1] / n
    parent = 2.0 * p * (1.0 - p)
    children = (n_left * 2.0 * p_left * (1.0 - p_left) +
                n_right * 2.0 * p_right * (1.0 - p_right)) / n
    return parent - children


def _variance_gains(target, cut):
    """Squared-error decrease of splitting sorted residuals after every index in cut."""
    n = len(target)
    sums = np.cumsum(target)
    n_left = cut + 1.0
    s_left = sums[cut]
    s_right = sums[-1] - s_left
    return s_left ** 2 / n_left + s_right ** 2 / (n - n_left) - sums[-1] ** 2 / n


def best_split(X, rows, features, target, gains_fn):
    """Return (gain, feature, threshold) of the best split, or None."""
    best = None
    for f in features:
        values = X[rows, f]
        order = np.argsort(values, kind='stable')
        xs, ts = values[order], target[rows][order]
        cut = np.flatnonzero(xs[1:] > xs[:-1])
        if cut.size == 0:
            continue
        gains = gains_fn(ts, cut)
        i = int(np.argmax(gains))
        if gains[i] > GAIN_EPS and (best is None or gains[i] > best[0]):
            best = (float(gains[i]), int(f), float(0.5 * (xs[cut[i]] + xs[cut[i] + 1])))
    return best


class TreeBuilder():
    """Grow one tree depth first.

    ``features_fn(rng)`` returns the candidate features of a node, ``leaf_fn(rows)``
    the value of a leaf and ``gains_fn`` scores candidate cuts.
    """

    def __init__(self, X, target, max_depth, gains_fn, leaf_fn, features_fn=None, rng=None):
        """Initialize."""
        self.X = X
        self.target = target
        self.max_depth = max_depth
        self.gains_fn = gains_fn
        self.leaf_fn = leaf_fn
        self.features_fn = features_fn
        self.rng = rng
        self.tree = Tree()

    def _split(self, rows):
        p = self.X.shape[1]
        if self.features_fn is None:
            return best_split(self.X, rows, range(p), self.target, self.gains_fn)
        sampled = self.features_fn(self.rng)
        found = best_split(self.X, rows, sampled, self.target, self.gains_fn)
        if found is None:
            rest = np.setdiff1d(np.arange(p), sampled)
            found = best_split(self.X, rows, rest, self.target, self.gains_fn)
        return found

    def grow(self, rows, depth=0):
        """Grow the subtree for rows and return its node index."""
        node = self.tree.add_node(self.leaf_fn(rows))
        if depth >= self.max_depth or len(rows) < 2:
            return node
        found = self._split(rows)
        if found is None:
            return node
        _, f, threshold = found
        go_left = self.X[rows, f] <= threshold
        self.tree.feature[node] = f
        self.tree.threshold[node] = threshold
        self.tree.left[node] = self.grow(rows[go_left], depth + 1)
        self.tree.right[node] = self.grow(rows[~go_left], depth + 1)
        return node

    def build(self, rows):
        """Grow from the root."""
        self.grow(np.asarray(rows, dtype=np.int64))
        return self.tree


def _prepare(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(np.unique(y)) < 2:
        raise SingleClass('training needs both classes')
    return X, y


@dataclass(eq=False)
class ForestModel():
    """Bagged Gini trees; probability = mean leaf frequency."""

    trees: list
    normalization: Normalization
    hyperparameters: dict = field(default_factory=dict)
    kind: str = 'random_forest'

    def predict_proba(self, X):
        """Mean positive-class frequency over the trees."""
        Z = self.normalization.apply(X)
        return np.mean([tree.predict(Z) for tree in self.trees], axis=0)

    def predict(self, X):
        """Hard labels."""
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def parameters(self):
        """Parameter dict of the model envelope."""
        return {'trees': [tree.serialize() for tree in self.trees]}

    @classmethod
    def from_parameters(cls, kind, hyperparameters, normalization, parameters):
        """Inverse of parameters()."""
        return cls([Tree.parse(t) for t in parameters['trees']], normalization,
                   hyperparameters, kind)


def train_random_forest(X, y, trees=100, max_depth=6, mtry=None, seed=0, normalization=None):
    """Bootstrap Gini trees with seeded feature subsampling per node."""
    X, y = _prepare(X, y)
    n, p = X.shape
    mtry = max(1, int(math.floor(math.sqrt(p)))) if mtry is None else min(int(mtry), p)

    def features_fn(rng):
        return np.sort(rng.choice(p, size=mtry, replace=False))

    def leaf_fn(rows):
        return float(y[rows].mean())

    forest = []
    for t in range(trees):
        rng = np.random.Generator(np.random.PCG64(mix_seed(seed, t)))
        rows = rng.integers(0, n, size=n)
        builder = TreeBuilder(X, y, max_depth, _gini_gains, leaf_fn, features_fn, rng)
        forest.append(builder.build(rows))
    log.debug('forest: %d trees, mtry %d, max depth %d', trees, mtry, max_depth)
    return ForestModel(forest, normalization or Normalization(np.zeros(p), np.ones(p)),
                       {'trees': trees, 'max_depth': max_depth, 'mtry': mtry, 'seed': seed})


@dataclass(eq=False)
class BoostModel():
    """Gradient-boosted regression trees on the logistic loss."""

    prior: float
    nu: float
    trees: list
    normalization: Normalization
    hyperparameters: dict = field(default_factory=dict)
    curve: list = field(default_factory=list)
    kind: str = 'gbt'

    def decision_function(self, X):
        """Additive score F(x)."""
        Z = self.normalization.apply(X)
        score = np.full(len(Z), self.prior)
        for tree in self.trees:
            score += self.nu * tree.predict(Z)
        return score

    def predict_proba(self, X):
        """Logistic of the additive score."""
        return expit(self.decision_function(X))

    def predict(self, X):
        """Hard labels."""
        return (self.decision_function(X) >= 0.0).astype(np.int64)

    def parameters(self):
        """Parameter dict of the model envelope."""
        return {'prior': self.prior, 'trees': [tree.serialize() for tree in self.trees]}

    @classmethod
    def from_parameters(cls, kind, hyperparameters, normalization, parameters):
        """Inverse of parameters()."""
        return cls(float(parameters['prior']), float(hyperparameters['nu']),
                   [Tree.parse(t) for t in parameters['trees']], normalization,
                   hyperparameters, kind=kind)


def _mean_logistic_loss(y, score):
    return float(np.mean(np.logaddexp(0.0, score) - y * score))


def train_gbt(X, y, trees=200, depth=2, nu=0.1, subsample=1.0, seed=0, normalization=None):
    # pylint: disable=too-many-locals
    """Newton-leaf gradient boosting starting from the prior log-odds."""
    X, y = _prepare(X, y)
    n, p = X.shape
    if not 0.0 < subsample <= 1.0:
        raise ValueError(f'subsample must lie in (0, 1], got {subsample}')
    prior = float(y.mean())
    prior = math.log(prior / (1.0 - prior))
    score = np.full(n, prior)
    ensemble = []
    curve = [_mean_logistic_loss(y, score)]
    for m in range(trees):
        prob = expit(score)
        residual = y - prob
        hessian = prob * (1.0 - prob)

        def leaf_fn(rows, residual=residual, hessian=hessian):
            return float(residual[rows].sum() / max(float(hessian[rows].sum()), HESSIAN_EPS))

        if subsample < 1.0:
            rng = np.random.Generator(np.random.PCG64(mix_seed(seed, m)))
            rows = np.sort(rng.choice(n, size=max(2, int(round(subsample * n))), replace=False))
        else:
            rows = np.arange(n)
        tree = TreeBuilder(X, residual, depth, _variance_gains, leaf_fn).build(rows)
        ensemble.append(tree)
        score = score + nu * tree.predict(X)
        curve.append(_mean_logistic_loss(y, score))
    log.debug('gbt: %d rounds, loss %.6g -> %.6g', trees, curve[0], curve[-1])
    return BoostModel(prior, nu, ensemble,
                      normalization or Normalization(np.zeros(p), np.ones(p)),
                      {'trees': trees, 'depth': depth, 'nu': nu, 'subsample': subsample,
                       'seed': seed}, curve)
