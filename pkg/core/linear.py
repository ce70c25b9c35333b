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

"""Z-score normalisation, L1 logistic regression and the linear SVM."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from core.errors import ConvergenceError, NonFiniteLoss, SingleClass

log = logging.getLogger(__name__)

SD_EPS = 1e-12
STOP_CHANGE = 1e-8
MAX_HALVINGS = 60


@dataclass(eq=False)
class Normalization():
    """Per-column training mean and population sd."""

    mean: np.ndarray
    sd: np.ndarray

    def apply(self, X):
        """Normalise X with the stored parameters."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.mean.size:
            raise ValueError(f'expected {self.mean.size} columns, got shape {X.shape}')
        scale = np.where(self.sd >= SD_EPS, self.sd, 1.0)
        return np.where(self.sd >= SD_EPS, (X - self.mean) / scale, 0.0)

    def serialize(self):
        """Plain dict form."""
        return {'mean': self.mean.tolist(), 'sd': self.sd.tolist()}

    @classmethod
    def parse(cls, values):
        """Build from the dict form."""
        return cls(np.asarray(values['mean'], dtype=np.float64),
                   np.asarray(values['sd'], dtype=np.float64))


def zscore_fit_apply(X):
    """Fit column-wise z-scoring on X and return (normalised X, Normalization)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f'need an n x p matrix with n >= 2, got shape {X.shape}')
    norm = Normalization(X.mean(axis=0), X.std(axis=0))
    return norm.apply(X), norm


def soft_threshold(x, t):
    """sign(x) * max(|x| - t, 0), elementwise."""
    if np.any(np.asarray(t) < 0):
        raise ValueError('threshold must be >= 0')
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _check_labels(y):
    y = np.asarray(y, dtype=np.float64)
    if len(np.unique(y)) < 2:
        raise SingleClass('training needs both classes')
    return y


@dataclass(eq=False)
class LinearModel():
    """Weights, intercept and the training normalisation of a linear classifier."""

    kind: str
    weights: np.ndarray
    intercept: float
    normalization: Normalization
    hyperparameters: dict = field(default_factory=dict)
    curve: list = field(default_factory=list)

    def decision_function(self, X):
        """Raw margin w.x + b on unnormalised rows."""
        return self.normalization.apply(X) @ self.weights + self.intercept

    def predict_proba(self, X):
        """Probability of the positive class (logistic of the margin)."""
        return expit(self.decision_function(X))

    def predict(self, X):
        """Hard labels."""
        return (self.decision_function(X) >= 0.0).astype(np.int64)

    def selected(self, names):
        """Names of features with a nonzero weight."""
        return [name for name, w in zip(names, self.weights) if w != 0.0]

    def parameters(self):
        """Parameter dict of the model envelope."""
        return {'weights': self.weights.tolist(), 'intercept': self.intercept}

    @classmethod
    def from_parameters(cls, kind, hyperparameters, normalization, parameters):
        """Inverse of parameters()."""
        return cls(kind, np.asarray(parameters['weights'], dtype=np.float64),
                   float(parameters['intercept']), normalization, hyperparameters)


def logistic_loss(X, y, w, b):
    """Mean logistic loss."""
    z = X @ w + b
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def train_lasso_logistic(X, y, lam=0.01, iters=2000, step=1.0, normalization=None):
    # pylint: disable=too-many-locals
    """L1-penalised logistic regression by proximal gradient with backtracking.

    X must already be normalised; ``normalization`` is stored for inference.
    The intercept is unpenalised and starts at the prior log-odds.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_labels(y)
    if lam < 0 or step <= 0:
        raise ValueError('lam must be >= 0 and step > 0')
    n, p = X.shape
    prior = float(y.mean())
    w = np.zeros(p)
    b = math.log(prior / (1.0 - prior))
    t = step
    smooth = logistic_loss(X, y, w, b)
    objective = smooth
    curve = [objective]
    for it in range(iters):
        r = expit(X @ w + b) - y
        gw, gb = X.T @ r / n, float(r.mean())
        for _ in range(MAX_HALVINGS):
            w_new = soft_threshold(w - t * gw, t * lam)
            b_new = b - t * gb
            dw, db = w_new - w, b_new - b
            smooth_new = logistic_loss(X, y, w_new, b_new)
            bound = smooth + gw @ dw + gb * db + (dw @ dw + db * db) / (2.0 * t)
            if smooth_new <= bound + 1e-15:
                break
            t *= 0.5
        else:
            raise ConvergenceError(f'lasso: no sufficient decrease at iteration {it}')
        objective_new = smooth_new + lam * float(np.abs(w_new).sum())
        if not math.isfinite(objective_new):
            raise NonFiniteLoss(f'lasso: objective became {objective_new} at iteration {it}')
        if objective_new > objective + 1e-12 * max(1.0, abs(objective)):
            raise ConvergenceError(f'lasso: objective rose from {objective} to {objective_new} '
                                   f'at iteration {it}')
        change = max(float(np.abs(dw).max(initial=0.0)), abs(db))
        w, b, smooth, objective = w_new, b_new, smooth_new, objective_new
        curve.append(objective)
        if change < STOP_CHANGE:
            log.debug('lasso converged after %d iterations', it + 1)
            break
    log.debug('lasso lam=%g: %d of %d weights nonzero, objective %.6g',
              lam, int(np.count_nonzero(w)), p, objective)
    return LinearModel('lasso_logistic', w, float(b), normalization or _identity(p),
                       {'lam': lam, 'iters': iters, 'step': step}, curve)


def svm_objective(X, s, w, b, C):
    """Primal objective 0.5 |w|^2 + C sum hinge, labels s in {-1, +1}."""
    margins = s * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


def train_linear_svm(X, y, C=1.0, epochs=500, normalization=None):
    """Full-batch Pegasos subgradient descent, returning the best iterate.

    The scaled objective lam/2 |w|^2 + mean hinge with lam = 1/(C n) has the
    same minimiser as the primal.  Step 1/(lam t); w is projected onto the
    ball of radius 1/sqrt(lam).
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_labels(y)
    if C <= 0 or epochs < 1:
        raise ValueError('C must be > 0 and epochs >= 1')
    n, p = X.shape
    s = 2.0 * y - 1.0
    lam = 1.0 / (C * n)
    radius = 1.0 / math.sqrt(lam)
    w, b = np.zeros(p), 0.0
    best = (svm_objective(X, s, w, b, C), w.copy(), b)
    curve = [best[0]]
    for t in range(1, epochs + 1):
        eta = 1.0 / (lam * t)
        active = s * (X @ w + b) < 1.0
        gw = lam * w - (s[active] @ X[active]) / n
        gb = -float(s[active].sum()) / n
        w = w - eta * gw
        b = b - eta * gb
        norm = float(np.linalg.norm(w))
        if norm > radius:
            w *= radius / norm
        objective = svm_objective(X, s, w, b, C)
        if not math.isfinite(objective):
            raise NonFiniteLoss(f'svm: objective became {objective} at epoch {t}')
        curve.append(objective)
        if objective < best[0]:
            best = (objective, w.copy(), b)
    log.debug('svm C=%g: best objective %.6g', C, best[0])
    return LinearModel('linear_svm', best[1], float(best[2]), normalization or _identity(p),
                       {'C': C, 'epochs': epochs}, curve)


def _identity(p):
    return Normalization(np.zeros(p), np.ones(p))
