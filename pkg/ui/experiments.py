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

"""Radiomics and CNN studies on a cohort: data assembly, training and scoring."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from core.errors import FibrosisError, ShapeMismatch
from core.evaluation import Metrics, cross_validate, stratified_holdout_then_kfold
from core.gradcam import dilate_lesion, gradcam, localisation_score
from core.linear import train_lasso_logistic, train_linear_svm, zscore_fit_apply
from core.network import preset
from core.radiomics import extract_all
from core.slices import extract_slices, majority_vote
from core.training import train
from core.trees import train_gbt, train_random_forest
from core.volume_io import load_mask, load_volume

log = logging.getLogger(__name__)

RADIOMICS_MODELS = ('lasso', 'svm', 'random_forest', 'gbt')


def model_fitters(config):
    """name -> fit(X_raw, y) for the four classical models."""
    models = config.models

    def lasso(X, y):
        Z, norm = zscore_fit_apply(X)
        return train_lasso_logistic(Z, y, normalization=norm, **models['lasso'])

    def svm(X, y):
        Z, norm = zscore_fit_apply(X)
        return train_linear_svm(Z, y, normalization=norm, **models['svm'])

    def forest(X, y):
        Z, norm = zscore_fit_apply(X)
        return train_random_forest(Z, y, seed=config.seed, normalization=norm,
                                   **models['forest'])

    def gbt(X, y):
        Z, norm = zscore_fit_apply(X)
        return train_gbt(Z, y, seed=config.seed, normalization=norm, **models['gbt'])

    return {'lasso': lasso, 'svm': svm, 'random_forest': forest, 'gbt': gbt}


def radiomics_study(table, config):
    """Cross-validate every classical model; return (EvalReports, final models)."""
    fitters = model_fitters(config)
    reports, finals = [], {}
    for name in RADIOMICS_MODELS:
        report, final = cross_validate(name, table.matrix, table.labels, fitters[name],
                                       config.split.test_frac, config.split.k, config.seed)
        if name == 'lasso':
            report.extra['selected_features'] = final.selected(table.names)
        reports.append(report)
        finals[name] = final
    return reports, finals


def _extract_case(task):
    """Features of one manifest row; runs in worker processes."""
    case_id, volume_path, roi_path, settings = task
    try:
        vector = extract_all(load_volume(volume_path), load_mask(roi_path), settings)
    except FibrosisError as exc:
        return case_id, None, f'{type(exc).__name__}: {exc}'
    except Exception as exc:    # pylint: disable=broad-exception-caught
        log.exception('Unexpected failure while extracting %s', case_id)
        return case_id, None, f'{type(exc).__name__}: {exc}'
    return case_id, vector, None


def extract_cases(manifest, rows, settings, jobs=1):
    """Extract rows of a manifest; returns {case_id: (vector or None, error or None)}."""
    tasks = [(row.case_id, manifest.path(row, 'volume'), manifest.path(row, 'roi'), settings)
             for row in rows]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_extract_case, tasks))
    else:
        results = [_extract_case(task) for task in tasks]
    for case_id, _, error in results:
        if error:
            log.warning('Extraction failed for %s: %s', case_id, error)
    return {case_id: (vector, error) for case_id, vector, error in results}


@dataclass
class SliceDataset():
    """Slices of a cohort with the patient each one came from."""

    images: np.ndarray
    patients: np.ndarray
    labels: np.ndarray
    indices: list

    def rows(self, patients):
        """Slice rows belonging to the given patients."""
        return np.flatnonzero(np.isin(self.patients, patients))


def slice_dataset(manifest, k, side):
    """Extract the k most covered slices of every case."""
    images, patients, labels, indices = [], [], [], []
    for p, row in enumerate(manifest.rows):
        roi = load_mask(manifest.path(row, 'roi'))
        for item in extract_slices(load_volume(manifest.path(row, 'volume')), roi, k, side):
            images.append(item.image)
            patients.append(p)
            labels.append(row.label)
            indices.append(item.index)
    log.info('Extracted %d slices from %d cases', len(images), len(manifest.rows))
    return SliceDataset(np.array(images), np.array(patients, dtype=np.int64),
                        np.array(labels, dtype=np.int64), indices)


def patient_scores(checkpoint, dataset, patients):
    """Per patient: (mean positive probability, majority vote of slice labels)."""
    scores, votes = [], []
    for p in patients:
        rows = dataset.rows([p])
        probs = checkpoint.predict_proba(dataset.images[rows])
        scores.append(float(probs.mean()))
        votes.append(majority_vote((probs >= 0.5).astype(int).tolist()))
    return np.array(scores), np.array(votes, dtype=np.int64)


def _fit_preset(name, dataset, patients, config):
    rows = dataset.rows(patients)
    spec = preset(name, config.cnn.input_side)
    return train(dataset.images[rows], dataset.labels[rows], spec, config.train_config())


def cnn_study(manifest, dataset, presets, config, cross_validation=False):
    # pylint: disable=too-many-locals
    """Train every preset on the development patients and score the held-out ones.

    Splits are by patient.  Returns (EvalReport-like dicts, checkpoints).
    """
    labels = manifest.labels()
    test, folds = stratified_holdout_then_kfold(labels, config.split.test_frac,
                                                config.split.k, config.seed)
    development = np.sort(np.concatenate(folds))
    if np.intersect1d(dataset.patients[dataset.rows(test)],
                      dataset.patients[dataset.rows(development)]).size:
        raise ShapeMismatch('a patient contributes slices to both train and test')
    evaluations, checkpoints = [], {}
    for name in presets:
        record = {'model': name, 'seed': config.seed, 'folds': [], 'cv': None,
                  'holdout': None}
        if cross_validation:
            pooled, pooled_votes = np.zeros(len(labels)), np.zeros(len(labels), dtype=np.int64)
            for i, fold in enumerate(folds):
                train_patients = np.sort(np.concatenate(
                    [f for j, f in enumerate(folds) if j != i]))
                ckpt = _fit_preset(name, dataset, train_patients, config)
                pooled[fold], pooled_votes[fold] = patient_scores(ckpt, dataset, fold)
                record['folds'].append(Metrics.from_scores(
                    pooled[fold], labels[fold], pooled_votes[fold]).serialize())
            record['cv'] = Metrics.from_scores(pooled[development], labels[development],
                                               pooled_votes[development]).serialize()
        ckpt = _fit_preset(name, dataset, development, config)
        checkpoints[name] = ckpt
        if test.size and len(np.unique(labels[test])) == 2:
            scores, votes = patient_scores(ckpt, dataset, test)
            record['holdout'] = Metrics.from_scores(scores, labels[test], votes).serialize()
            log.info('%s: held-out patient accuracy %.4f auc %.4f', name,
                     record['holdout']['accuracy'], record['holdout']['auc'])
        record['curve'] = ckpt.curve
        evaluations.append(record)
    return evaluations, checkpoints


@dataclass
class SliceHeatmap():
    """Grad-CAM output of one slice."""

    index: int
    image: np.ndarray
    heatmap: object
    score: object


def gradcam_case(checkpoint, manifest, row, config):
    """Heatmaps and lesion localisation scores of every selected slice of a case."""
    side = checkpoint.spec.input_shape[1]
    volume = load_volume(manifest.path(row, 'volume'))
    roi = load_mask(manifest.path(row, 'roi'))
    lesion = load_mask(manifest.path(row, 'lesion'))
    dilated = dilate_lesion(lesion, config.gradcam.dilation)
    results = []
    for item in extract_slices(volume, roi, config.cnn.slices_per_case, side):
        heatmap = gradcam(checkpoint, item.image, config.gradcam.target_class)
        inside = item.crop(dilated[:, :, item.index].astype(np.float64), order=0) > 0.5
        score = localisation_score(heatmap, inside, config.gradcam.top_fraction) \
            if row.label == 1 else None
        results.append(SliceHeatmap(item.index, item.image, heatmap, score))
    return results
