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

"""Subcommand implementations working inside one run directory.

Run directory layout::

    config.yaml
    cohort/manifest.csv, cohort/{volume,roi,lesion}/<case>.nii
    features.csv, features.failures.json
    models/<model>.json
    checkpoints/<preset>.json
    heatmaps/<case>_z<slice>.pgm, heatmaps/<case>_z<slice>_overlay.pgm
    reports/<name>.json, reports/<name>.md, reports/<name>.timings.json
"""
import logging
import time
from pathlib import Path

from core.errors import DataError, SchemaError, UsageError
from core.model_io import save_model
from core.phantom import generate_cohort, read_manifest
from core.radiomics import (FEATURE_NAMES, feature_header, format_feature_row,
                            read_feature_csv)
from core.storage import write_bytes_atomic, write_json_atomic, write_text_atomic
from core.training import load_checkpoint, save_checkpoint
from core.volume_io import write_overlay_pgm, write_pgm
from ui import experiments
from ui.reports import ExperimentReport, summary_markdown

log = logging.getLogger(__name__)


class RunDirectory():
    """Paths inside the output directory of a run."""

    def __init__(self, root):
        """Initialize."""
        self.root = Path(root)

    @property
    def manifest(self):
        """Default cohort manifest."""
        return self.root / 'cohort' / 'manifest.csv'

    @property
    def features(self):
        """Feature table."""
        return self.root / 'features.csv'

    @property
    def failures(self):
        """Extraction failure record."""
        return self.root / 'features.failures.json'

    @property
    def reports(self):
        """Report directory."""
        return self.root / 'reports'

    def model(self, name):
        """Model file of a classical model."""
        return self.root / 'models' / f'{name}.json'

    def checkpoint(self, name):
        """Checkpoint file of a preset."""
        return self.root / 'checkpoints' / f'{name}.json'

    def relative(self, path):
        """Path relative to the run root, as text."""
        return Path(path).resolve().relative_to(self.root.resolve()).as_posix()

    def echo_config(self, config):
        """Write the effective configuration."""
        write_text_atomic(self.root / 'config.yaml', config.to_yaml())


class Stopwatch():
    """Wall-clock time per stage."""

    def __init__(self):
        """Initialize."""
        self.stages = {}
        self._start = None
        self._name = None

    def start(self, name):
        """Start timing a stage, closing the previous one."""
        self.stop()
        self._name, self._start = name, time.perf_counter()

    def stop(self):
        """Close the running stage."""
        if self._name is not None:
            self.stages[self._name] = time.perf_counter() - self._start
            self._name = None
        return self.stages


def cmd_phantom(config, args):
    """Generate the phantom cohort into <out>/cohort."""
    run = RunDirectory(config.out)
    if run.manifest.exists() and not args.force:
        raise UsageError(f'{run.manifest} exists; pass --force to overwrite')
    run.echo_config(config)
    manifest = generate_cohort(config.n, config.prevalence, config.phantom, config.seed,
                               run.manifest.parent, config.jobs)
    positives = int(manifest.labels().sum())
    print(f'{len(manifest.rows)} cases, {positives} positive -> {run.manifest}')
    return 0


def cmd_extract(config, args):
    """Extract radiomic features of every manifest case into features.csv."""
    run = RunDirectory(config.out)
    manifest = read_manifest(args.manifest or run.manifest)
    known = {}
    if args.resume and run.features.exists():
        table = read_feature_csv(run.features)
        known = {case_id: table.row_text(i) for i, case_id in enumerate(table.case_ids)}
        log.info('Resuming: %d of %d cases already extracted', len(known), len(manifest.rows))
    todo = [row for row in manifest.rows if row.case_id not in known]
    results = experiments.extract_cases(manifest, todo, config.radiomics, config.jobs)

    lines, failures = [feature_header()], {}
    for row in manifest.rows:
        if row.case_id in known:
            lines.append(known[row.case_id])
            continue
        vector, error = results[row.case_id]
        if error:
            failures[row.case_id] = error
        else:
            lines.append(format_feature_row(row.case_id, row.label, vector.values))
    write_text_atomic(run.features, '\n'.join(lines) + '\n')
    write_json_atomic(run.failures, {'failed': failures})
    run.echo_config(config)
    print(f'{len(lines) - 1} rows x {len(FEATURE_NAMES) + 2} columns -> {run.features}')
    if failures:
        raise DataError(f'{len(failures)} case(s) failed: {", ".join(sorted(failures))}')
    return 0


def cmd_train_radiomics(config, args):
    """Cross-validate the four classical models and write models and report."""
    run = RunDirectory(config.out)
    watch = Stopwatch()
    watch.start('load')
    features = Path(args.features) if args.features else run.features
    table = read_feature_csv(features)
    if len(table.case_ids) < 2:
        raise SchemaError(f'{features} holds fewer than two cases')
    watch.start('train')
    evaluations, finals = experiments.radiomics_study(table, config)
    watch.start('save')
    artifacts = {}
    for name, model in finals.items():
        save_model(run.model(name), model, table.names)
        artifacts[f'model_{name}'] = run.relative(run.model(name))
    run.echo_config(config)
    selected = evaluations[0].extra.get('selected_features', [])
    report = ExperimentReport(
        'radiomics', 'Performance of models using radiomics',
        [e.serialize() for e in evaluations], artifacts, config.serialize(),
        notes=['gbt is gradient boosting with Newton leaf values',
               f'LASSO selected {len(selected)} of {len(table.names)} features'],
        extra={'features': str(features)})
    report.write(run.reports, run.root, watch.stop())
    _print_rows(report.evaluations)
    return 0


def cmd_train_cnn(config, args):
    """Train the configured presets with patient-level evaluation."""
    run = RunDirectory(config.out)
    presets = args.presets or config.cnn.presets
    watch = Stopwatch()
    watch.start('slices')
    manifest = read_manifest(args.manifest or run.manifest)
    dataset = experiments.slice_dataset(manifest, config.cnn.slices_per_case,
                                        config.cnn.input_side)
    watch.start('train')
    evaluations, checkpoints = experiments.cnn_study(manifest, dataset, presets, config,
                                                     args.cv)
    watch.start('save')
    artifacts = {}
    for name, checkpoint in checkpoints.items():
        save_checkpoint(run.checkpoint(name), checkpoint)
        artifacts[f'checkpoint_{name}'] = run.relative(run.checkpoint(name))
    run.echo_config(config)
    report = ExperimentReport(
        'cnn', 'Performance of deep learning models', evaluations, artifacts,
        config.serialize(),
        notes=['patient label = majority vote of slice labels, ties positive',
               'patient score = mean slice probability'])
    report.write(run.reports, run.root, watch.stop())
    _print_rows(report.evaluations)
    return 0


def cmd_gradcam(config, args):
    """Write Grad-CAM heatmaps and overlays for every selected slice of a case."""
    run = RunDirectory(config.out)
    checkpoint = load_checkpoint(args.checkpoint)
    manifest = read_manifest(args.manifest or run.manifest)
    row = manifest.find(args.case)
    heatmaps = experiments.gradcam_case(checkpoint, manifest, row, config)
    record = {'case': row.case_id, 'label': row.label, 'checkpoint': str(args.checkpoint),
              'slices': []}
    for item in heatmaps:
        stem = run.root / 'heatmaps' / f'{row.case_id}_z{item.index:03d}'
        heat_path = write_bytes_atomic(stem.with_name(stem.name + '.pgm'),
                                       write_pgm(item.heatmap))
        overlay_path = write_bytes_atomic(stem.with_name(stem.name + '_overlay.pgm'),
                                          write_overlay_pgm(item.image, item.heatmap))
        record['slices'].append({'slice': item.index, 'heatmap': run.relative(heat_path),
                                 'overlay': run.relative(overlay_path),
                                 'localisation': item.score})
        score = 'n/a' if item.score is None else f'{item.score:.3f}'
        print(f'{row.case_id} slice {item.index}: localisation {score}')
    write_json_atomic(run.reports / f'gradcam_{row.case_id}.json', record)
    return 0


def cmd_evaluate(config, args):    # pylint: disable=unused-argument
    """Write reports/summary.md from the reports of the run directory."""
    run = RunDirectory(config.out)
    path = write_text_atomic(run.reports / 'summary.md', summary_markdown(run.reports))
    print(path)
    return 0


def _print_rows(evaluations):
    for record in evaluations:
        parts = [record['model']]
        for section in ('cv', 'holdout'):
            if record.get(section):
                parts.append(f'{section} acc {record[section]["accuracy"]:.4f} '
                             f'auc {record[section]["auc"]:.4f}')
        print('  '.join(parts))


COMMANDS = {
    'phantom': cmd_phantom,
    'extract': cmd_extract,
    'train-radiomics': cmd_train_radiomics,
    'train-cnn': cmd_train_cnn,
    'gradcam': cmd_gradcam,
    'evaluate': cmd_evaluate,
}
