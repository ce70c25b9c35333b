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

"""Experiment reports: JSON record, Markdown tables and timing sidecars."""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from core import __version__
from core.errors import IoFailure
from core.storage import read_json, write_json_atomic, write_text_atomic

log = logging.getLogger(__name__)

COLUMNS = (('cv', 'accuracy', 'CV Accuracy (%)'), ('cv', 'auc', 'CV AUC (%)'),
           ('holdout', 'accuracy', 'Test Accuracy (%)'), ('holdout', 'auc', 'Test AUC (%)'))


def percent(value):
    """Format a fraction as a percentage with two decimals."""
    return f'{100.0 * value:.2f}'


def markdown_table(headers, rows):
    """Markdown table; the best (largest) value of every numeric column is bolded.

    rows are (label, [value or None, ...]) with values as fractions.
    """
    best = []
    for c in range(len(headers) - 1):
        column = [values[c] for _, values in rows if values[c] is not None]
        best.append(max(column) if column else None)
    lines = ['| ' + ' | '.join(headers) + ' |', '|' + '---|' * len(headers)]
    for label, values in rows:
        cells = [label]
        for c, value in enumerate(values):
            if value is None:
                cells.append('n/a')
            elif value == best[c]:
                cells.append(f'**{percent(value)}**')
            else:
                cells.append(percent(value))
        lines.append('| ' + ' | '.join(cells) + ' |')
    return '\n'.join(lines) + '\n'


def metric_rows(evaluations):
    """Table rows of serialized EvalReports."""
    rows = []
    for evaluation in evaluations:
        values = []
        for section, metric, _ in COLUMNS:
            block = evaluation.get(section)
            values.append(block[metric] if block else None)
        rows.append((evaluation['model'], values))
    return rows


@dataclass
class ExperimentReport():
    """Evaluations, artifact paths and the configuration echo of one command."""

    name: str
    title: str
    evaluations: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def serialize(self):
        """Plain dict form, stable across runs."""
        return {'name': self.name, 'title': self.title, 'version': __version__,
                'evaluations': self.evaluations, 'artifacts': self.artifacts,
                'config': self.config, 'notes': self.notes, 'extra': self.extra}

    def markdown(self):
        """Markdown document with the results table and the config echo."""
        headers = ['Model'] + [title for _, _, title in COLUMNS]
        parts = [f'# {self.title}\n', markdown_table(headers, metric_rows(self.evaluations))]
        if self.notes:
            parts.append('\n'.join(f'- {note}' for note in self.notes) + '\n')
        if self.artifacts:
            parts.append('## Artifacts\n\n' + '\n'.join(
                f'- {key}: `{value}`' for key, value in sorted(self.artifacts.items())) + '\n')
        parts.append(f'## Configuration\n\nTool version {__version__}\n\n```yaml\n' +
                     yaml.safe_dump(self.config, sort_keys=True) + '```\n')
        return '\n'.join(parts)

    def write(self, reports_dir, root, timings=None):
        """Write <name>.json, <name>.md and the timings sidecar; return the JSON path."""
        reports_dir, root = Path(reports_dir), Path(root)
        for key, value in self.artifacts.items():
            if not (root / value).exists():
                raise IoFailure(f'report artifact {key} is missing: {root / value}')
        if timings is not None:
            sidecar = reports_dir / f'{self.name}.timings.json'
            write_json_atomic(sidecar, {k: round(v, 3) for k, v in timings.items()})
            self.extra['timings'] = str(sidecar.relative_to(root))
        path = write_json_atomic(reports_dir / f'{self.name}.json', self.serialize())
        write_text_atomic(reports_dir / f'{self.name}.md', self.markdown())
        log.info('Wrote report %s', path)
        return path


def summary_markdown(reports_dir):
    """Both results tables of a run directory in one document."""
    reports_dir = Path(reports_dir)
    parts = ['# Summary\n']
    found = False
    for name in ('cnn', 'radiomics'):
        path = reports_dir / f'{name}.json'
        if not path.exists():
            continue
        found = True
        record = read_json(path)
        headers = ['Model'] + [title for _, _, title in COLUMNS]
        parts.append(f'## {record["title"]}\n\n' +
                     markdown_table(headers, metric_rows(record['evaluations'])))
    if not found:
        raise IoFailure(f'no reports found in {reports_dir}')
    return '\n'.join(parts)
