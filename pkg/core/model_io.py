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

"""Versioned JSON envelopes for trained classical models."""
import logging

from core.errors import SchemaError
from core.linear import LinearModel, Normalization
from core.storage import dump_json, read_json, write_text_atomic
from core.trees import BoostModel, ForestModel

log = logging.getLogger(__name__)

MODEL_FORMAT = 'fibrosis-risk-model'
MODEL_VERSION = 1
KINDS = {
    'lasso_logistic': LinearModel,
    'linear_svm': LinearModel,
    'random_forest': ForestModel,
    'gbt': BoostModel,
}


def envelope(model, feature_names=()):
    """Self-describing dict of a trained model."""
    return {
        'format': MODEL_FORMAT,
        'version': MODEL_VERSION,
        'kind': model.kind,
        'features': list(feature_names),
        'hyperparameters': dict(model.hyperparameters),
        'normalization': model.normalization.serialize(),
        'parameters': model.parameters(),
    }


def serialize_model(model, feature_names=()):
    """Deterministic JSON text of a model."""
    return dump_json(envelope(model, feature_names))


def save_model(path, model, feature_names=()):
    """Write a model file atomically."""
    return write_text_atomic(path, serialize_model(model, feature_names))


def parse_model(values):
    """Rebuild a model from its envelope, dispatching on kind."""
    if values.get('format') != MODEL_FORMAT:
        raise SchemaError(f'not a model file (format {values.get("format")!r})')
    if values.get('version') != MODEL_VERSION:
        raise SchemaError(f'unsupported model version {values.get("version")!r}')
    kind = values.get('kind')
    if kind not in KINDS:
        raise SchemaError(f'unknown model kind {kind!r}')
    try:
        return KINDS[kind].from_parameters(kind, values['hyperparameters'],
                                           Normalization.parse(values['normalization']),
                                           values['parameters'])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f'malformed {kind} model: {exc}') from exc


def load_model(path):
    """Read a model file."""
    log.debug('Loading model %s', path)
    return parse_model(read_json(path))
