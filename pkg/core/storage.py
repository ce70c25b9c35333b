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

"""Atomic file writing and JSON envelopes."""
import json
import logging
import os
import tempfile
from pathlib import Path

from core.errors import IoFailure

log = logging.getLogger(__name__)


def write_bytes_atomic(path, data):
    """Write data to path through a temp file and rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
        try:
            with os.fdopen(fd, 'wb') as f:
                f.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f'cannot write {path}: {exc}') from exc
    log.debug('Wrote %s (%d bytes)', path, len(data))
    return path


def write_text_atomic(path, text):
    """Write utf-8 text atomically."""
    return write_bytes_atomic(path, text.encode('utf-8'))


def dump_json(obj):
    """Serialize obj to deterministic JSON text."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + '\n'


def write_json_atomic(path, obj):
    """Write obj as deterministic JSON."""
    return write_text_atomic(path, dump_json(obj))


def read_bytes(path):
    """Read a whole file, mapping OS errors to IoFailure."""
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f'cannot read {path}: {exc}') from exc


def read_json(path):
    """Read a JSON file."""
    try:
        return json.loads(read_bytes(path).decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IoFailure(f'{path} is not valid JSON: {exc}') from exc
