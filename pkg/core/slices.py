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

"""Axial slice selection, cropping and resizing, and patient-level voting."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from core.errors import EmptyList
from core.volume_io import check_aligned

log = logging.getLogger(__name__)


def resize(image, shape, order=1):
    """Resample a 2D array onto shape with corner-aligned sample points."""
    image = np.asarray(image, dtype=np.float64)
    rows = np.linspace(0.0, image.shape[0] - 1.0, shape[0])
    cols = np.linspace(0.0, image.shape[1] - 1.0, shape[1])
    grid = np.meshgrid(rows, cols, indexing='ij')
    return ndimage.map_coordinates(image, grid, order=order, mode='nearest')


def normalize_range(image):
    """Min-max scale to [0, 1]; a constant image maps to zeros."""
    low, high = float(image.min()), float(image.max())
    if high == low:
        return np.zeros_like(image, dtype=np.float64)
    return (image - low) / (high - low)


@dataclass(frozen=True, eq=False)
class SliceImage():
    """A network-ready slice and where it came from."""

    index: int
    image: np.ndarray
    box: tuple[int, int, int, int]

    def crop(self, plane, order=1):
        """Apply the same crop and resize to another plane of the volume."""
        x0, x1, y0, y1 = self.box
        return resize(plane[x0:x1, y0:y1], self.image.shape, order)


def rank_slices(mask, k=5):
    """Indices of the k axial slices with most mask voxels, ties to the lower index."""
    areas = mask.bits.sum(axis=(0, 1))
    candidates = np.flatnonzero(areas)
    order = sorted(candidates.tolist(), key=lambda z: (-int(areas[z]), z))
    return order[:k]


def extract_slices(volume, mask, k=5, side=64):
    """Crop, normalise and resize the k most covered axial slices."""
    check_aligned(volume, mask)
    mask.require_nonempty()
    result = []
    for z in rank_slices(mask, k):
        plane = mask.bits[:, :, z]
        xs, ys = np.nonzero(plane)
        box = (int(xs.min()), int(xs.max()) + 1, int(ys.min()), int(ys.max()) + 1)
        crop = normalize_range(volume.voxels[box[0]:box[1], box[2]:box[3], z])
        result.append(SliceImage(int(z), resize(crop, (side, side)), box))
    log.debug('Selected slices %s', [s.index for s in result])
    return result


def majority_vote(predictions):
    """Most frequent 0/1 label; an exact tie votes 1."""
    predictions = [int(p) for p in predictions]
    if not predictions:
        raise EmptyList('majority vote of an empty list')
    if any(p not in (0, 1) for p in predictions):
        raise ValueError('slice predictions must be 0 or 1')
    return int(2 * sum(predictions) >= len(predictions))
