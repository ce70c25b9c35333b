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

"""Gradient-weighted class activation maps and their lesion localisation score."""
import logging

import numpy as np
from scipy import ndimage

from core.errors import ShapeMismatch
from core.slices import resize
from core.volume_io import Heatmap

log = logging.getLogger(__name__)


def class_relevance(checkpoint, image, target_class=1):
    """Unnormalised map ReLU(sum_k alpha_k A_k) at feature-map resolution.

    A is the input of the global average pool and alpha_k the spatial mean of
    the target logit's gradient with respect to channel k.
    """
    net = checkpoint.network
    image = np.asarray(image, dtype=np.float64)
    x = image[None, None]
    net.check_input(x)
    if not 0 <= target_class < net.classes:
        raise ShapeMismatch(f'target class {target_class} outside 0..{net.classes - 1}')
    outputs = net.forward(checkpoint.params, x)
    seed = np.zeros_like(outputs[-1])
    seed[0, target_class] = 1.0
    _, douts = net.backward(checkpoint.params, outputs, seed)
    g = net.gap_index
    activations, gradients = outputs[g][0], douts[g][0]
    alpha = gradients.mean(axis=(1, 2))
    return np.maximum(np.tensordot(alpha, activations, axes=1), 0.0)


def gradcam(checkpoint, image, target_class=1):
    """Heatmap of the target class, bilinearly upsampled to the input size."""
    relevance = class_relevance(checkpoint, image, target_class)
    upsampled = resize(relevance, np.shape(image))
    return Heatmap.from_relevance(upsampled)


def localisation_score(heatmap, lesion_plane, top_fraction=0.1):
    """Share of top-decile heatmap mass that falls inside lesion_plane.

    Returns None for an all-zero heatmap.
    """
    values = heatmap.values
    if lesion_plane.shape != values.shape:
        raise ShapeMismatch(f'lesion plane {lesion_plane.shape} != heatmap {values.shape}')
    if values.max() <= 0.0:
        return None
    cutoff = np.quantile(values, 1.0 - top_fraction)
    top = values >= cutoff
    mass = float(values[top].sum())
    return float(values[top & lesion_plane].sum()) / mass if mass > 0 else None


def dilate_lesion(lesion, iterations=2):
    """3D binary dilation of a lesion mask by iterations voxels (26-connected)."""
    if iterations <= 0 or not lesion.bits.any():
        return lesion.bits.copy()
    structure = ndimage.generate_binary_structure(3, 3)
    return ndimage.binary_dilation(lesion.bits, structure=structure, iterations=iterations)
