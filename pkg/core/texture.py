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

"""Texture matrices (GLCM, GLRLM, GLSZM, NGTDM, GLDM) and their features.

All matrices are built from a GrayLevelVolume whose ``levels`` array holds
1..Ng inside the ROI and 0 outside.  Logarithms are base 2 with 0 log 0 = 0;
every guarded division falls back to 0 below ``EPS``.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import entr

from core.errors import EmptyMask

log = logging.getLogger(__name__)

# the 13 unique lattice directions of a 26-neighbourhood
DIRECTIONS = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, -1, 0), (1, 0, 1), (1, 0, -1),
              (0, 1, 1), (0, 1, -1), (1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1))

EPS = 1e-12
COARSENESS_CAP = 1e6
LN2 = np.log(2.0)

GLCM_NAMES = ('Autocorrelation', 'JointAverage', 'ClusterProminence', 'ClusterShade',
              'ClusterTendency', 'Contrast', 'Correlation', 'DifferenceAverage',
              'DifferenceEntropy', 'DifferenceVariance', 'JointEnergy', 'JointEntropy', 'Imc1',
              'Imc2', 'Idm', 'Idmn', 'Id', 'Idn', 'InverseVariance', 'MaximumProbability',
              'SumAverage', 'SumEntropy', 'SumSquares', 'MCC')
GLRLM_NAMES = ('ShortRunEmphasis', 'LongRunEmphasis', 'GrayLevelNonUniformity',
               'GrayLevelNonUniformityNormalized', 'RunLengthNonUniformity',
               'RunLengthNonUniformityNormalized', 'RunPercentage', 'GrayLevelVariance',
               'RunVariance', 'RunEntropy', 'LowGrayLevelRunEmphasis', 'HighGrayLevelRunEmphasis',
               'ShortRunLowGrayLevelEmphasis', 'ShortRunHighGrayLevelEmphasis',
               'LongRunLowGrayLevelEmphasis', 'LongRunHighGrayLevelEmphasis')
GLSZM_NAMES = ('SmallAreaEmphasis', 'LargeAreaEmphasis', 'GrayLevelNonUniformity',
               'GrayLevelNonUniformityNormalized', 'SizeZoneNonUniformity',
               'SizeZoneNonUniformityNormalized', 'ZonePercentage', 'GrayLevelVariance',
               'ZoneVariance', 'ZoneEntropy', 'LowGrayLevelZoneEmphasis',
               'HighGrayLevelZoneEmphasis', 'SmallAreaLowGrayLevelEmphasis',
               'SmallAreaHighGrayLevelEmphasis', 'LargeAreaLowGrayLevelEmphasis',
               'LargeAreaHighGrayLevelEmphasis')
NGTDM_NAMES = ('Coarseness', 'Contrast', 'Busyness', 'Complexity', 'Strength')
GLDM_NAMES = ('SmallDependenceEmphasis', 'LargeDependenceEmphasis', 'DependenceNonUniformity',
              'DependenceVariance', 'DependenceEntropy')

# all 26 neighbour offsets, used by NGTDM and GLDM
NEIGHBOURS = tuple(o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0))


@dataclass(frozen=True, eq=False)
class GrayLevelVolume():
    """Discretised ROI: levels 1..ng inside, 0 outside."""

    levels: np.ndarray
    ng: int

    def __post_init__(self):
        """Check the level range."""
        levels = np.asarray(self.levels, dtype=np.int64)
        if levels.ndim != 3:
            raise EmptyMask(f'levels must be 3D, got {levels.shape}')
        if self.ng < 2:
            raise ValueError(f'ng must be >= 2, got {self.ng}')
        if not (levels > 0).any():
            raise EmptyMask('gray-level volume has no ROI voxel')
        if levels.min() < 0 or levels.max() > self.ng:
            raise ValueError(f'levels must lie in 0..{self.ng}')
        object.__setattr__(self, 'levels', levels)

    @property
    def roi(self):
        """Boolean ROI."""
        return self.levels > 0

    @property
    def voxel_count(self):
        """Number of ROI voxels."""
        return int((self.levels > 0).sum())


def entropy_bits(p):
    """Shannon entropy in bits of a probability array, 0 log 0 = 0."""
    return float(entr(np.asarray(p, dtype=np.float64)).sum() / LN2)


def _safe_div(num, den):
    return num / den if abs(den) >= EPS else 0.0


def _pair_views(shape, offset):
    """Slices selecting voxel p and its neighbour p + offset."""
    src, dst = [], []
    for size, step in zip(shape, offset):
        if step >= 0:
            src.append(slice(0, size - step))
            dst.append(slice(step, size))
        else:
            src.append(slice(-step, size))
            dst.append(slice(0, size + step))
    return tuple(src), tuple(dst)


# ----------------------------------------------------------------------------- GLCM
def glcm_matrices(g, distance=1):
    """Symmetric normalised co-occurrence matrix for each direction with pairs."""
    matrices = {}
    ng = g.ng
    for direction in DIRECTIONS:
        offset = tuple(distance * d for d in direction)
        src, dst = _pair_views(g.levels.shape, offset)
        a, b = g.levels[src], g.levels[dst]
        valid = (a > 0) & (b > 0)
        if not valid.any():
            continue
        counts = np.bincount((a[valid] - 1) * ng + (b[valid] - 1), minlength=ng * ng)
        counts = counts.reshape(ng, ng).astype(np.float64)
        counts += counts.T
        matrices[direction] = counts / counts.sum()
    if not matrices:
        # no neighbour pairs at all: treat the ROI as self co-occurring
        level = int(g.levels[g.levels > 0][0])
        single = np.zeros((ng, ng))
        single[level - 1, level - 1] = 1.0
        matrices[(0, 0, 0)] = single
    return matrices


def glcm_features(p):    # pylint: disable=too-many-locals
    """The 24 GLCM features of one normalised matrix."""
    ng = p.shape[0]
    levels = np.arange(1, ng + 1, dtype=np.float64)
    i, j = np.meshgrid(levels, levels, indexing='ij')
    px, py = p.sum(axis=1), p.sum(axis=0)
    ux, uy = float((levels * px).sum()), float((levels * py).sum())
    varx = float((((levels - ux) ** 2) * px).sum())
    vary = float((((levels - uy) ** 2) * py).sum())

    k_sum = np.arange(2, 2 * ng + 1)
    k_diff = np.arange(0, ng)
    p_sum = np.bincount((i + j).astype(np.int64).ravel() - 2, weights=p.ravel(),
                        minlength=2 * ng - 1)
    p_diff = np.bincount(np.abs(i - j).astype(np.int64).ravel(), weights=p.ravel(),
                         minlength=ng)

    hx, hy, hxy = entropy_bits(px), entropy_bits(py), entropy_bits(p)
    pxpy = np.outer(px, py)
    nonzero = p > 0
    hxy1 = float(-(p[nonzero] * np.log2(pxpy[nonzero])).sum())
    hxy2 = entropy_bits(pxpy)

    centred = i + j - ux - uy
    diff_average = float((k_diff * p_diff).sum())
    sum_average = float((k_sum * p_sum).sum())
    if varx * vary >= EPS:
        correlation = (float((i * j * p).sum()) - ux * uy) / np.sqrt(varx * vary)
    else:
        correlation = 0.0
    hmax = max(hx, hy)
    imc1 = (hxy - hxy1) / hmax if hmax >= EPS else 0.0
    imc2 = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - hxy))))) if hmax >= EPS else 0.0
    absdiff = np.abs(i - j)

    return {
        'Autocorrelation': float((i * j * p).sum()),
        'JointAverage': ux,
        'ClusterProminence': float((centred ** 4 * p).sum()),
        'ClusterShade': float((centred ** 3 * p).sum()),
        'ClusterTendency': float((centred ** 2 * p).sum()),
        'Contrast': float((absdiff ** 2 * p).sum()),
        'Correlation': float(correlation),
        'DifferenceAverage': diff_average,
        'DifferenceEntropy': entropy_bits(p_diff),
        'DifferenceVariance': float((((k_diff - diff_average) ** 2) * p_diff).sum()),
        'JointEnergy': float((p ** 2).sum()),
        'JointEntropy': hxy,
        'Imc1': float(imc1),
        'Imc2': imc2,
        'Idm': float((p / (1.0 + absdiff ** 2)).sum()),
        'Idmn': float((p / (1.0 + absdiff ** 2 / ng ** 2)).sum()),
        'Id': float((p / (1.0 + absdiff)).sum()),
        'Idn': float((p / (1.0 + absdiff / ng)).sum()),
        'InverseVariance': float((p_diff[1:] / k_diff[1:] ** 2).sum()),
        'MaximumProbability': float(p.max()),
        'SumAverage': sum_average,
        'SumEntropy': entropy_bits(p_sum),
        'SumSquares': float((((i - ux) ** 2) * p).sum()),
        'MCC': _mcc(p, px, py),
    }


def _mcc(p, px, py):
    """Second largest eigenvalue magnitude of the transition matrix, in [0, 1]."""
    keep = (px > 0) & (py > 0)
    if keep.sum() < 2:
        return 0.0
    sub = p[np.ix_(keep, keep)]
    q = (sub / px[keep][:, None]) @ (sub / py[keep][None, :]).T
    eigen = np.sort(np.abs(np.linalg.eigvals(q)))[::-1]
    return float(np.clip(eigen[1], 0.0, 1.0))


def _average(per_direction, names):
    """Mean over directions, summed in fixed direction order."""
    return {name: float(sum(d[name] for d in per_direction) / len(per_direction))
            for name in names}


def build_glcm(g, distance=1):
    """Direction-averaged GLCM and its 24 features."""
    matrices = glcm_matrices(g, distance)
    features = _average([glcm_features(m) for m in matrices.values()], GLCM_NAMES)
    mean_matrix = sum(matrices.values()) / len(matrices)
    return mean_matrix, features


# ----------------------------------------------------------------------------- GLRLM
def _line_keys(shape, direction):
    """Line identifier and position along the line for every voxel."""
    axis = next(a for a, d in enumerate(direction) if d != 0)
    coords = np.indices(shape).reshape(3, -1)
    position = coords[axis] * direction[axis]
    origin = coords - position[None, :] * np.asarray(direction)[:, None]
    size = max(shape)
    base = 3 * size
    line = ((origin[0] + size) * base + (origin[1] + size)) * base + (origin[2] + size)
    return line, position + size


def glrlm_matrices(g):
    """Run-length matrix (ng x max run) per direction."""
    levels = g.levels
    shape = levels.shape
    max_run = max(shape)
    flat = levels.reshape(-1)
    matrices = {}
    for direction in DIRECTIONS:
        prev = np.zeros_like(levels)
        nxt = np.zeros_like(levels)
        src, dst = _pair_views(shape, direction)
        # prev[p] = level at p - d, nxt[p] = level at p + d
        prev[dst] = levels[src]
        nxt[src] = levels[dst]
        inside = levels > 0
        starts = (inside & (prev != levels)).reshape(-1)
        ends = (inside & (nxt != levels)).reshape(-1)
        line, position = _line_keys(shape, direction)
        key = line * (2 * max_run + 2) + position
        start_idx = np.flatnonzero(starts)
        end_idx = np.flatnonzero(ends)
        start_idx = start_idx[np.argsort(key[start_idx], kind='stable')]
        end_idx = end_idx[np.argsort(key[end_idx], kind='stable')]
        lengths = position[end_idx] - position[start_idx] + 1
        run_levels = flat[start_idx]
        matrix = np.zeros((g.ng, max_run), dtype=np.int64)
        np.add.at(matrix, (run_levels - 1, lengths - 1), 1)
        matrices[direction] = matrix
    return matrices


def _emphasis_features(matrix, n_voxels, names):    # pylint: disable=too-many-locals
    """Shared GLRLM/GLSZM formulas over a (level, size) count matrix."""
    counts = matrix.astype(np.float64)
    total = counts.sum()
    ng, ns = counts.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, ns + 1, dtype=np.float64)[None, :]
    pg = counts.sum(axis=1)
    ps = counts.sum(axis=0)
    p = counts / total
    mu_i = float((i * p).sum())
    mu_j = float((j * p).sum())
    values = (
        float((ps / j[0] ** 2).sum() / total),
        float((ps * j[0] ** 2).sum() / total),
        float((pg ** 2).sum() / total),
        float((pg ** 2).sum() / total ** 2),
        float((ps ** 2).sum() / total),
        float((ps ** 2).sum() / total ** 2),
        float(total / n_voxels),
        float((p * (i - mu_i) ** 2).sum()),
        float((p * (j - mu_j) ** 2).sum()),
        entropy_bits(p),
        float((pg / i[:, 0] ** 2).sum() / total),
        float((pg * i[:, 0] ** 2).sum() / total),
        float((counts / (i ** 2 * j ** 2)).sum() / total),
        float((counts * i ** 2 / j ** 2).sum() / total),
        float((counts * j ** 2 / i ** 2).sum() / total),
        float((counts * i ** 2 * j ** 2).sum() / total),
    )
    return dict(zip(names, values))


def glrlm_features(matrix, n_voxels):
    """The 16 GLRLM features of one direction's matrix."""
    return _emphasis_features(matrix, n_voxels, GLRLM_NAMES)


def build_glrlm(g):
    """Per-direction run-length matrices and their direction-averaged features."""
    matrices = glrlm_matrices(g)
    n_voxels = g.voxel_count
    features = _average([glrlm_features(m, n_voxels) for m in matrices.values()], GLRLM_NAMES)
    return matrices, features


# ----------------------------------------------------------------------------- GLSZM
def glszm_matrix(g):
    """Zone-size matrix over 26-connected equal-level zones."""
    structure = np.ones((3, 3, 3), dtype=bool)
    zones = []
    for level in range(1, g.ng + 1):
        labelled, count = ndimage.label(g.levels == level, structure=structure)
        if count:
            sizes = np.bincount(labelled.ravel())[1:]
            zones.append((level, sizes))
    max_size = max(int(sizes.max()) for _, sizes in zones)
    matrix = np.zeros((g.ng, max_size), dtype=np.int64)
    for level, sizes in zones:
        np.add.at(matrix[level - 1], sizes - 1, 1)
    return matrix


def glszm_features(matrix, n_voxels):
    """The 16 GLSZM features."""
    return _emphasis_features(matrix, n_voxels, GLSZM_NAMES)


def build_glszm(g):
    """Zone-size matrix and its 16 features."""
    matrix = glszm_matrix(g)
    return matrix, glszm_features(matrix, g.voxel_count)


# ----------------------------------------------------------------------------- NGTDM
def _neighbour_totals(levels):
    """Per-voxel sum and count of in-ROI 26-neighbour levels."""
    inside = levels > 0
    total = np.zeros(levels.shape, dtype=np.float64)
    count = np.zeros(levels.shape, dtype=np.int64)
    for offset in NEIGHBOURS:
        src, dst = _pair_views(levels.shape, offset)
        neighbour = levels[dst]
        total[src] += neighbour
        count[src] += neighbour > 0
    return np.where(inside, total, 0.0), np.where(inside, count, 0)


def ngtdm_matrix(g):
    """Per-level (n_i, s_i) arrays."""
    total, count = _neighbour_totals(g.levels)
    valid = (g.levels > 0) & (count > 0)
    levels = g.levels[valid]
    mean = total[valid] / count[valid]
    n = np.bincount(levels, minlength=g.ng + 1)[1:].astype(np.float64)
    s = np.bincount(levels, weights=np.abs(levels - mean), minlength=g.ng + 1)[1:]
    return n, s


def ngtdm_features(n, s):
    """The 5 NGTDM features."""
    nvp = n.sum()
    if nvp <= 0:
        return dict(zip(NGTDM_NAMES, (COARSENESS_CAP, 0.0, 0.0, 0.0, 0.0)))
    p = n / nvp
    levels = np.arange(1, len(n) + 1, dtype=np.float64)
    present = p > 0
    ngp = int(present.sum())
    pi, pj = p[present][:, None], p[present][None, :]
    si, sj = s[present][:, None], s[present][None, :]
    li, lj = levels[present][:, None], levels[present][None, :]

    weighted = float((p * s).sum())
    coarseness = 1.0 / weighted if weighted >= 1e-6 else COARSENESS_CAP
    if ngp > 1:
        contrast = float((pi * pj * (li - lj) ** 2).sum() / (ngp * (ngp - 1)) * s.sum() / nvp)
    else:
        contrast = 0.0
    busyness = _safe_div(weighted, float(np.abs(li * pi - lj * pj).sum()))
    complexity = float((np.abs(li - lj) * (pi * si + pj * sj) / (pi + pj)).sum() / nvp)
    strength = _safe_div(float(((pi + pj) * (li - lj) ** 2).sum()), float(s.sum()))
    return dict(zip(NGTDM_NAMES, (coarseness, contrast, busyness, complexity, strength)))


def build_ngtdm(g):
    """NGTDM arrays and their 5 features."""
    n, s = ngtdm_matrix(g)
    return (n, s), ngtdm_features(n, s)


# ----------------------------------------------------------------------------- GLDM
def gldm_matrix(g, alpha=0):
    """Dependence matrix indexed by (level, dependence 1..27)."""
    levels = g.levels
    dependence = np.ones(levels.shape, dtype=np.int64)
    for offset in NEIGHBOURS:
        src, dst = _pair_views(levels.shape, offset)
        centre, neighbour = levels[src], levels[dst]
        dependence[src] += (neighbour > 0) & (np.abs(centre - neighbour) <= alpha)
    inside = levels > 0
    matrix = np.zeros((g.ng, len(NEIGHBOURS) + 1), dtype=np.int64)
    np.add.at(matrix, (levels[inside] - 1, dependence[inside] - 1), 1)
    return matrix


def gldm_features(matrix):
    """The 5 GLDM features."""
    counts = matrix.astype(np.float64)
    total = counts.sum()
    j = np.arange(1, counts.shape[1] + 1, dtype=np.float64)
    pd = counts.sum(axis=0)
    p = counts / total
    mu = float((p.sum(axis=0) * j).sum())
    return dict(zip(GLDM_NAMES, (
        float((pd / j ** 2).sum() / total),
        float((pd * j ** 2).sum() / total),
        float((pd ** 2).sum() / total),
        float((p.sum(axis=0) * (j - mu) ** 2).sum()),
        entropy_bits(p),
    )))


def build_gldm(g, alpha=0):
    """Dependence matrix and its 5 features."""
    matrix = gldm_matrix(g, alpha)
    return matrix, gldm_features(matrix)
