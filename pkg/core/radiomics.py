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

"""Discretisation, first-order and shape features, and the 111-name registry.

Registry order: firstorder (19), shape3d (16), shape2d (10), glcm (24),
glrlm (16), glszm (16), ngtdm (5), gldm (5).  Kurtosis is the non-excess
fourth standardised moment.  Surface area and perimeter count exposed voxel
faces and pixel edges.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist

from core import texture
from core.errors import NonFiniteFeature, SchemaError
from core.storage import read_bytes, write_text_atomic
from core.texture import EPS, GrayLevelVolume
from core.volume_io import check_aligned

log = logging.getLogger(__name__)

FIRST_ORDER_NAMES = ('Energy', 'TotalEnergy', 'Entropy', 'Minimum', 'Percentile10',
                     'Percentile90', 'Maximum', 'Mean', 'Median', 'InterquartileRange', 'Range',
                     'MeanAbsoluteDeviation', 'RobustMeanAbsoluteDeviation', 'RootMeanSquared',
                     'StandardDeviation', 'Skewness', 'Kurtosis', 'Variance', 'Uniformity')
SHAPE3D_NAMES = ('VoxelVolume', 'SurfaceArea', 'SurfaceVolumeRatio', 'Sphericity', 'Compactness1',
                 'Compactness2', 'SphericalDisproportion', 'Maximum3DDiameter',
                 'Maximum2DDiameterSlice', 'Maximum2DDiameterColumn', 'Maximum2DDiameterRow',
                 'MajorAxisLength', 'MinorAxisLength', 'LeastAxisLength', 'Elongation', 'Flatness')
SHAPE2D_NAMES = ('PixelSurface', 'Perimeter', 'PerimeterSurfaceRatio', 'Sphericity2D',
                 'SphericalDisproportion2D', 'MaximumDiameter', 'MajorAxisLength',
                 'MinorAxisLength', 'Elongation', 'Eccentricity')

FAMILIES = (
    ('firstorder', FIRST_ORDER_NAMES),
    ('shape3d', SHAPE3D_NAMES),
    ('shape2d', SHAPE2D_NAMES),
    ('glcm', texture.GLCM_NAMES),
    ('glrlm', texture.GLRLM_NAMES),
    ('glszm', texture.GLSZM_NAMES),
    ('ngtdm', texture.NGTDM_NAMES),
    ('gldm', texture.GLDM_NAMES),
)
FEATURE_NAMES = tuple(f'{family}_{name}' for family, names in FAMILIES for name in names)
TEXTURE_FAMILIES = ('glcm', 'glrlm', 'glszm', 'ngtdm', 'gldm')

# pairwise distances are taken on hull vertices above this many points
HULL_THRESHOLD = 1000


@dataclass(frozen=True)
class RadiomicsSettings():
    """Extraction parameters."""

    ng: int = 32
    glcm_distance: int = 1
    gldm_alpha: int = 0


@dataclass(frozen=True, eq=False)
class FeatureVector():
    """Registry-ordered feature values of one case."""

    names: tuple[str, ...]
    values: np.ndarray
    flags: tuple[str, ...] = ()

    def as_dict(self):
        """Return an ordered name -> value dict."""
        return dict(zip(self.names, self.values.tolist()))

    def __len__(self):
        """Number of features."""
        return len(self.names)


def discretize(volume, mask, ng=32):
    """Fixed bin count discretisation of the ROI intensities."""
    check_aligned(volume, mask)
    mask.require_nonempty()
    if ng < 2:
        raise ValueError(f'ng must be >= 2, got {ng}')
    values = volume.voxels[mask.bits]
    low, high = float(values.min()), float(values.max())
    levels = np.zeros(volume.dims, dtype=np.int64)
    if high == low:
        levels[mask.bits] = 1
    else:
        binned = np.floor(ng * (values - low) / (high - low)).astype(np.int64) + 1
        levels[mask.bits] = np.minimum(ng, binned)
    return GrayLevelVolume(levels, ng)


def first_order_features(volume, mask, ng=32):    # pylint: disable=too-many-locals
    """The 19 intensity statistics over the ROI."""
    check_aligned(volume, mask)
    mask.require_nonempty()
    x = volume.voxels[mask.bits]
    n = x.size
    mean = float(x.mean())
    centred = x - mean
    variance = float((centred ** 2).mean())
    p10, p25, median, p75, p90 = (float(v) for v in np.percentile(x, [10, 25, 50, 75, 90]))
    robust = x[(x >= p10) & (x <= p90)]
    energy = float((x ** 2).sum())
    if variance < EPS:
        skewness = kurtosis = 0.0
    else:
        skewness = float((centred ** 3).mean() / variance ** 1.5)
        kurtosis = float((centred ** 4).mean() / variance ** 2)
    levels = discretize(volume, mask, ng).levels[mask.bits]
    p = np.bincount(levels, minlength=ng + 1)[1:] / n
    return dict(zip(FIRST_ORDER_NAMES, (
        energy,
        energy * volume.voxel_volume,
        texture.entropy_bits(p),
        float(x.min()),
        p10,
        p90,
        float(x.max()),
        mean,
        median,
        p75 - p25,
        float(x.max() - x.min()),
        float(np.abs(centred).mean()),
        float(np.abs(robust - robust.mean()).mean()),
        math.sqrt(energy / n),
        math.sqrt(variance),
        skewness,
        kurtosis,
        variance,
        float((p ** 2).sum()),
    )))


def _max_pairwise_distance(points):
    """Largest Euclidean distance between any two points."""
    if len(points) < 2:
        return 0.0
    if len(points) > HULL_THRESHOLD:
        try:
            points = points[ConvexHull(points).vertices]
        except QhullError:
            log.debug('Convex hull failed on %d points, using all of them', len(points))
    best = 0.0
    for start in range(0, len(points), 512):
        best = max(best, float(cdist(points[start:start + 512], points).max()))
    return best


def _planar_max_diameter(points, index, axis):
    """Largest in-plane distance among points sharing a coordinate on axis."""
    best = 0.0
    for value in np.unique(index[:, axis]):
        best = max(best, _max_pairwise_distance(points[index[:, axis] == value]))
    return best


def _axis_eigenvalues(points):
    """Descending eigenvalues of the population covariance, clamped at 0."""
    if len(points) < 2:
        return np.zeros(points.shape[1])
    centred = points - points.mean(axis=0)
    covariance = centred.T @ centred / len(points)
    return np.clip(np.sort(np.linalg.eigvalsh(covariance))[::-1], 0.0, None)


def _axis_length(eigenvalue):
    return 4.0 * math.sqrt(eigenvalue) if eigenvalue >= EPS else 0.0


def _ratio_sqrt(num, den):
    return math.sqrt(num / den) if den >= EPS and num >= EPS else 0.0


def shape_features_3d(mask, spacing):    # pylint: disable=too-many-locals
    """The 16 volumetric shape features and degeneracy flags."""
    mask.require_nonempty()
    bits = mask.bits
    sx, sy, sz = spacing
    volume = mask.count * sx * sy * sz
    padded = np.pad(bits, 1).astype(np.int8)
    face_area = (sy * sz, sx * sz, sx * sy)
    area = float(sum(np.abs(np.diff(padded, axis=a)).sum() * face_area[a] for a in range(3)))

    interior = ndimage.binary_erosion(bits, structure=ndimage.generate_binary_structure(3, 1),
                                      border_value=0)
    surface_index = np.argwhere(bits & ~interior)
    surface = surface_index * np.asarray(spacing)
    eigen = _axis_eigenvalues(np.argwhere(bits) * np.asarray(spacing))
    flags = ()
    if (eigen < EPS).any():
        log.warning('Degenerate mask: covariance eigenvalues %s, lengths of the degenerate '
                    'axes reported as 0', eigen)
        flags = ('shape3d_degenerate_axes',)

    sphericity = (36.0 * math.pi * volume ** 2) ** (1.0 / 3.0) / area
    values = (
        volume,
        area,
        area / volume,
        sphericity,
        volume / (math.sqrt(math.pi) * area ** 1.5),
        36.0 * math.pi * volume ** 2 / area ** 3,
        1.0 / sphericity,
        _max_pairwise_distance(surface),
        _planar_max_diameter(surface, surface_index, 2),
        _planar_max_diameter(surface, surface_index, 1),
        _planar_max_diameter(surface, surface_index, 0),
        _axis_length(eigen[0]),
        _axis_length(eigen[1]),
        _axis_length(eigen[2]),
        _ratio_sqrt(eigen[1], eigen[0]),
        _ratio_sqrt(eigen[2], eigen[0]),
    )
    return dict(zip(SHAPE3D_NAMES, values)), flags


def largest_slice(mask):
    """Axial index with the largest in-mask area, ties to the lowest index."""
    areas = mask.bits.sum(axis=(0, 1))
    return int(np.argmax(areas))


def shape_features_2d(mask, spacing):
    """The 10 planar shape features on the largest axial slice."""
    mask.require_nonempty()
    plane = mask.bits[:, :, largest_slice(mask)]
    sx, sy = spacing[0], spacing[1]
    area = float(plane.sum()) * sx * sy
    padded = np.pad(plane, 1).astype(np.int8)
    # edges crossed when stepping along x are sy long, along y sx long
    perimeter = float(np.abs(np.diff(padded, axis=0)).sum() * sy +
                      np.abs(np.diff(padded, axis=1)).sum() * sx)
    interior = ndimage.binary_erosion(plane, structure=ndimage.generate_binary_structure(2, 1),
                                      border_value=0)
    boundary = np.argwhere(plane & ~interior) * np.array([sx, sy])
    eigen = _axis_eigenvalues(np.argwhere(plane) * np.array([sx, sy]))
    sphericity = 2.0 * math.sqrt(math.pi * area) / perimeter
    ratio = eigen[1] / eigen[0] if eigen[0] >= EPS else None
    return dict(zip(SHAPE2D_NAMES, (
        area,
        perimeter,
        perimeter / area,
        sphericity,
        1.0 / sphericity,
        _max_pairwise_distance(boundary),
        4.0 * math.sqrt(eigen[0]),
        4.0 * math.sqrt(eigen[1]),
        math.sqrt(ratio) if ratio is not None else 0.0,
        math.sqrt(max(0.0, 1.0 - ratio)) if ratio is not None else 0.0,
    )))


def texture_features(g, settings):
    """All texture families of a discretised ROI, keyed by family."""
    return {
        'glcm': texture.build_glcm(g, settings.glcm_distance)[1],
        'glrlm': texture.build_glrlm(g)[1],
        'glszm': texture.build_glszm(g)[1],
        'ngtdm': texture.build_ngtdm(g)[1],
        'gldm': texture.build_gldm(g, settings.gldm_alpha)[1],
    }


def extract_all(volume, mask, settings=RadiomicsSettings()):
    """Compute every registry feature for one case."""
    check_aligned(volume, mask)
    mask.require_nonempty()
    shape3d, flags = shape_features_3d(mask, volume.spacing)
    families = {
        'firstorder': first_order_features(volume, mask, settings.ng),
        'shape3d': shape3d,
        'shape2d': shape_features_2d(mask, volume.spacing),
    }
    families.update(texture_features(discretize(volume, mask, settings.ng), settings))
    values = np.array([families[family][name] for family, names in FAMILIES for name in names],
                      dtype=np.float64)
    if not np.isfinite(values).all():
        bad = [n for n, v in zip(FEATURE_NAMES, values) if not math.isfinite(v)]
        raise NonFiniteFeature(f'non-finite features {bad}')
    return FeatureVector(FEATURE_NAMES, values, flags)


@dataclass
class FeatureTable():
    """Rows of the feature CSV."""

    case_ids: list[str]
    labels: np.ndarray
    names: tuple[str, ...]
    matrix: np.ndarray

    def row_text(self, index):
        """Format one row as written to disk."""
        return format_feature_row(self.case_ids[index], int(self.labels[index]),
                                  self.matrix[index])


def feature_header():
    """CSV header line."""
    return ','.join(('case_id', 'label') + FEATURE_NAMES)


def format_feature_row(case_id, label, values):
    """CSV row with 17 significant digits."""
    return ','.join([case_id, str(int(label))] + [format(float(v), '.17g') for v in values])


def parse_feature_csv(text):
    """Parse feature CSV text into a FeatureTable, checking the schema."""
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    expected = ('case_id', 'label') + FEATURE_NAMES
    if header != expected:
        raise SchemaError('feature CSV header does not match the feature registry')
    case_ids, labels, rows = [], [], []
    for line_no, values in enumerate(reader, start=2):
        if not values:
            continue
        if len(values) != len(expected):
            raise SchemaError(f'feature CSV line {line_no} has {len(values)} columns, '
                              f'expected {len(expected)}')
        try:
            label = int(values[1])
            row = [float(v) for v in values[2:]]
        except ValueError as exc:
            raise SchemaError(f'feature CSV line {line_no}: {exc}') from exc
        if label not in (0, 1) or not all(math.isfinite(v) for v in row):
            raise SchemaError(f'feature CSV line {line_no}: bad label or non-finite value')
        case_ids.append(values[0])
        labels.append(label)
        rows.append(row)
    if len(set(case_ids)) != len(case_ids):
        raise SchemaError('feature CSV case ids are not unique')
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))
    return FeatureTable(case_ids, np.array(labels, dtype=np.int64), FEATURE_NAMES, matrix)


def write_feature_csv(path, case_ids, labels, vectors):
    """Write one row per case in registry order."""
    lines = [feature_header()]
    for case_id, label, vector in zip(case_ids, labels, vectors):
        if tuple(vector.names) != FEATURE_NAMES:
            raise SchemaError(f'{case_id}: feature names do not follow the registry')
        lines.append(format_feature_row(case_id, label, vector.values))
    return write_text_atomic(path, '\n'.join(lines) + '\n')


def read_feature_csv(path):
    """Read and validate a feature CSV file."""
    return parse_feature_csv(read_bytes(path).decode('utf-8'))
