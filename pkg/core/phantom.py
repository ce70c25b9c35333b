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

"""Seeded synthetic lung phantoms with fibrosis-like lesions.

Generator contract: numpy ``PCG64`` seeded with a 64-bit integer.  Case ``i``
of a cohort uses ``mix_seed(master, i)``, a SplitMix64 finaliser applied to
``master ^ (i * 0x9E3779B97F4A7C15)``.
"""
import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from core.errors import InvalidSpec, IoFailure, SchemaError
from core.storage import write_text_atomic
from core.texture import DIRECTIONS
from core.volume_io import Mask, Volume, round_half_away, save_mask, save_volume

log = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MANIFEST_HEADER = ('case_id', 'label', 'volume', 'roi', 'lesion', 'seed')


def mix_seed(master, index):
    """Derive a per-case 64-bit seed from the master seed and the case index."""
    z = (int(master) ^ ((int(index) * GOLDEN_GAMMA) & MASK64)) & MASK64
    z = (z + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(order=True)
class PhantomSpec():    # pylint: disable=too-many-instance-attributes
    """Parameters of one synthetic chest volume."""

    dims: tuple[int, int, int] = (64, 64, 64)
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    background_hu: float = -850.0
    gravity_gradient_hu: float = 200.0
    noise_sd: float = 30.0
    noise_smoothing: float = 2.0
    tissue_hu: float = 40.0
    lung_axes: tuple[float, float, float] = (0.38, 0.42, 0.45)
    lesion_count: tuple[int, int] = (2, 4)
    lesion_radius: tuple[int, int] = (8, 12)
    lesion_z_spread: float = 0.5
    ground_glass_hu: float = -600.0
    reticulation_hu: float = 120.0
    band_period: float = 3.0

    def add_values(self, values):
        """Add values from dict."""
        names = {f.name for f in fields(self)}
        for key, value in values.items():
            if key not in names:
                raise InvalidSpec(f'unknown phantom field {key!r}')
            if isinstance(value, list):
                value = tuple(value)
            object.__setattr__(self, key, value)
        return self

    def __getitem__(self, key):
        """Implement __getitem__."""
        return super().__getattribute__(key)

    def semi_axes(self):
        """Lung ellipsoid semi-axes in voxels."""
        return tuple(frac * n for frac, n in zip(self.lung_axes, self.dims))

    def validate(self):
        """Raise InvalidSpec unless every range is usable."""
        if len(self.dims) != 3 or min(self.dims) < 16:
            raise InvalidSpec(f'dims must be >= 16 per axis, got {self.dims}')
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise InvalidSpec(f'spacing must be positive, got {self.spacing}')
        if self.noise_sd < 0 or self.noise_smoothing < 0 or self.band_period <= 0:
            raise InvalidSpec('noise_sd and noise_smoothing must be >= 0, band_period > 0')
        if not 0 <= self.lesion_z_spread <= 1:
            raise InvalidSpec(f'lesion_z_spread must lie in [0, 1], got {self.lesion_z_spread}')
        if not all(0 < a <= 0.5 for a in self.lung_axes):
            raise InvalidSpec(f'lung_axes must lie in (0, 0.5], got {self.lung_axes}')
        low, high = self.lesion_count
        if not 1 <= low <= high:
            raise InvalidSpec(f'lesion_count range {self.lesion_count} is empty')
        low, high = self.lesion_radius
        if not 1 <= low <= high:
            raise InvalidSpec(f'lesion_radius range {self.lesion_radius} is empty')
        if high >= min(self.semi_axes()):
            raise InvalidSpec(f'lesion radius {high} does not fit the lung ellipsoid')
        return self


def _grid(dims):
    """Voxel offsets from the grid centre, one array per axis."""
    return np.meshgrid(*[np.arange(n, dtype=np.float64) - (n - 1) / 2.0 for n in dims],
                       indexing='ij')


def _lesion_centre(rng, axes, radius, z_spread):
    """Draw a centre inside the ellipsoid shrunk by the radius.

    The axial offset is limited to z_spread * radius so every lesion crosses
    the central axial slices.
    """
    inner = np.array([a - radius for a in axes])
    bound = inner.copy()
    bound[2] = min(inner[2], z_spread * radius)
    while True:
        point = rng.uniform(-bound, bound)
        if np.sum((point / inner) ** 2) <= 1.0:
            return point


def _noise(rng, spec):
    """Gaussian noise, optionally smoothed, scaled to noise_sd."""
    noise = rng.normal(0.0, 1.0, size=spec.dims)
    if spec.noise_smoothing > 0:
        noise = ndimage.gaussian_filter(noise, spec.noise_smoothing, mode='reflect')
        spread = float(noise.std())
        noise = noise / spread if spread > 0 else noise
    return spec.noise_sd * noise


def generate_phantom(spec, label, seed):
    """Generate (volume, roi mask, lesion mask) for one case."""
    spec.validate()
    if label not in (0, 1):
        raise InvalidSpec(f'label must be 0 or 1, got {label}')
    rng = np.random.Generator(np.random.PCG64(int(seed) & MASK64))
    coords = _grid(spec.dims)
    axes = spec.semi_axes()
    roi = sum((c / a) ** 2 for c, a in zip(coords, axes)) <= 1.0

    noise = _noise(rng, spec)
    # dependent (posterior, +y) lung is denser
    lung = spec.background_hu + spec.gravity_gradient_hu * coords[1] / (2.0 * axes[1])
    voxels = np.where(roi, lung, spec.tissue_hu) + noise
    lesion = np.zeros(spec.dims, dtype=bool)

    if label == 1:
        count = int(rng.integers(spec.lesion_count[0], spec.lesion_count[1] + 1))
        for _ in range(count):
            radius = int(rng.integers(spec.lesion_radius[0], spec.lesion_radius[1] + 1))
            centre = _lesion_centre(rng, axes, radius, spec.lesion_z_spread)
            direction = np.array(DIRECTIONS[int(rng.integers(len(DIRECTIONS)))],
                                 dtype=np.float64)
            direction /= np.linalg.norm(direction)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            sphere = sum((c - p) ** 2 for c, p in zip(coords, centre)) <= radius ** 2
            sphere &= roi
            along = sum(c * d for c, d in zip(coords, direction))
            bands = spec.reticulation_hu * np.sin(2.0 * math.pi * along / spec.band_period +
                                                  phase)
            voxels[sphere] = (spec.ground_glass_hu + noise + bands)[sphere]
            lesion |= sphere
        log.debug('Phantom seed=%d: %d lesions, %d lesion voxels', seed, count,
                  int(lesion.sum()))

    volume = Volume(voxels, spec.spacing)
    return volume, Mask(roi, spec.spacing), Mask(lesion, spec.spacing)


@dataclass(frozen=True)
class ManifestRow():
    """One case of a cohort."""

    case_id: str
    label: int
    volume: str
    roi: str
    lesion: str
    seed: int


@dataclass
class CohortManifest():
    """Cohort rows plus the directory their relative paths resolve against."""

    rows: list[ManifestRow] = field(default_factory=list)
    root: Path = Path('.')

    def path(self, row, kind):
        """Resolve the volume, roi or lesion path of a row."""
        return self.root / getattr(row, kind)

    def labels(self):
        """Labels in manifest order."""
        return np.array([row.label for row in self.rows], dtype=np.int64)

    def find(self, case_id):
        """Return the row of case_id."""
        for row in self.rows:
            if row.case_id == case_id:
                return row
        raise SchemaError(f'case {case_id!r} is not in the manifest')

    def serialize(self):
        """Serialize the manifest as CSV text."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(MANIFEST_HEADER)
        for row in self.rows:
            writer.writerow([asdict(row)[name] for name in MANIFEST_HEADER])
        return buffer.getvalue()

    def validate(self, check_files=True):
        """Check case id uniqueness and that every referenced file exists."""
        ids = [row.case_id for row in self.rows]
        if len(set(ids)) != len(ids):
            raise SchemaError('manifest case ids are not unique')
        if check_files:
            for row in self.rows:
                for kind in ('volume', 'roi', 'lesion'):
                    if not self.path(row, kind).is_file():
                        raise IoFailure(f'{row.case_id}: missing {kind} file '
                                        f'{self.path(row, kind)}')
        return self


def parse_manifest(text, root='.'):
    """Parse manifest CSV text."""
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    if header != MANIFEST_HEADER:
        raise SchemaError(f'manifest header {header} != {MANIFEST_HEADER}')
    rows = []
    for line_no, values in enumerate(reader, start=2):
        if not values:
            continue
        try:
            case_id, label, volume, roi, lesion, seed = values
            rows.append(ManifestRow(case_id, int(label), volume, roi, lesion, int(seed)))
        except ValueError as exc:
            raise SchemaError(f'manifest line {line_no}: {exc}') from exc
        if rows[-1].label not in (0, 1):
            raise SchemaError(f'manifest line {line_no}: label must be 0 or 1')
    return CohortManifest(rows, Path(root))


def read_manifest(path):
    """Read a manifest file; paths resolve against its directory."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise IoFailure(f'cannot read manifest {path}: {exc}') from exc
    return parse_manifest(text, path.parent).validate()


def positive_count(n, prevalence):
    """Number of positive cases, round half away from zero."""
    return int(round_half_away(n * prevalence))


def _write_case(task):
    """Generate and save one case; runs in worker processes."""
    spec, out_dir, index, label, seed = task
    case_id = f'case_{index:04d}'
    volume, roi, lesion = generate_phantom(spec, label, seed)
    paths = {kind: f'{kind}/{case_id}.nii' for kind in ('volume', 'roi', 'lesion')}
    save_volume(out_dir / paths['volume'], volume)
    save_mask(out_dir / paths['roi'], roi)
    save_mask(out_dir / paths['lesion'], lesion)
    if (label == 1) != (lesion.count > 0):
        raise InvalidSpec(f'{case_id}: label {label} disagrees with lesion mask')
    return ManifestRow(case_id, label, paths['volume'], paths['roi'], paths['lesion'], seed)


def generate_cohort(n, prevalence, spec, seed, out_dir, jobs=1):
    """Generate n cases with exactly round(n * prevalence) positives."""
    if n < 2:
        raise InvalidSpec(f'cohort needs at least 2 cases, got {n}')
    if not 0.0 < prevalence < 1.0:
        raise InvalidSpec(f'prevalence must lie in (0, 1), got {prevalence}')
    spec.validate()
    out_dir = Path(out_dir)
    positives = positive_count(n, prevalence)
    rng = np.random.Generator(np.random.PCG64(int(seed) & MASK64))
    labels = np.zeros(n, dtype=np.int64)
    labels[rng.permutation(n)[:positives]] = 1
    tasks = [(spec, out_dir, i, int(labels[i]), mix_seed(seed, i)) for i in range(n)]
    log.info('Generating %d phantoms (%d positive) into %s', n, positives, out_dir)
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_write_case, tasks))
        else:
            rows = [_write_case(task) for task in tasks]
    except OSError as exc:
        raise IoFailure(f'cannot write cohort into {out_dir}: {exc}') from exc
    rows.sort(key=lambda row: row.case_id)
    manifest = CohortManifest(rows, out_dir)
    write_text_atomic(out_dir / 'manifest.csv', manifest.serialize())
    return manifest
