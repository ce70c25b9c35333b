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

"""Single-file NIfTI-1 volumes, masks and PGM heatmaps.

Voxel arrays are held as ``(nx, ny, nz)`` float64 arrays indexed ``[x, y, z]``;
on disk x varies fastest, which is numpy Fortran order.  Rounding in this
module is half away from zero.
"""
import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from core.errors import (BadHeader, BadMagic, DimensionMismatch, EmptyMask, NonFiniteData,
                         TruncatedFile, UnsupportedDatatype, UnsupportedDim,
                         UnsupportedEncoding)
from core.storage import read_bytes, write_bytes_atomic

log = logging.getLogger(__name__)

HEADER_SIZE = 348
VOX_OFFSET = 352
MAGIC = b'n+1\x00'
GZIP_MAGIC = b'\x1f\x8b'

# datatype code: (numpy kind, bitpix)
DATATYPES = {
    2: ('u1', 8),
    4: ('i2', 16),
    8: ('i4', 32),
    16: ('f4', 32),
    64: ('f8', 64),
}


def round_half_away(values):
    """Round half away from zero, elementwise."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


@dataclass(frozen=True, eq=False)
class Volume():
    """3D scalar grid in HU with per-axis spacing in mm."""

    voxels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    intensity_rescale: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        """Check the grid invariants."""
        voxels = np.asarray(self.voxels, dtype=np.float64)
        if voxels.ndim != 3 or min(voxels.shape) < 1:
            raise UnsupportedDim(f'volume must be 3D with positive dims, got {voxels.shape}')
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or not all(math.isfinite(s) and s > 0 for s in spacing):
            raise BadHeader(f'spacing must be three positive finite values, got {spacing}')
        if not np.isfinite(voxels).all():
            raise NonFiniteData('volume holds NaN or infinite voxels')
        object.__setattr__(self, 'voxels', voxels)
        object.__setattr__(self, 'spacing', spacing)

    @property
    def dims(self):
        """Return (nx, ny, nz)."""
        return tuple(int(n) for n in self.voxels.shape)

    @property
    def voxel_volume(self):
        """Physical volume of one voxel in mm^3."""
        return self.spacing[0] * self.spacing[1] * self.spacing[2]


@dataclass(frozen=True, eq=False)
class Mask():
    """Binary grid aligned to a Volume."""

    bits: np.ndarray
    spacing: tuple[float, float, float] = field(default=(1.0, 1.0, 1.0))

    def __post_init__(self):
        """Coerce to a 3D boolean array."""
        bits = np.asarray(self.bits).astype(bool)
        if bits.ndim != 3:
            raise UnsupportedDim(f'mask must be 3D, got {bits.shape}')
        object.__setattr__(self, 'bits', bits)
        object.__setattr__(self, 'spacing', tuple(float(s) for s in self.spacing))

    @property
    def dims(self):
        """Return (nx, ny, nz)."""
        return tuple(int(n) for n in self.bits.shape)

    @property
    def count(self):
        """Number of true voxels."""
        return int(self.bits.sum())

    def require_nonempty(self):
        """Raise EmptyMask when no voxel is set."""
        if not self.bits.any():
            raise EmptyMask('mask has no true voxel')
        return self


def check_aligned(volume, mask):
    """Raise DimensionMismatch unless volume and mask share dims."""
    if volume.dims != mask.dims:
        raise DimensionMismatch(f'volume dims {volume.dims} != mask dims {mask.dims}')


@dataclass(frozen=True, eq=False)
class Heatmap():
    """2D relevance grid in [0, 1], max 1 unless identically 0."""

    values: np.ndarray

    def __post_init__(self):
        """Check range and peak."""
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionMismatch(f'heatmap must be 2D, got {values.shape}')
        if not np.isfinite(values).all() or values.min(initial=0.0) < 0.0 \
                or values.max(initial=0.0) > 1.0:
            raise NonFiniteData('heatmap values must lie in [0, 1]')
        peak = values.max(initial=0.0)
        if peak != 0.0 and not math.isclose(peak, 1.0, abs_tol=1e-12):
            raise NonFiniteData(f'heatmap peak must be 1 or the map all zero, got {peak}')
        object.__setattr__(self, 'values', values)

    @property
    def dims(self):
        """Return (h, w)."""
        return tuple(int(n) for n in self.values.shape)

    @classmethod
    def from_relevance(cls, relevance):
        """Normalise a nonnegative map by its maximum."""
        relevance = np.maximum(np.asarray(relevance, dtype=np.float64), 0.0)
        peak = relevance.max(initial=0.0)
        if peak <= 0.0:
            return cls(np.zeros_like(relevance))
        return cls(np.minimum(relevance / peak, 1.0))


def _byte_order(data):
    """Pick the byte order whose sizeof_hdr is 348 and dim[0] in 1..7."""
    sized = None
    for order in ('<', '>'):
        sizeof_hdr = struct.unpack_from(f'{order}i', data, 0)[0]
        if sizeof_hdr != HEADER_SIZE:
            continue
        sized = order
        dim0 = struct.unpack_from(f'{order}h', data, 40)[0]
        if 1 <= dim0 <= 7:
            return order
    if sized is None:
        raise BadHeader('sizeof_hdr is not 348 in either byte order')
    raise UnsupportedDim('dim[0] outside 1..7')


def parse_nifti(data):
    """Decode a single-file NIfTI-1 byte string into a Volume."""
    data = bytes(data)
    if data[:2] == GZIP_MAGIC:
        raise UnsupportedEncoding('compressed NIfTI input is not supported')
    if len(data) < VOX_OFFSET:
        raise TruncatedFile(f'{len(data)} bytes is shorter than the {VOX_OFFSET} byte header')
    order = _byte_order(data)
    # magic 344:348
    if data[344:348] != MAGIC:
        raise BadMagic(f'magic {data[344:348]!r} is not {MAGIC!r}')
    # dim 40:56
    dim = struct.unpack_from(f'{order}8h', data, 40)
    # datatype 70:72
    datatype = struct.unpack_from(f'{order}h', data, 70)[0]
    if datatype not in DATATYPES:
        raise UnsupportedDatatype(f'datatype code {datatype} is not supported')
    if dim[0] != 3:
        raise UnsupportedDim(f'dim[0] is {dim[0]}, only 3D volumes are supported')
    dims = dim[1:4]
    if min(dims) < 1:
        raise BadHeader(f'non-positive dims {dims}')
    # pixdim 76:108, vox_offset 108, scl_slope 112, scl_inter 116
    pixdim = struct.unpack_from(f'{order}8f', data, 76)
    vox_offset, scl_slope, scl_inter = struct.unpack_from(f'{order}3f', data, 108)
    spacing = []
    for axis, size in enumerate(pixdim[1:4]):
        if size == 0.0:
            log.warning('pixdim[%d] is 0, using 1.0 mm', axis + 1)
            size = 1.0
        if not math.isfinite(size) or size < 0.0:
            raise BadHeader(f'pixdim[{axis + 1}] = {size} is not a valid spacing')
        spacing.append(float(size))
    if not math.isfinite(vox_offset) or vox_offset < VOX_OFFSET:
        raise BadHeader(f'vox_offset {vox_offset} is before the end of the header')
    offset = int(vox_offset)
    kind, _ = DATATYPES[datatype]
    dtype = np.dtype(order + kind)
    count = dims[0] * dims[1] * dims[2]
    if offset + count * dtype.itemsize > len(data):
        raise TruncatedFile(f'declared data needs {offset + count * dtype.itemsize} bytes, '
                            f'file has {len(data)}')
    if scl_slope == 0.0 or not math.isfinite(scl_slope):
        scl_slope = 1.0
    if not math.isfinite(scl_inter):
        scl_inter = 0.0
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=offset).astype(np.float64)
    with np.errstate(over='ignore', invalid='ignore'):
        voxels = raw * float(scl_slope) + float(scl_inter)
    if not np.isfinite(voxels).all():
        raise NonFiniteData('voxel data holds NaN or infinite values after rescale')
    log.debug('Parsed NIfTI dims=%s spacing=%s datatype=%d order=%s', dims, spacing, datatype,
              order)
    return Volume(voxels.reshape(dims, order='F'), tuple(spacing),
                  (float(scl_slope), float(scl_inter)))


def _header(dims, spacing, datatype):
    """Build a little-endian single-file header plus the empty extension block."""
    header = bytearray(VOX_OFFSET)
    struct.pack_into('<i', header, 0, HEADER_SIZE)
    struct.pack_into('<8h', header, 40, 3, *dims, 1, 1, 1, 1)
    struct.pack_into('<hh', header, 70, datatype, DATATYPES[datatype][1])
    struct.pack_into('<8f', header, 76, 1.0, *spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into('<3f', header, 108, float(VOX_OFFSET), 1.0, 0.0)
    # xyzt_units: mm
    header[123] = 2
    descrip = b'Fibrosis-Risk-Toolkit'
    header[148:148 + len(descrip)] = descrip
    header[344:348] = MAGIC
    return header


def write_nifti(volume):
    """Encode a Volume as little-endian float32 single-file NIfTI-1."""
    header = _header(volume.dims, volume.spacing, 16)
    return bytes(header) + volume.voxels.astype('<f4').tobytes(order='F')


def write_mask_nifti(mask):
    """Encode a Mask as uint8 single-file NIfTI-1."""
    header = _header(mask.dims, mask.spacing, 2)
    return bytes(header) + mask.bits.astype('u1').tobytes(order='F')


def parse_mask(data):
    """Decode a NIfTI byte string as a Mask (voxel > 0.5 is true)."""
    volume = parse_nifti(data)
    return Mask(volume.voxels > 0.5, volume.spacing)


def _encode_pgm(values):
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape
    payload = round_half_away(255.0 * np.clip(values, 0.0, 1.0)).astype(np.uint8)
    return f'P5\n{width} {height}\n255\n'.encode('ascii') + payload.tobytes(order='C')


def write_pgm(heatmap):
    """Encode a Heatmap as binary PGM, maxval 255, row major."""
    return _encode_pgm(heatmap.values)


def write_overlay_pgm(image, heatmap, alpha=0.5):
    """Blend a [0, 1] grayscale image with a heatmap into one PGM."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != heatmap.values.shape:
        raise DimensionMismatch(f'image {image.shape} and heatmap {heatmap.dims} differ')
    blended = (1.0 - alpha) * np.clip(image, 0.0, 1.0) + alpha * heatmap.values
    return _encode_pgm(blended)


def load_volume(path):
    """Read a volume file."""
    return parse_nifti(read_bytes(path))


def load_mask(path):
    """Read a mask file."""
    return parse_mask(read_bytes(path))


def save_volume(path, volume):
    """Write a volume file atomically."""
    return write_bytes_atomic(path, write_nifti(volume))


def save_mask(path, mask):
    """Write a mask file atomically."""
    return write_bytes_atomic(path, write_mask_nifti(mask))
