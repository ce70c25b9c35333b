"""Shared fixtures: small phantoms, cohorts and hand-built NIfTI bytes."""
import struct

import numpy as np
import pytest

from core.phantom import PhantomSpec, generate_cohort
from core.volume_io import Mask, Volume


def small_spec(**values):
    """A 24^3 phantom spec with lesions that fit its lung ellipsoid."""
    spec = PhantomSpec(dims=(24, 24, 24), lesion_count=(1, 2), lesion_radius=(3, 5),
                       noise_smoothing=1.0)
    return spec.add_values(values).validate()


def nifti_bytes(dims, values, datatype=4, bitpix=16, fmt='<h', pixdim=(1.0, 1.0, 1.0),
                slope=1.0, inter=0.0):
    """Single-file NIfTI-1 bytes written field by field."""
    header = bytearray(352)
    struct.pack_into('<i', header, 0, 348)
    struct.pack_into('<8h', header, 40, 3, dims[0], dims[1], dims[2], 1, 1, 1, 1)
    struct.pack_into('<h', header, 70, datatype)
    struct.pack_into('<h', header, 72, bitpix)
    struct.pack_into('<8f', header, 76, 1.0, *pixdim, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into('<f', header, 108, 352.0)
    struct.pack_into('<f', header, 112, slope)
    struct.pack_into('<f', header, 116, inter)
    header[344:348] = b'n+1\x00'
    payload = b''.join(struct.pack(fmt, v) for v in values)
    return bytes(header) + payload


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def ramp_fixture():
    """2x2x2 int16 volume holding 0..7 in file order."""
    return nifti_bytes((2, 2, 2), range(8))


@pytest.fixture
def cube_case():
    """Volume and mask of a 3x3x3 cube inside a 7x7x7 grid."""
    voxels = np.arange(7 ** 3, dtype=np.float64).reshape(7, 7, 7)
    bits = np.zeros((7, 7, 7), dtype=bool)
    bits[2:5, 2:5, 2:5] = True
    return Volume(voxels), Mask(bits)


@pytest.fixture(scope='session')
def small_cohort(tmp_path_factory):
    """Twelve 24^3 phantoms, half positive, on disk."""
    out = tmp_path_factory.mktemp('cohort')
    return generate_cohort(12, 0.5, small_spec(), 5, out)


@pytest.fixture
def make_spec():
    """Factory of small phantom specs."""
    return small_spec


@pytest.fixture
def make_nifti():
    """Factory of hand-built NIfTI bytes."""
    return nifti_bytes
