"""Slice ranking, extraction and patient-level voting."""
import numpy as np
import pytest

from core.errors import DimensionMismatch, EmptyList, EmptyMask
from core.slices import (extract_slices, majority_vote, normalize_range, rank_slices,
                         resize)
from core.volume_io import Mask, Volume


def test_rank_single_slice():
    bits = np.zeros((6, 6, 10), dtype=bool)
    bits[1:4, 1:4, 5] = True
    assert rank_slices(Mask(bits)) == [5]


def test_rank_by_area_ties_lowest():
    bits = np.zeros((3, 3, 5), dtype=bool)
    for z, area in enumerate([0, 4, 9, 9, 1]):
        bits.reshape(9, 5)[:area, z] = True
    assert rank_slices(Mask(bits), 3) == [2, 3, 1]


def test_extract_slices():
    voxels = np.arange(8 * 8 * 4, dtype=np.float64).reshape(8, 8, 4)
    bits = np.zeros((8, 8, 4), dtype=bool)
    bits[2:6, 1:7, 1] = True
    bits[3:5, 3:5, 2] = True
    slices = extract_slices(Volume(voxels), Mask(bits), k=5, side=16)
    assert [s.index for s in slices] == [1, 2]
    assert slices[0].box == (2, 6, 1, 7)
    assert slices[0].image.shape == (16, 16)
    assert slices[0].image.min() == 0.0 and slices[0].image.max() == pytest.approx(1.0)
    lesion = slices[0].crop(bits[:, :, 1].astype(float))
    np.testing.assert_allclose(lesion, 1.0)


def test_constant_slice_is_zero():
    bits = np.zeros((4, 4, 2), dtype=bool)
    bits[:, :, 0] = True
    slices = extract_slices(Volume(np.full((4, 4, 2), -700.0)), Mask(bits), side=8)
    assert not slices[0].image.any()


def test_extract_errors():
    with pytest.raises(EmptyMask):
        extract_slices(Volume(np.zeros((4, 4, 2))), Mask(np.zeros((4, 4, 2))))
    with pytest.raises(DimensionMismatch):
        extract_slices(Volume(np.zeros((4, 4, 2))), Mask(np.ones((4, 4, 3))))


def test_resize_and_normalize():
    image = np.array([[0.0, 1.0], [2.0, 3.0]])
    big = resize(image, (3, 3))
    assert big[0, 0] == 0.0 and big[2, 2] == 3.0
    assert big[1, 1] == pytest.approx(1.5)
    np.testing.assert_array_equal(normalize_range(image), image / 3.0)


@pytest.mark.parametrize('votes,expected', [([1, 1, 0], 1), ([1, 0], 1), ([0, 0, 0, 1], 0),
                                            ([0], 0)])
def test_majority_vote(votes, expected):
    assert majority_vote(votes) == expected


def test_majority_vote_errors():
    with pytest.raises(EmptyList):
        majority_vote([])
    with pytest.raises(ValueError):
        majority_vote([2])
