"""Discretisation, first-order and shape features, the full extractor and the CSV."""
import math

import numpy as np
import pytest
from scipy import stats

from core.errors import DimensionMismatch, EmptyMask, SchemaError
from core.phantom import PhantomSpec, generate_phantom
from core.radiomics import (FEATURE_NAMES, RadiomicsSettings, discretize, extract_all,
                            feature_header, first_order_features, format_feature_row,
                            largest_slice, parse_feature_csv, read_feature_csv,
                            shape_features_2d, shape_features_3d, write_feature_csv)
from core.volume_io import Mask, Volume


def row_case(values):
    """Volume and full mask of a 1D row of values."""
    values = np.asarray(values, dtype=np.float64)
    return Volume(values.reshape(-1, 1, 1)), Mask(np.ones((values.size, 1, 1)))


def test_registry_size():
    assert len(FEATURE_NAMES) == 111
    assert len(set(FEATURE_NAMES)) == 111
    families = {name.split('_')[0] for name in FEATURE_NAMES}
    assert families == {'firstorder', 'shape3d', 'shape2d', 'glcm', 'glrlm', 'glszm', 'ngtdm',
                        'gldm'}


@pytest.mark.parametrize('values,ng,expected', [
    ([0, 10], 2, [1, 2]),
    ([3, 3, 3], 8, [1, 1, 1]),
    ([0, 2.5, 5, 7.5, 10], 4, [1, 2, 3, 4, 4]),
])
def test_discretize(values, ng, expected):
    volume, mask = row_case(values)
    assert discretize(volume, mask, ng).levels.ravel().tolist() == expected


def test_discretize_outside_roi_is_zero(cube_case):
    volume, mask = cube_case
    levels = discretize(volume, mask, 32).levels
    assert (levels[~mask.bits] == 0).all()
    assert levels[mask.bits].min() == 1 and levels[mask.bits].max() == 32


def test_first_order_closed_form():
    features = first_order_features(*row_case([1, 2, 3]))
    assert features['Mean'] == 2.0
    assert features['Energy'] == 14.0
    assert features['Variance'] == pytest.approx(2 / 3)
    assert features['Range'] == 2.0
    assert features['Minimum'] == 1.0 and features['Maximum'] == 3.0


def test_first_order_constant():
    features = first_order_features(*row_case([5, 5, 5, 5]))
    assert features['Entropy'] == 0.0
    assert features['Uniformity'] == 1.0
    assert features['Range'] == 0.0
    assert features['Skewness'] == 0.0 and features['Kurtosis'] == 0.0


def test_first_order_oracle():
    x = np.random.default_rng(3).uniform(-100.0, 100.0, 1000)
    features = first_order_features(*row_case(x))
    levels = np.minimum(32, np.floor(32 * (x - x.min()) / (x.max() - x.min())) + 1)
    p = np.array([np.mean(levels == k) for k in range(1, 33)])
    p10, p90 = np.percentile(x, 10), np.percentile(x, 90)
    robust = x[(x >= p10) & (x <= p90)]
    expected = {
        'Energy': float(np.sum(x ** 2)),
        'TotalEnergy': float(np.sum(x ** 2)),
        'Entropy': float(-sum(v * math.log2(v) for v in p if v > 0)),
        'Minimum': x.min(),
        'Percentile10': p10,
        'Percentile90': p90,
        'Maximum': x.max(),
        'Mean': x.mean(),
        'Median': np.median(x),
        'InterquartileRange': np.percentile(x, 75) - np.percentile(x, 25),
        'Range': x.max() - x.min(),
        'MeanAbsoluteDeviation': np.mean(np.abs(x - x.mean())),
        'RobustMeanAbsoluteDeviation': np.mean(np.abs(robust - robust.mean())),
        'RootMeanSquared': math.sqrt(np.mean(x ** 2)),
        'StandardDeviation': x.std(),
        'Skewness': stats.skew(x),
        'Kurtosis': stats.kurtosis(x, fisher=False),
        'Variance': x.var(),
        'Uniformity': float(np.sum(p ** 2)),
    }
    assert list(features) == list(expected)
    for name, value in expected.items():
        assert features[name] == pytest.approx(value, rel=1e-9, abs=1e-9), name


def test_total_energy_scales_with_voxel_volume():
    volume = Volume(np.array([1.0, 2.0]).reshape(2, 1, 1), (2.0, 1.0, 0.5))
    features = first_order_features(volume, Mask(np.ones((2, 1, 1)), volume.spacing))
    assert features['TotalEnergy'] == features['Energy'] == 5.0


def test_shape_single_voxel():
    features, flags = shape_features_3d(Mask(np.ones((1, 1, 1))), (1.0, 1.0, 1.0))
    assert features['VoxelVolume'] == 1.0
    assert features['SurfaceArea'] == 6.0
    assert features['SurfaceVolumeRatio'] == 6.0
    assert flags == ('shape3d_degenerate_axes',)
    assert features['Elongation'] == 0.0


def test_shape_cube():
    bits = np.zeros((4, 4, 4), dtype=bool)
    bits[1:3, 1:3, 1:3] = True
    features, flags = shape_features_3d(Mask(bits), (1.0, 1.0, 1.0))
    assert features['VoxelVolume'] == 8.0
    assert features['SurfaceArea'] == 24.0
    assert features['Sphericity'] == pytest.approx((36 * math.pi * 64) ** (1 / 3) / 24,
                                                   abs=1e-12)
    assert features['Maximum3DDiameter'] == pytest.approx(math.sqrt(3))
    assert features['Elongation'] == pytest.approx(1.0)
    assert flags == ()


def test_shape_anisotropic_spacing():
    features, _ = shape_features_3d(Mask(np.ones((1, 1, 1))), (1.0, 2.0, 3.0))
    assert features['VoxelVolume'] == 6.0
    assert features['SurfaceArea'] == 2 * (2 + 3 + 6)


def test_shape_properties_on_random_masks():
    rng = np.random.default_rng(17)
    for _ in range(100):
        bits = rng.random((6, 6, 6)) < 0.4
        bits[3, 3, 3] = True
        features, _ = shape_features_3d(Mask(bits), (1.0, 1.0, 1.0))
        assert 0.0 <= features['Elongation'] <= 1.0
        assert 0.0 <= features['Flatness'] <= 1.0
        assert features['Maximum3DDiameter'] >= features['Maximum2DDiameterSlice'] - 1e-12
        assert features['Sphericity'] > 0.0


def test_shape_2d_pixel_and_square():
    single = Mask(np.ones((1, 1, 1)))
    features = shape_features_2d(single, (1.0, 1.0, 1.0))
    assert features['PixelSurface'] == 1.0
    assert features['Perimeter'] == 4.0
    assert features['Sphericity2D'] == pytest.approx(2 * math.sqrt(math.pi) / 4)
    square = np.zeros((4, 4, 1), dtype=bool)
    square[1:3, 1:3] = True
    features = shape_features_2d(Mask(square), (1.0, 1.0, 1.0))
    assert features['Perimeter'] == 8.0
    assert features['PixelSurface'] == 4.0


def test_shape_2d_disk():
    x, y = np.meshgrid(np.arange(25) - 12, np.arange(25) - 12, indexing='ij')
    disk = ((x ** 2 + y ** 2) <= 100)[:, :, None]
    features = shape_features_2d(Mask(disk), (1.0, 1.0, 1.0))
    # edge counting measures a staircase boundary, so a raster disk sits near pi/4
    assert 0.70 <= features['Sphericity2D'] <= 0.80
    assert features['Elongation'] == pytest.approx(1.0, abs=1e-9)
    assert features['MaximumDiameter'] == pytest.approx(20.0)


def test_largest_slice_ties_lowest():
    bits = np.zeros((3, 3, 4), dtype=bool)
    bits[:2, :2, 1] = True
    bits[:2, :2, 3] = True
    assert largest_slice(Mask(bits)) == 1


def test_extract_all_cube(cube_case):
    vector = extract_all(*cube_case)
    assert len(vector) == 111
    assert vector.names == FEATURE_NAMES
    assert np.isfinite(vector.values).all()
    again = extract_all(*cube_case)
    assert again.values.tobytes() == vector.values.tobytes()


def test_extract_errors(cube_case):
    volume, _ = cube_case
    with pytest.raises(EmptyMask):
        extract_all(volume, Mask(np.zeros((7, 7, 7))))
    with pytest.raises(DimensionMismatch):
        extract_all(volume, Mask(np.ones((7, 7, 6))))


def test_texture_affine_invariance(cube_case):
    volume, mask = cube_case
    base = extract_all(volume, mask).as_dict()
    moved = extract_all(Volume(3.0 * volume.voxels - 200.0), mask).as_dict()
    for name in FEATURE_NAMES:
        if name.split('_')[0] in ('glcm', 'glrlm', 'glszm', 'ngtdm', 'gldm'):
            assert moved[name] == pytest.approx(base[name], rel=1e-9, abs=1e-12), name


def test_positive_case_has_higher_contrast():
    spec = PhantomSpec()
    settings = RadiomicsSettings()
    positive = extract_all(*generate_phantom(spec, 1, 7)[:2], settings).as_dict()
    negative = extract_all(*generate_phantom(spec, 0, 7)[:2], settings).as_dict()
    assert positive['glcm_Contrast'] > negative['glcm_Contrast']


def test_csv(tmp_path, cube_case):
    vector = extract_all(*cube_case)
    path = write_feature_csv(tmp_path / 'features.csv', ['a', 'b'], [0, 1], [vector, vector])
    table = read_feature_csv(path)
    assert table.case_ids == ['a', 'b']
    assert table.labels.tolist() == [0, 1]
    assert table.matrix.shape == (2, 111)
    np.testing.assert_array_equal(table.matrix[0], vector.values)
    assert table.row_text(1) == format_feature_row('b', 1, vector.values)
    assert path.read_text().splitlines()[0] == feature_header()


def test_csv_schema_errors():
    header = feature_header()
    with pytest.raises(SchemaError):
        parse_feature_csv('case_id,label\n')
    with pytest.raises(SchemaError):
        parse_feature_csv(header + '\na,0,1.0\n')
    row = ','.join(['1.0'] * 111)
    with pytest.raises(SchemaError):
        parse_feature_csv(f'{header}\na,2,{row}\n')
    with pytest.raises(SchemaError):
        parse_feature_csv(f'{header}\na,0,{row}\na,1,{row}\n')
    nan_row = ','.join(['nan'] + ['1.0'] * 110)
    with pytest.raises(SchemaError):
        parse_feature_csv(f'{header}\na,0,{nan_row}\n')


def test_translation_invariance(rng):
    block = rng.normal(-700.0, 150.0, size=(8, 8, 8))
    bits = rng.random((8, 8, 8)) < 0.6
    bits[4, 4, 4] = True
    voxels = np.full((14, 14, 14), -1000.0)
    roi = np.zeros((14, 14, 14), dtype=bool)
    voxels[1:9, 1:9, 1:9] = block
    roi[1:9, 1:9, 1:9] = bits
    base = extract_all(Volume(voxels), Mask(roi)).as_dict()
    shift = (3, 2, 4)
    moved = extract_all(Volume(np.roll(voxels, shift, axis=(0, 1, 2))),
                        Mask(np.roll(roi, shift, axis=(0, 1, 2)))).as_dict()
    for name in FEATURE_NAMES:
        if not name.startswith('shape'):
            assert moved[name] == pytest.approx(base[name], rel=1e-9, abs=1e-9), name


def test_shape_line_keeps_major_axis(caplog):
    features, flags = shape_features_3d(Mask(np.ones((1, 1, 10))), (1.0, 1.0, 1.0))
    assert flags == ('shape3d_degenerate_axes',)
    assert features['MajorAxisLength'] == pytest.approx(4.0 * math.sqrt(8.25))
    assert features['MinorAxisLength'] == 0.0
    assert features['LeastAxisLength'] == 0.0
    assert features['Elongation'] == 0.0
    assert features['Flatness'] == 0.0
    assert 'degenerate axes' in caplog.text
