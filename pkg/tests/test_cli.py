"""End-to-end subcommands on a small cohort."""
import json

import numpy as np
import pytest
import yaml

from core.phantom import read_manifest
from core.radiomics import feature_header, format_feature_row, read_feature_csv
from ui.main_cli import main

SMALL = {
    'seed': 3,
    'phantom': {'n': 20, 'prevalence': 0.5, 'dims': [24, 24, 24], 'lesion_count': [1, 2],
                'lesion_radius': [3, 5], 'noise_smoothing': 1.0},
    'split': {'test_frac': 0.1, 'k': 3},
    'models': {'lasso': {'iters': 200}, 'svm': {'epochs': 50}, 'forest': {'trees': 10},
               'gbt': {'trees': 20}},
    'cnn': {'presets': ['tiny_plain'], 'epochs': 2, 'input_side': 16, 'slices_per_case': 2},
}


def write_config(directory, values=None):
    path = directory / 'small.yaml'
    path.write_text(yaml.safe_dump(values or SMALL))
    return str(path)


@pytest.fixture(scope='module')
def run(tmp_path_factory):
    """A run directory after phantom and extract."""
    root = tmp_path_factory.mktemp('cli')
    config = write_config(root)
    out = root / 'run'
    assert main(['--config', config, '--out', str(out), 'phantom']) == 0
    assert main(['--config', config, '--out', str(out), 'extract']) == 0
    return config, out


def test_phantom_counts(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / 'run'
    assert main(['--config', config, '--out', str(out), 'phantom', '--n', '10',
                 '--prevalence', '0.5']) == 0
    manifest = read_manifest(out / 'cohort' / 'manifest.csv')
    assert len(manifest.rows) == 10
    assert int(manifest.labels().sum()) == 5
    assert '10 cases, 5 positive' in capsys.readouterr().out
    assert (out / 'config.yaml').is_file()


def test_phantom_refuses_to_overwrite(run, capsys):
    config, out = run
    assert main(['--config', config, '--out', str(out), 'phantom']) == 1
    assert '--force' in capsys.readouterr().err


def test_phantom_force_is_deterministic(run):
    config, out = run
    before = (out / 'cohort' / 'manifest.csv').read_bytes()
    volume = (out / 'cohort' / 'volume' / 'case_0004.nii').read_bytes()
    assert main(['--config', config, '--out', str(out), '--force', 'phantom']) == 0
    assert (out / 'cohort' / 'manifest.csv').read_bytes() == before
    assert (out / 'cohort' / 'volume' / 'case_0004.nii').read_bytes() == volume


def test_extract_table(run):
    _, out = run
    table = read_feature_csv(out / 'features.csv')
    assert len(table.case_ids) == 20
    assert table.matrix.shape == (20, 111)
    assert json.loads((out / 'features.failures.json').read_text()) == {'failed': {}}


def test_extract_resume_keeps_bytes(run):
    config, out = run
    before = (out / 'features.csv').read_bytes()
    assert main(['--config', config, '--out', str(out), '--resume', 'extract']) == 0
    assert (out / 'features.csv').read_bytes() == before


def test_extract_flags_corrupt_volume(tmp_path, capsys):
    config = write_config(tmp_path)
    out = tmp_path / 'run'
    assert main(['--config', config, '--out', str(out), 'phantom', '--n', '4']) == 0
    broken = out / 'cohort' / 'volume' / 'case_0002.nii'
    broken.write_bytes(broken.read_bytes()[:100])
    assert main(['--config', config, '--out', str(out), 'extract']) == 2
    assert 'case_0002' in capsys.readouterr().err
    failures = json.loads((out / 'features.failures.json').read_text())['failed']
    assert list(failures) == ['case_0002']
    assert failures['case_0002'].startswith('TruncatedFile')
    assert read_feature_csv(out / 'features.csv').case_ids == ['case_0000', 'case_0001',
                                                               'case_0003']


def test_train_radiomics_report(run):
    config, out = run
    assert main(['--config', config, '--out', str(out), 'train-radiomics']) == 0
    report = json.loads((out / 'reports' / 'radiomics.json').read_text())
    assert [e['model'] for e in report['evaluations']] == ['lasso', 'svm', 'random_forest',
                                                           'gbt']
    for evaluation in report['evaluations']:
        assert len(evaluation['folds']) == 3
        assert 0.0 <= evaluation['cv']['auc'] <= 1.0
        assert evaluation['holdout']['count'] == 2
    for name in ('lasso', 'svm', 'random_forest', 'gbt'):
        assert (out / 'models' / f'{name}.json').is_file()
    markdown = (out / 'reports' / 'radiomics.md').read_text()
    assert '| Model | CV Accuracy (%) | CV AUC (%) | Test Accuracy (%) | Test AUC (%) |' \
        in markdown
    assert (out / 'reports' / 'radiomics.timings.json').is_file()

    first = {name: (out / path).read_bytes() for name, path in (
        ('report', 'reports/radiomics.json'), ('markdown', 'reports/radiomics.md'),
        ('model', 'models/gbt.json'))}
    assert main(['--config', config, '--out', str(out), 'train-radiomics']) == 0
    for name, path in (('report', 'reports/radiomics.json'), ('markdown', 'reports/radiomics.md'),
                       ('model', 'models/gbt.json')):
        assert (out / path).read_bytes() == first[name], name


def test_train_cnn_gradcam_and_evaluate(run, capsys):
    config, out = run
    assert main(['--config', config, '--out', str(out), 'train-cnn']) == 0
    checkpoint = out / 'checkpoints' / 'tiny_plain.json'
    assert checkpoint.is_file()
    report = json.loads((out / 'reports' / 'cnn.json').read_text())
    evaluation = report['evaluations'][0]
    assert evaluation['model'] == 'tiny_plain'
    assert evaluation['holdout']['count'] == 2
    assert len(evaluation['curve']) == 2

    manifest = read_manifest(out / 'cohort' / 'manifest.csv')
    case = next(row.case_id for row in manifest.rows if row.label == 1)
    capsys.readouterr()
    assert main(['--config', config, '--out', str(out), 'gradcam', '--checkpoint',
                 str(checkpoint), '--case', case]) == 0
    record = json.loads((out / 'reports' / f'gradcam_{case}.json').read_text())
    assert len(record['slices']) == 2
    for item in record['slices']:
        data = (out / item['heatmap']).read_bytes()
        assert data.startswith(b'P5\n16 16\n255\n')
        assert item['localisation'] is None or 0.0 <= item['localisation'] <= 1.0
    assert f'{case} slice' in capsys.readouterr().out

    assert main(['--config', config, '--out', str(out), 'evaluate']) == 0
    summary = (out / 'reports' / 'summary.md').read_text()
    assert 'Performance of deep learning models' in summary
    assert 'tiny_plain' in summary


def test_gradcam_unknown_case(run):
    config, out = run
    assert main(['--config', config, '--out', str(out), 'gradcam', '--checkpoint',
                 str(out / 'checkpoints' / 'missing.json'), '--case', 'case_9999']) == 2


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 1
    assert main(['--out', str(tmp_path), 'dance']) == 1
    assert main(['--out', str(tmp_path), 'evaluate']) == 2
    bad = write_config(tmp_path, {'phantom': {'colour': 'red'}})
    assert main(['--config', bad, '--out', str(tmp_path), 'phantom']) == 1
    assert capsys.readouterr().err.count('error:') == 4


def test_train_radiomics_single_class(tmp_path):
    row = np.ones(111)
    lines = [feature_header()] + [format_feature_row(f'c{i}', 1, row * i) for i in range(8)]
    path = tmp_path / 'features.csv'
    path.write_text('\n'.join(lines) + '\n')
    assert main(['--out', str(tmp_path), 'train-radiomics', '--features', str(path)]) == 2
