"""Full-size phantom studies; run with ``pytest -m slow``."""
import numpy as np
import pytest

from core.config import load_config
from core.phantom import generate_cohort
from core.radiomics import FEATURE_NAMES, FeatureTable
from ui import experiments

pytestmark = pytest.mark.slow


@pytest.fixture(scope='module')
def cohort(tmp_path_factory):
    config = load_config(overrides={'jobs': 4})
    manifest = generate_cohort(config.n, config.prevalence, config.phantom, config.seed,
                               tmp_path_factory.mktemp('acceptance'), config.jobs)
    return config, manifest


def test_radiomics_study(cohort):
    config, manifest = cohort
    results = experiments.extract_cases(manifest, manifest.rows, config.radiomics, config.jobs)
    assert not any(error for _, error in results.values())
    matrix = np.array([results[row.case_id][0].values for row in manifest.rows])
    table = FeatureTable([row.case_id for row in manifest.rows], manifest.labels(),
                         FEATURE_NAMES, matrix)
    reports, _ = experiments.radiomics_study(table, config)
    assert [r.model for r in reports] == list(experiments.RADIOMICS_MODELS)
    lasso = reports[0]
    baseline = float(manifest.labels().mean())
    assert lasso.cv.auc >= 0.90
    assert lasso.cv.accuracy > baseline


def test_cnn_study_and_localisation(cohort, tmp_path):
    config, manifest = cohort
    config.add_values({'cnn': {'presets': ['tiny_res', 'tiny_dense'], 'epochs': 30}})
    dataset = experiments.slice_dataset(manifest, config.cnn.slices_per_case,
                                        config.cnn.input_side)
    evaluations, checkpoints = experiments.cnn_study(manifest, dataset, config.cnn.presets,
                                                     config)
    for evaluation in evaluations:
        assert evaluation['holdout']['accuracy'] >= 0.85, evaluation['model']
        losses = [row['loss'] for row in evaluation['curve']]
        assert losses[4] < losses[0]

    # localisation is scored on fresh phantoms from an unseen master seed
    unseen = generate_cohort(40, 0.5, config.phantom, config.seed + 1000, tmp_path, config.jobs)
    chosen = [row for row in unseen.rows if row.label == 1]
    assert len(chosen) >= 20
    scores = []
    for row in chosen:
        for item in experiments.gradcam_case(checkpoints['tiny_dense'], unseen, row, config):
            if item.score is not None:
                scores.append(item.score)
    assert scores
    assert np.mean(scores) >= 0.6
