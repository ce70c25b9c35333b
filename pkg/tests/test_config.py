"""Run configuration loading."""
import pytest
import yaml

from core.config import MODEL_DEFAULTS, RunConfig, load_config
from core.errors import ConfigError


def test_defaults():
    config = load_config()
    assert config.seed == 42
    assert config.n == 347 and config.prevalence == 0.449
    assert config.split.test_frac == 0.10 and config.split.k == 5
    assert config.radiomics.ng == 32
    assert config.models == MODEL_DEFAULTS
    assert config.models is not MODEL_DEFAULTS
    assert config.cnn.presets == ['tiny_plain', 'tiny_res', 'tiny_dense']
    assert config.train_config().seed == 42


def test_yaml_then_overrides(tmp_path):
    path = tmp_path / 'run.yaml'
    path.write_text(yaml.safe_dump({
        'seed': 7,
        'phantom': {'n': 30, 'dims': [32, 32, 32]},
        'models': {'lasso': {'lam': 0.1}},
        'cnn': {'epochs': 5, 'presets': ['tiny_res']},
        'split': {'k': 3},
    }))
    config = load_config(path, {'seed': 9, 'phantom': {'prevalence': 0.3}})
    assert config.seed == 9
    assert config.n == 30 and config.prevalence == 0.3
    assert config.phantom.dims == (32, 32, 32)
    assert config.models['lasso'] == {'lam': 0.1, 'iters': 2000, 'step': 1.0}
    assert config.cnn.train.epochs == 5
    assert config.cnn.presets == ['tiny_res']
    assert config.split.k == 3
    assert config.train_config().seed == 9


def test_yaml_echo_reloads(tmp_path):
    config = load_config(overrides={'seed': 5, 'cnn': {'batch_size': 4}})
    path = tmp_path / 'config.yaml'
    path.write_text(config.to_yaml())
    assert load_config(path).serialize() == config.serialize()


@pytest.mark.parametrize('values', [
    {'colour': 'red'},
    {'phantom': {'shape': 'cube'}},
    {'models': {'knn': {}}},
    {'models': {'lasso': {'alpha': 1}}},
    {'radiomics': {'bins': 16}},
    {'split': {'k': 1}},
    {'cnn': {'presets': ['vgg']}},
    {'cnn': {'seed': 3}},
    {'cnn': {'input_side': 30}},
    {'gradcam': {'target_class': 2}},
    {'seed': -1},
    {'phantom': {'prevalence': 1.0}},
])
def test_bad_values(values):
    with pytest.raises(ConfigError):
        load_config(overrides=values)


def test_unreadable_and_invalid_yaml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'missing.yaml')
    path = tmp_path / 'bad.yaml'
    path.write_text('seed: [1\n')
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        RunConfig().parse_config('- 1\n- 2\n')
