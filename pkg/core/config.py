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

"""Run configuration."""
import copy
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from core.errors import ConfigError, InvalidSpec
from core.network import PRESETS
from core.phantom import PhantomSpec
from core.radiomics import RadiomicsSettings
from core.training import TrainConfig

log = logging.getLogger(__name__)

MODEL_DEFAULTS = {
    'lasso': {'lam': 0.01, 'iters': 2000, 'step': 1.0},
    'svm': {'C': 1.0, 'epochs': 500},
    'forest': {'trees': 100, 'max_depth': 6, 'mtry': None},
    'gbt': {'trees': 200, 'depth': 2, 'nu': 0.1, 'subsample': 1.0},
}
DEFAULT_PRESETS = ['tiny_plain', 'tiny_res', 'tiny_dense']


def _update(section, obj, values):
    """Set known fields of a dataclass from a dict."""
    names = {f.name for f in fields(obj)}
    for key, value in values.items():
        if key not in names:
            raise ConfigError(f'unknown {section} setting {key!r}')
        object.__setattr__(obj, key, value)


@dataclass
class SplitSettings():
    """Holdout fraction and fold count."""

    test_frac: float = 0.10
    k: int = 5


@dataclass
class CnnSettings():
    """Presets, slice sampling and the optimiser settings."""

    train: TrainConfig = field(default_factory=TrainConfig)
    presets: list[str] = field(default_factory=lambda: list(DEFAULT_PRESETS))
    slices_per_case: int = 5
    input_side: int = 64


@dataclass
class GradcamSettings():
    """Target class and lesion dilation of the localisation score."""

    target_class: int = 1
    dilation: int = 2
    top_fraction: float = 0.1


@dataclass
class RunConfig():    # pylint: disable=too-many-instance-attributes
    """Dataclass representation of one experiment's settings."""

    seed: int = 42
    out: str = 'run'
    jobs: int = 1
    n: int = 347
    prevalence: float = 0.449
    phantom: PhantomSpec = field(default_factory=PhantomSpec)
    radiomics: RadiomicsSettings = field(default_factory=RadiomicsSettings)
    split: SplitSettings = field(default_factory=SplitSettings)
    models: dict = field(default_factory=lambda: copy.deepcopy(MODEL_DEFAULTS))
    cnn: CnnSettings = field(default_factory=CnnSettings)
    gradcam: GradcamSettings = field(default_factory=GradcamSettings)

    def add_values(self, values):    # pylint: disable=too-many-branches
        """Add values from a nested dict, then validate."""
        if not isinstance(values, dict):
            raise ConfigError('configuration must be a mapping')
        for key, value in values.items():
            if key in ('seed', 'out', 'jobs'):
                setattr(self, key, value)
            elif key == 'phantom':
                value = dict(value or {})
                self.n = value.pop('n', self.n)
                self.prevalence = value.pop('prevalence', self.prevalence)
                try:
                    self.phantom.add_values(value)
                except InvalidSpec as exc:
                    raise ConfigError(str(exc)) from exc
            elif key == 'radiomics':
                try:
                    self.radiomics = replace(self.radiomics, **(value or {}))
                except TypeError as exc:
                    raise ConfigError(f'bad radiomics setting: {exc}') from exc
            elif key == 'split':
                _update('split', self.split, value or {})
            elif key == 'models':
                for model, settings in (value or {}).items():
                    if model not in MODEL_DEFAULTS:
                        raise ConfigError(f'unknown model {model!r}')
                    for name, setting in (settings or {}).items():
                        if name not in MODEL_DEFAULTS[model]:
                            raise ConfigError(f'unknown {model} setting {name!r}')
                        self.models[model][name] = setting
            elif key == 'cnn':
                value = dict(value or {})
                for name in ('presets', 'slices_per_case', 'input_side'):
                    if name in value:
                        setattr(self.cnn, name, value.pop(name))
                if 'seed' in value:
                    raise ConfigError('cnn seed follows the master seed')
                _update('cnn', self.cnn.train, value)
            elif key == 'gradcam':
                _update('gradcam', self.gradcam, value or {})
            else:
                raise ConfigError(f'unknown configuration section {key!r}')
        return self.validate()

    def __getitem__(self, key):
        """Implement __getitem__."""
        return super().__getattribute__(key)

    def validate(self):    # pylint: disable=too-many-branches
        """Raise ConfigError on out-of-range values."""
        checks = [
            (isinstance(self.seed, int) and self.seed >= 0, 'seed must be a nonnegative integer'),
            (isinstance(self.jobs, int) and self.jobs >= 1, 'jobs must be >= 1'),
            (isinstance(self.n, int) and self.n >= 2, 'phantom.n must be >= 2'),
            (0.0 < self.prevalence < 1.0, 'phantom.prevalence must lie in (0, 1)'),
            (self.radiomics.ng >= 2, 'radiomics.ng must be >= 2'),
            (self.radiomics.glcm_distance >= 1, 'radiomics.glcm_distance must be >= 1'),
            (self.radiomics.gldm_alpha >= 0, 'radiomics.gldm_alpha must be >= 0'),
            (0.0 <= self.split.test_frac < 1.0, 'split.test_frac must lie in [0, 1)'),
            (self.split.k >= 2, 'split.k must be >= 2'),
            (self.models['lasso']['lam'] >= 0, 'models.lasso.lam must be >= 0'),
            (self.models['lasso']['step'] > 0, 'models.lasso.step must be > 0'),
            (self.models['svm']['C'] > 0, 'models.svm.C must be > 0'),
            (self.models['forest']['trees'] >= 1, 'models.forest.trees must be >= 1'),
            (self.models['gbt']['trees'] >= 0, 'models.gbt.trees must be >= 0'),
            (0.0 < self.models['gbt']['subsample'] <= 1.0, 'models.gbt.subsample in (0, 1]'),
            (self.models['gbt']['nu'] >= 0, 'models.gbt.nu must be >= 0'),
            (set(self.cnn.presets) <= set(PRESETS) and self.cnn.presets,
             f'cnn.presets must be a nonempty subset of {sorted(PRESETS)}'),
            (self.cnn.slices_per_case >= 1, 'cnn.slices_per_case must be >= 1'),
            (self.cnn.input_side >= 8 and self.cnn.input_side % 4 == 0,
             'cnn.input_side must be a multiple of 4, at least 8'),
            (self.gradcam.target_class in (0, 1), 'gradcam.target_class must be 0 or 1'),
            (self.gradcam.dilation >= 0, 'gradcam.dilation must be >= 0'),
            (0.0 < self.gradcam.top_fraction <= 1.0, 'gradcam.top_fraction in (0, 1]'),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        try:
            self.phantom.validate()
        except InvalidSpec as exc:
            raise ConfigError(str(exc)) from exc
        self.cnn.train.validate()
        return self

    def train_config(self):
        """TrainConfig seeded with the master seed."""
        return replace(self.cnn.train, seed=self.seed)

    def serialize(self):
        """Serialize the config into a nested dict."""
        phantom = {'n': self.n, 'prevalence': self.prevalence}
        phantom.update({k: list(v) if isinstance(v, tuple) else v
                        for k, v in asdict(self.phantom).items()})
        cnn = {k: v for k, v in asdict(self.cnn.train).items() if k != 'seed'}
        cnn.update({'presets': list(self.cnn.presets),
                    'slices_per_case': self.cnn.slices_per_case,
                    'input_side': self.cnn.input_side})
        return {
            'seed': self.seed,
            'out': str(self.out),
            'jobs': self.jobs,
            'phantom': phantom,
            'radiomics': asdict(self.radiomics),
            'split': asdict(self.split),
            'models': copy.deepcopy(self.models),
            'cnn': cnn,
            'gradcam': asdict(self.gradcam),
        }

    def to_yaml(self):
        """YAML text of serialize(), keys sorted."""
        return yaml.safe_dump(self.serialize(), sort_keys=True, default_flow_style=False)

    def parse_config(self, config):
        """Parse a config from YAML text."""
        try:
            values = yaml.safe_load(config)
        except yaml.YAMLError as exc:
            raise ConfigError(f'invalid YAML: {exc}') from exc
        return self.add_values(values or {})


def load_config(path=None, overrides=None):
    """Defaults, then the YAML file at path, then the override dict."""
    config = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as exc:
            raise ConfigError(f'cannot read config {path}: {exc}') from exc
        config.parse_config(text)
        log.debug('Loaded config %s', path)
    if overrides:
        config.add_values(overrides)
    return config.validate()
