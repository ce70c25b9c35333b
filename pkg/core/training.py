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

"""SGD with momentum, cosine annealing, MixUp and checkpoints."""
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from core.errors import ConfigError, NonFiniteLoss, SchemaError, ShapeMismatch, SingleClass
from core.network import Network, NetSpec
from core.phantom import mix_seed
from core.storage import dump_json, read_json, write_text_atomic

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'fibrosis-risk-checkpoint'
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig():    # pylint: disable=too-many-instance-attributes
    """Optimiser and augmentation settings."""

    batch_size: int = 2
    lr_max: float = 0.01
    epochs: int = 100
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_min: float = 0.0
    mixup_alpha: float = 0.2
    seed: int = 0

    def add_values(self, values):
        """Add values from dict."""
        names = {f.name for f in fields(self)}
        for key, value in values.items():
            if key not in names:
                raise ConfigError(f'unknown cnn setting {key!r}')
            setattr(self, key, value)
        return self.validate()

    def __getitem__(self, key):
        """Implement __getitem__."""
        return super().__getattribute__(key)

    def validate(self):
        """Raise ConfigError on out-of-range values."""
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError('batch_size and epochs must be >= 1')
        if self.lr_max < 0 or self.lr_min < 0 or self.lr_min > self.lr_max:
            raise ConfigError('learning rates must satisfy 0 <= lr_min <= lr_max')
        if not 0 <= self.momentum < 1 or self.weight_decay < 0 or self.mixup_alpha < 0:
            raise ConfigError('momentum must lie in [0, 1); weight_decay and mixup_alpha >= 0')
        return self


def cosine_lr(t, total, lr_max, lr_min=0.0):
    """lr_min + (lr_max - lr_min) (1 + cos(pi t / total)) / 2."""
    if not 0 <= t <= total:
        raise ValueError(f'epoch {t} outside [0, {total}]')
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * t / total))


def mixup(x1, y1, x2, y2, lam):
    """Convex combination of two samples and their labels."""
    x1, x2 = np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64)
    y1, y2 = np.asarray(y1, dtype=np.float64), np.asarray(y2, dtype=np.float64)
    if x1.shape != x2.shape or y1.shape != y2.shape:
        raise ShapeMismatch(f'mixup shapes differ: {x1.shape}/{x2.shape}, {y1.shape}/{y2.shape}')
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f'lambda must lie in [0, 1], got {lam}')
    return lam * x1 + (1.0 - lam) * x2, lam * y1 + (1.0 - lam) * y2


def sgd_step(params, grads, velocity, lr, momentum=0.9, weight_decay=5e-4):
    """One momentum step with L2 weight decay folded into the gradient.

    Returns new (params, velocity) dicts; the inputs are not modified.
    """
    new_params, new_velocity = {}, {}
    for name, p in params.items():
        g = grads[name] + weight_decay * p
        if g.shape != p.shape:
            raise ShapeMismatch(f'{name}: gradient {g.shape} != parameter {p.shape}')
        v = momentum * velocity.get(name, np.zeros_like(p)) + g
        new_velocity[name] = v
        new_params[name] = p - lr * v
    return new_params, new_velocity


def one_hot(labels, classes=2):
    """Rows of the identity indexed by labels."""
    return np.eye(classes)[np.asarray(labels, dtype=np.int64)]


@dataclass(eq=False)
class Checkpoint():
    """A trained network with its curve and settings."""

    spec: NetSpec
    params: dict
    config: TrainConfig
    curve: list = field(default_factory=list)

    @property
    def network(self):
        """Network built from the spec."""
        return Network(self.spec)

    def predict_proba(self, images):
        """Positive-class probability of each (H, W) image."""
        images = np.asarray(images, dtype=np.float64)
        return self.network.predict_proba(self.params, images[:, None])[:, 1]

    def serialize(self):
        """Envelope dict with flattened parameter arrays."""
        return {
            'format': CHECKPOINT_FORMAT,
            'version': CHECKPOINT_VERSION,
            'kind': 'cnn',
            'spec': self.spec.serialize(),
            'config': asdict(self.config),
            'curve': self.curve,
            'parameters': {name: {'shape': list(p.shape), 'values': p.ravel().tolist()}
                           for name, p in sorted(self.params.items())},
        }

    @classmethod
    def parse(cls, values):
        """Inverse of serialize()."""
        if values.get('format') != CHECKPOINT_FORMAT:
            raise SchemaError(f'not a checkpoint (format {values.get("format")!r})')
        if values.get('version') != CHECKPOINT_VERSION:
            raise SchemaError(f'unsupported checkpoint version {values.get("version")!r}')
        try:
            spec = NetSpec.parse(values['spec'])
            params = {name: np.asarray(entry['values'], dtype=np.float64)
                      .reshape(entry['shape']) for name, entry in values['parameters'].items()}
            config = TrainConfig(**values['config'])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f'malformed checkpoint: {exc}') from exc
        expected = Network(spec).param_shapes
        if {k: tuple(v.shape) for k, v in params.items()} != expected:
            raise SchemaError('checkpoint parameters do not match its network spec')
        return cls(spec, params, config, values.get('curve', []))


def save_checkpoint(path, checkpoint):
    """Write a checkpoint atomically."""
    return write_text_atomic(path, dump_json(checkpoint.serialize()))


def load_checkpoint(path):
    """Read a checkpoint file."""
    return Checkpoint.parse(read_json(path))


def train(images, labels, spec, cfg):    # pylint: disable=too-many-locals
    """Train spec on (H, W) images with 0/1 labels and return a Checkpoint.

    Initialisation uses mix_seed(seed, 0), shuffling and MixUp draws use
    mix_seed(seed, 1).  Each batch draws lambda ~ Beta(alpha, alpha) and mixes
    every sample with a partner from a permutation of the same batch.
    """
    cfg.validate()
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) < 2 or len(images) != len(labels):
        raise ShapeMismatch(f'need >= 2 images with one label each, got {len(images)}/'
                            f'{len(labels)}')
    if len(np.unique(labels)) < 2:
        raise SingleClass('training needs both classes')
    net = Network(spec)
    x_all = images[:, None]
    net.check_input(x_all[:1])
    y_all = one_hot(labels, net.classes)
    params = net.init_params(np.random.Generator(np.random.PCG64(mix_seed(cfg.seed, 0))))
    rng = np.random.Generator(np.random.PCG64(mix_seed(cfg.seed, 1)))
    velocity = {name: np.zeros_like(p) for name, p in params.items()}
    curve = []
    n = len(images)
    for epoch in range(cfg.epochs):
        lr = cosine_lr(epoch, cfg.epochs, cfg.lr_max, cfg.lr_min)
        order = rng.permutation(n)
        total_loss, correct = 0.0, 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start:start + cfg.batch_size]
            x, y = x_all[batch], y_all[batch]
            lam = float(rng.beta(cfg.mixup_alpha, cfg.mixup_alpha)) if cfg.mixup_alpha > 0 \
                else 1.0
            partner = rng.permutation(len(batch))
            x, y = mixup(x, y, x[partner], y[partner], lam)
            loss, probs, grads = net.loss_and_grads(params, x, y)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f'train {spec.name}: epoch {epoch} batch {b}: loss {loss}')
            params, velocity = sgd_step(params, grads, velocity, lr, cfg.momentum,
                                        cfg.weight_decay)
            dominant = np.where(lam >= 0.5, labels[batch], labels[batch][partner])
            correct += int((probs.argmax(axis=1) == dominant).sum())
            total_loss += loss * len(batch)
        if not all(np.isfinite(p).all() for p in params.values()):
            raise NonFiniteLoss(f'train {spec.name}: epoch {epoch}: parameters became '
                                f'non-finite')
        curve.append({'epoch': epoch, 'lr': lr, 'loss': total_loss / n, 'accuracy': correct / n})
        log.debug('%s epoch %d: lr %.5f loss %.5f acc %.3f', spec.name, epoch, lr,
                  curve[-1]['loss'], curve[-1]['accuracy'])
    return Checkpoint(spec, params, cfg, curve)
