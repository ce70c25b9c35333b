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

"""Layer-list network specs, presets, forward and backward passes.

Layer i reads output i and writes output i + 1; output 0 is the input.
Skip layers name an earlier output with ``from``.  Parameters of layer i are
``'{i}.weight'`` and ``'{i}.bias'``.
"""
import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from core import layers
from core.errors import NonFiniteLoss, ShapeMismatch

log = logging.getLogger(__name__)

LAYER_TYPES = ('conv', 'relu', 'maxpool', 'gap', 'dense', 'add', 'concat')

_DEBUG = False


def set_debug(enabled):
    """Turn finite-value checks after every layer on or off."""
    global _DEBUG    # pylint: disable=global-statement
    _DEBUG = bool(enabled)


def _conv(out, k=3, pad=1, stride=1):
    return {'type': 'conv', 'out': out, 'k': k, 'stride': stride, 'pad': pad}


RELU = {'type': 'relu'}
POOL = {'type': 'maxpool'}
GAP = {'type': 'gap'}


def _skip(kind, source):
    return {'type': kind, 'from': source}


PRESETS = {
    'tiny_plain': [
        _conv(8), RELU, POOL,
        _conv(16), RELU, POOL,
        _conv(16), RELU, GAP, {'type': 'dense', 'out': 2},
    ],
    # outputs: 3 = pooled stem, 7 = stem + residual branch
    'tiny_res': [
        _conv(8), RELU, POOL,
        _conv(8), RELU, _conv(8), _skip('add', 3), RELU, POOL,
        _conv(16), RELU, GAP, {'type': 'dense', 'out': 2},
    ],
    # outputs: 3 = pooled stem, 6 and 9 = concatenations
    'tiny_dense': [
        _conv(8), RELU, POOL,
        _conv(8), RELU, _skip('concat', 3),
        _conv(8), RELU, _skip('concat', 6), POOL,
        _conv(16), RELU, GAP, {'type': 'dense', 'out': 2},
    ],
    # outputs: 3 = pooled stem, 7 and 11 = residual sums
    'tiny_res_deep': [
        _conv(8), RELU, POOL,
        _conv(8), RELU, _conv(8), _skip('add', 3),
        _conv(8), RELU, _conv(8), _skip('add', 7), RELU, POOL,
        _conv(16), RELU, GAP, {'type': 'dense', 'out': 2},
    ],
}


@dataclass
class NetSpec():
    """Ordered layer descriptors and the (C, H, W) input shape."""

    layers: list = field(default_factory=list)
    input_shape: tuple = (1, 64, 64)
    name: str = 'custom'

    def serialize(self):
        """Plain dict form."""
        return {'name': self.name, 'input_shape': list(self.input_shape),
                'layers': copy.deepcopy(self.layers)}

    @classmethod
    def parse(cls, values):
        """Build from the dict form."""
        return cls(copy.deepcopy(values['layers']), tuple(values['input_shape']),
                   values.get('name', 'custom'))


def preset(name, side=64):
    """NetSpec of a named preset for square single-channel inputs."""
    if name not in PRESETS:
        raise KeyError(f'unknown preset {name!r}, expected one of {sorted(PRESETS)}')
    return NetSpec(copy.deepcopy(PRESETS[name]), (1, side, side), name)


class Network():
    """A shape-checked NetSpec with forward and backward passes."""

    def __init__(self, spec):
        """Initialize and infer every output shape."""
        self.spec = spec
        self.shapes = [tuple(spec.input_shape)]
        self.param_shapes = {}
        for i, layer in enumerate(spec.layers):
            self.shapes.append(self._infer(i, layer, self.shapes[i]))
        if len(self.shapes[-1]) != 1:
            raise ShapeMismatch('network must end in a dense layer')
        log.debug('Network %s shapes: %s', spec.name, self.shapes)

    def _infer(self, i, layer, shape):
        # pylint: disable=too-many-return-statements
        kind = layer.get('type')
        if kind not in LAYER_TYPES:
            raise ShapeMismatch(f'layer {i}: unknown type {kind!r}')
        if kind == 'conv':
            if len(shape) != 3:
                raise ShapeMismatch(f'layer {i}: conv needs (C, H, W), got {shape}')
            k, stride, pad = layer['k'], layer['stride'], layer['pad']
            h = (shape[1] + 2 * pad - k) // stride + 1
            w = (shape[2] + 2 * pad - k) // stride + 1
            if h < 1 or w < 1:
                raise ShapeMismatch(f'layer {i}: kernel {k} too large for {shape}')
            self.param_shapes[f'{i}.weight'] = (layer['out'], shape[0], k, k)
            self.param_shapes[f'{i}.bias'] = (layer['out'],)
            return (layer['out'], h, w)
        if kind == 'relu':
            return shape
        if kind == 'maxpool':
            if len(shape) != 3 or shape[1] % 2 or shape[2] % 2:
                raise ShapeMismatch(f'layer {i}: max pooling needs even sides, got {shape}')
            return (shape[0], shape[1] // 2, shape[2] // 2)
        if kind == 'gap':
            if len(shape) != 3:
                raise ShapeMismatch(f'layer {i}: pooling needs (C, H, W), got {shape}')
            return (shape[0],)
        if kind == 'dense':
            if len(shape) != 1:
                raise ShapeMismatch(f'layer {i}: dense needs a flat input, got {shape}')
            self.param_shapes[f'{i}.weight'] = (layer['out'], shape[0])
            self.param_shapes[f'{i}.bias'] = (layer['out'],)
            return (layer['out'],)
        source = layer['from']
        if not 0 <= source <= i:
            raise ShapeMismatch(f'layer {i}: skip source {source} is not an earlier output')
        other = self.shapes[source]
        if kind == 'add':
            if other != shape:
                raise ShapeMismatch(f'layer {i}: cannot add {other} to {shape}')
            return shape
        if len(other) != 3 or len(shape) != 3 or other[1:] != shape[1:]:
            raise ShapeMismatch(f'layer {i}: cannot concatenate {other} to {shape}')
        return (shape[0] + other[0],) + shape[1:]

    @property
    def classes(self):
        """Number of output logits."""
        return self.shapes[-1][0]

    @property
    def gap_index(self):
        """Index of the global average pool layer."""
        for i, layer in enumerate(self.spec.layers):
            if layer['type'] == 'gap':
                return i
        raise ShapeMismatch('network has no global average pool layer')

    def init_params(self, rng):
        """He-normal weights and zero biases."""
        params = {}
        for name, shape in self.param_shapes.items():
            if name.endswith('.weight'):
                fan_in = int(np.prod(shape[1:]))
                params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            else:
                params[name] = np.zeros(shape)
        return params

    def check_input(self, x):
        """Raise ShapeMismatch unless x is (N,) + input shape."""
        if x.ndim != 4 or tuple(x.shape[1:]) != tuple(self.spec.input_shape):
            raise ShapeMismatch(f'input {x.shape} does not match (N,) + '
                                f'{tuple(self.spec.input_shape)}')

    def forward(self, params, x):
        """Return the list of outputs; the last one holds the logits."""
        x = np.asarray(x, dtype=np.float64)
        self.check_input(x)
        outputs = [x]
        for i, layer in enumerate(self.spec.layers):
            outputs.append(self._forward_layer(params, i, layer, outputs))
            if _DEBUG and not np.isfinite(outputs[-1]).all():
                raise NonFiniteLoss(f'layer {i} ({layer["type"]}) produced non-finite values')
        return outputs

    @staticmethod
    def _forward_layer(params, i, layer, outputs):
        # pylint: disable=too-many-return-statements
        x = outputs[i]
        kind = layer['type']
        if kind == 'conv':
            return layers.conv2d_forward(x, params[f'{i}.weight'], params[f'{i}.bias'],
                                         layer['stride'], layer['pad'])
        if kind == 'relu':
            return layers.relu_forward(x)
        if kind == 'maxpool':
            return layers.maxpool_forward(x)
        if kind == 'gap':
            return layers.gap_forward(x)
        if kind == 'dense':
            return layers.dense_forward(x, params[f'{i}.weight'], params[f'{i}.bias'])
        if kind == 'add':
            return x + outputs[layer['from']]
        return np.concatenate([x, outputs[layer['from']]], axis=1)

    def backward(self, params, outputs, dlogits):
        """Return (parameter gradients, gradient of every output)."""
        douts = [np.zeros_like(o) for o in outputs]
        douts[-1] = dlogits
        grads = {}
        for i in range(len(self.spec.layers) - 1, -1, -1):
            layer, x, dout = self.spec.layers[i], outputs[i], douts[i + 1]
            kind = layer['type']
            if kind == 'conv':
                dx, grads[f'{i}.weight'], grads[f'{i}.bias'] = layers.conv2d_backward(
                    dout, x, params[f'{i}.weight'], layer['stride'], layer['pad'])
            elif kind == 'relu':
                dx = layers.relu_backward(dout, x)
            elif kind == 'maxpool':
                dx = layers.maxpool_backward(dout, x)
            elif kind == 'gap':
                dx = layers.gap_backward(dout, x)
            elif kind == 'dense':
                dx, grads[f'{i}.weight'], grads[f'{i}.bias'] = layers.dense_backward(
                    dout, x, params[f'{i}.weight'])
            elif kind == 'add':
                dx = dout
                douts[layer['from']] = douts[layer['from']] + dout
            else:
                channels = x.shape[1]
                dx = dout[:, :channels]
                douts[layer['from']] = douts[layer['from']] + dout[:, channels:]
            douts[i] = douts[i] + dx
        return grads, douts

    def loss_and_grads(self, params, x, targets):
        """Mean softmax cross-entropy and its parameter gradients."""
        outputs = self.forward(params, x)
        loss, probs, dlogits = layers.softmax_cross_entropy(outputs[-1], targets)
        grads, _ = self.backward(params, outputs, dlogits)
        return loss, probs, grads

    def predict_proba(self, params, x, batch=32):
        """Softmax probabilities, computed in batches."""
        x = np.asarray(x, dtype=np.float64)
        parts = [layers.softmax(self.forward(params, x[s:s + batch])[-1])
                 for s in range(0, len(x), batch)]
        return np.concatenate(parts) if parts else np.zeros((0, self.classes))


def backward(net, params, x, targets):
    """Gradients of the mean softmax cross-entropy for every parameter."""
    return net.loss_and_grads(params, x, targets)[2]
