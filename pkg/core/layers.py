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

"""Forward and backward passes of the network layers on (N, C, H, W) float64 arrays."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.errors import ShapeMismatch


def _windows(x, k, stride, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    return sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d_forward(x, w, b, stride=1, pad=0):
    """Cross-correlation with zero padding; w is (F, C, k, k)."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2] != w.shape[3]:
        raise ShapeMismatch(f'conv input {x.shape} does not fit weights {w.shape}')
    if b.shape != (w.shape[0],):
        raise ShapeMismatch(f'conv bias {b.shape} does not fit weights {w.shape}')
    k = w.shape[2]
    if x.shape[2] + 2 * pad < k or x.shape[3] + 2 * pad < k:
        raise ShapeMismatch(f'conv kernel {k} larger than padded input {x.shape}')
    out = np.einsum('nchwij,fcij->nfhw', _windows(x, k, stride, pad), w, optimize=True)
    return out + b[None, :, None, None]


def conv2d_backward(dout, x, w, stride=1, pad=0):
    """Return (dx, dw, db) of conv2d_forward."""
    k = w.shape[2]
    windows = _windows(x, k, stride, pad)
    dw = np.einsum('nchwij,nfhw->fcij', windows, dout, optimize=True)
    db = dout.sum(axis=(0, 2, 3))
    out_h, out_w = dout.shape[2], dout.shape[3]
    dxp = np.zeros((x.shape[0], x.shape[1], x.shape[2] + 2 * pad, x.shape[3] + 2 * pad))
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride] += \
                np.einsum('nfhw,fc->nchw', dout, w[:, :, i, j], optimize=True)
    return dxp[:, :, pad:pad + x.shape[2], pad:pad + x.shape[3]], dw, db


def relu_forward(x):
    """max(x, 0)."""
    return np.maximum(x, 0.0)


def relu_backward(dout, x):
    """Gradient passes where x > 0."""
    return dout * (x > 0.0)


def maxpool_forward(x):
    """2x2 max pooling with stride 2."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f'max pooling needs even height and width, got {x.shape}')
    return x.reshape(n, c, h // 2, 2, w // 2, 2).max(axis=(3, 5))


def maxpool_backward(dout, x):
    """Route each gradient to the first maximum of its window."""
    n, c, h, w = x.shape
    blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h // 2, w // 2, 4)
    winner = np.argmax(blocks, axis=-1)
    dx = np.zeros_like(blocks)
    np.put_along_axis(dx, winner[..., None], dout[..., None], axis=-1)
    dx = dx.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dx.reshape(n, c, h, w)


def gap_forward(x):
    """Global average pool (N, C, H, W) -> (N, C)."""
    return x.mean(axis=(2, 3))


def gap_backward(dout, x):
    """Spread gradients evenly over the pooled positions."""
    h, w = x.shape[2], x.shape[3]
    return np.broadcast_to(dout[:, :, None, None] / (h * w), x.shape).copy()


def dense_forward(x, w, b):
    """x @ w.T + b with w of shape (out, in)."""
    if x.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f'dense input {x.shape} does not fit weights {w.shape}')
    return x @ w.T + b


def dense_backward(dout, x, w):
    """Return (dx, dw, db) of dense_forward."""
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def softmax(logits):
    """Row-wise softmax."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, targets):
    """Mean cross-entropy against soft targets; returns (loss, probs, dlogits)."""
    if logits.shape != targets.shape:
        raise ShapeMismatch(f'logits {logits.shape} and targets {targets.shape} differ')
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(log_probs)
    n = logits.shape[0]
    loss = float(-(targets * log_probs).sum() / n)
    return loss, probs, (probs - targets) / n
