"""Layer forward and backward passes."""
import numpy as np
import pytest

from core import layers
from core.errors import ShapeMismatch


def conv_oracle(x, w, b, stride, pad):
    """Nested-loop cross-correlation."""
    n, c, h, wd = x.shape
    f, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out_h, out_w = (h + 2 * pad - k) // stride + 1, (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, f, out_h, out_w))
    for i in range(n):
        for j in range(f):
            for r in range(out_h):
                for s in range(out_w):
                    window = xp[i, :, r * stride:r * stride + k, s * stride:s * stride + k]
                    out[i, j, r, s] = np.sum(window * w[j]) + b[j]
    return out


def test_conv_identity_kernel(rng):
    x = rng.normal(size=(1, 1, 5, 5))
    out = layers.conv2d_forward(x, np.ones((1, 1, 1, 1)), np.zeros(1))
    np.testing.assert_array_equal(out, x)


def test_conv_mean_kernel_on_constant_image():
    x = np.full((1, 1, 6, 6), 7.0)
    out = layers.conv2d_forward(x, np.full((1, 1, 3, 3), 1 / 9), np.zeros(1))
    assert out.shape == (1, 1, 4, 4)
    np.testing.assert_allclose(out, 7.0, rtol=0, atol=1e-12)


@pytest.mark.parametrize('stride,pad', [(1, 1), (1, 0), (2, 1)])
def test_conv_matches_loops(rng, stride, pad):
    x = rng.normal(size=(2, 3, 8, 8))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out = layers.conv2d_forward(x, w, b, stride, pad)
    np.testing.assert_allclose(out, conv_oracle(x, w, b, stride, pad), rtol=0, atol=1e-12)


def test_conv_backward_matches_differences(rng):
    x = rng.normal(size=(2, 2, 5, 5))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    dout = rng.normal(size=(2, 3, 5, 5))
    dx, dw, db = layers.conv2d_backward(dout, x, w, 1, 1)
    h = 1e-6
    for index in [(0, 0, 0, 0), (1, 1, 2, 3), (0, 1, 4, 4)]:
        bumped = x.copy()
        bumped[index] += h
        numeric = np.sum((layers.conv2d_forward(bumped, w, b, 1, 1)
                          - layers.conv2d_forward(x, w, b, 1, 1)) * dout) / h
        assert dx[index] == pytest.approx(numeric, rel=1e-4, abs=1e-6)
    for index in [(0, 0, 0, 0), (2, 1, 1, 2)]:
        bumped = w.copy()
        bumped[index] += h
        numeric = np.sum((layers.conv2d_forward(x, bumped, b, 1, 1)
                          - layers.conv2d_forward(x, w, b, 1, 1)) * dout) / h
        assert dw[index] == pytest.approx(numeric, rel=1e-4, abs=1e-6)
    np.testing.assert_allclose(db, dout.sum(axis=(0, 2, 3)))


def test_conv_shape_errors():
    with pytest.raises(ShapeMismatch):
        layers.conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((1, 1, 3, 3)), np.zeros(1))
    with pytest.raises(ShapeMismatch):
        layers.conv2d_forward(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)), np.zeros(1))


def test_maxpool():
    x = np.array([[1.0, 2.0, 0.0, 0.0],
                  [4.0, 3.0, 0.0, 5.0],
                  [1.0, 1.0, 6.0, 2.0],
                  [1.0, 1.0, 2.0, 2.0]])[None, None]
    np.testing.assert_array_equal(layers.maxpool_forward(x)[0, 0], [[4.0, 5.0], [1.0, 6.0]])
    dx = layers.maxpool_backward(np.ones((1, 1, 2, 2)), x)[0, 0]
    # ties route to the first maximum
    expected = np.zeros((4, 4))
    expected[1, 0] = expected[1, 3] = expected[2, 0] = expected[2, 2] = 1.0
    np.testing.assert_array_equal(dx, expected)
    with pytest.raises(ShapeMismatch):
        layers.maxpool_forward(np.zeros((1, 1, 3, 4)))


def test_gap_and_dense(rng):
    x = rng.normal(size=(2, 3, 4, 4))
    pooled = layers.gap_forward(x)
    np.testing.assert_allclose(pooled, x.mean(axis=(2, 3)))
    dx = layers.gap_backward(np.ones((2, 3)), x)
    np.testing.assert_allclose(dx, 1 / 16)
    w, b = rng.normal(size=(2, 3)), rng.normal(size=2)
    out = layers.dense_forward(pooled, w, b)
    np.testing.assert_allclose(out, pooled @ w.T + b)
    dxd, dw, db = layers.dense_backward(np.ones((2, 2)), pooled, w)
    np.testing.assert_allclose(dxd, np.ones((2, 2)) @ w)
    np.testing.assert_allclose(dw, np.ones((2, 2)).T @ pooled)
    np.testing.assert_allclose(db, [2.0, 2.0])
    with pytest.raises(ShapeMismatch):
        layers.dense_forward(pooled, np.zeros((2, 4)), b)


def test_relu():
    x = np.array([-1.0, 0.0, 2.0])
    assert layers.relu_forward(x).tolist() == [0.0, 0.0, 2.0]
    assert layers.relu_backward(np.ones(3), x).tolist() == [0.0, 0.0, 1.0]


def test_softmax_and_cross_entropy(rng):
    logits = rng.normal(scale=30.0, size=(5, 2))
    probs = layers.softmax(logits)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0)
    targets = np.eye(2)[[0, 1, 1, 0, 1]]
    loss, p, dlogits = layers.softmax_cross_entropy(logits, targets)
    assert loss >= 0.0
    np.testing.assert_allclose(p, probs)
    np.testing.assert_allclose(dlogits, (probs - targets) / 5)
    perfect, _, _ = layers.softmax_cross_entropy(np.array([[50.0, -50.0]]),
                                                 np.array([[1.0, 0.0]]))
    assert perfect == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ShapeMismatch):
        layers.softmax_cross_entropy(logits, targets[:, :1])
