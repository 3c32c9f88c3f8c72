"""Forward and backward passes for the handful of layers the generator uses.

Every function works on single ``(C, H, W)`` feature maps (no batch axis).
Forward functions return ``(output, cache)``; the matching ``*_backward``
takes the cache and the upstream gradient.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

LEAKY_SLOPE = 0.1


def reflect_pad(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (pad, pad), (pad, pad)), mode="reflect")


def reflect_pad_backward(g: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return g
    g = g.copy()
    # Fold the mirrored border rows back onto their sources, then the columns.
    h = g.shape[1] - 2 * pad
    for k in range(pad):
        g[:, 2 * pad - k] += g[:, k]
        g[:, pad + h - 2 - k] += g[:, pad + h + k]
    g = g[:, pad : pad + h]
    w = g.shape[2] - 2 * pad
    for k in range(pad):
        g[:, :, 2 * pad - k] += g[:, :, k]
        g[:, :, pad + w - 2 - k] += g[:, :, pad + w + k]
    return g[:, :, pad : pad + w]


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1):
    """``k x k`` convolution (cross-correlation) with reflection padding ``k // 2``."""
    k = w.shape[-1]
    pad = k // 2
    xp = reflect_pad(x, pad)
    if k == 1 and stride == 1:
        cols = xp.reshape(xp.shape[0], -1)
        ho, wo = x.shape[1:]
    else:
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride]
        ho, wo = win.shape[1:3]
        cols = win.transpose(0, 3, 4, 1, 2).reshape(-1, ho * wo)
    y = w.reshape(w.shape[0], -1) @ cols + b[:, None]
    return y.reshape(w.shape[0], ho, wo), (xp.shape, cols, stride)


def conv2d_backward(dy: np.ndarray, w: np.ndarray, cache):
    xp_shape, cols, stride = cache
    cout, ho, wo = dy.shape
    k = w.shape[-1]
    pad = k // 2
    dy2 = dy.reshape(cout, -1)
    dw = (dy2 @ cols.T).reshape(w.shape)
    db = dy2.sum(axis=1)
    dcols = w.reshape(cout, -1).T @ dy2
    if k == 1 and stride == 1:
        return dcols.reshape(xp_shape), dw, db
    dcols = dcols.reshape(xp_shape[0], k, k, ho, wo)
    dxp = np.zeros(xp_shape)
    for i in range(k):
        for j in range(k):
            dxp[:, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, i, j]
    return reflect_pad_backward(dxp, pad), dw, db


def leaky_relu(x: np.ndarray):
    return np.where(x > 0, x, LEAKY_SLOPE * x), x > 0


def leaky_relu_backward(dy: np.ndarray, positive: np.ndarray) -> np.ndarray:
    return np.where(positive, dy, LEAKY_SLOPE * dy)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def upsample2(x: np.ndarray) -> np.ndarray:
    return x.repeat(2, axis=1).repeat(2, axis=2)


def upsample2_backward(dy: np.ndarray) -> np.ndarray:
    c, h, w = dy.shape
    return dy.reshape(c, h // 2, 2, w // 2, 2).sum(axis=(2, 4))
