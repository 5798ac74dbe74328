"""Forward and backward passes of the individual layer types.

Activations are channels-last: (B, D, H, W, C) for volumes, (B, N) for dense.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import ShapeError

# Cap on patch-matrix size (elements) before a conv call is split over the batch.
MAX_PATCH_ELEMENTS = 1 << 24


def trunc_normal(shape, std: float, rng: np.random.Generator, mean: float = 0.0,
                 dtype=np.float64) -> np.ndarray:
    """Normal samples with anything beyond 2 std from the mean redrawn."""
    if not std > 0:
        raise ValueError("std must be positive")
    out = rng.standard_normal(shape)
    bad = np.abs(out) > 2.0
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > 2.0
    return (mean + std * out).astype(dtype)


def _as_batch(x):
    x = np.asarray(x)
    if x.ndim == 4:
        return x[None], True
    if x.ndim != 5:
        raise ShapeError(f"expected (D,H,W,C) or (B,D,H,W,C), got {x.shape}")
    return x, False


def _chunks(batch: int, rows_per_example: int, cols: int):
    per = max(1, MAX_PATCH_ELEMENTS // max(1, rows_per_example * cols))
    for start in range(0, batch, per):
        yield slice(start, min(batch, start + per))


def _pad(x, p):
    return np.pad(x, ((0, 0), (p, p), (p, p), (p, p), (0, 0)))


def conv3d_forward(x, weights, bias):
    """Stride-1 cross-correlation with zero 'same' padding, plus bias."""
    xb, single = _as_batch(x)
    k = weights.shape[0]
    if weights.shape[:3] != (k, k, k) or k % 2 == 0:
        raise ShapeError(f"conv kernel must be an odd cube, got {weights.shape[:3]}")
    cin, cout = weights.shape[3], weights.shape[4]
    if xb.shape[-1] != cin:
        raise ShapeError(f"input has {xb.shape[-1]} channels, kernel expects {cin}")
    b, d, h, w, _ = xb.shape
    w2 = weights.reshape(-1, cout)
    out = np.empty((b, d, h, w, cout), dtype=np.result_type(xb, weights))
    for sl in _chunks(b, d * h * w, w2.shape[0]):
        cols = kernels.unfold3d(np.ascontiguousarray(_pad(xb[sl], k // 2)), k)
        out[sl] = (cols @ w2 + bias).reshape(-1, d, h, w, cout)
    return out[0] if single else out


def conv3d_backward(x, weights, dout, need_dx: bool = True):
    """Gradients (dx, dweights, dbias) of :func:`conv3d_forward`; dx is None if not needed."""
    k = weights.shape[0]
    cout = weights.shape[4]
    b, d, h, w, cin = x.shape
    p = k // 2
    w2 = weights.reshape(-1, cout)
    dw = np.zeros_like(w2)
    db = np.zeros(cout, dtype=weights.dtype)
    dx = np.empty_like(x) if need_dx else None
    for sl in _chunks(b, d * h * w, w2.shape[0]):
        cols = kernels.unfold3d(np.ascontiguousarray(_pad(x[sl], p)), k)
        g = dout[sl].reshape(-1, cout)
        dw += cols.T @ g
        db += g.sum(axis=0)
        if need_dx:
            del cols
            dpad = np.zeros((g.shape[0] // (d * h * w), d + 2 * p, h + 2 * p, w + 2 * p, cin),
                            dtype=x.dtype)
            kernels.fold3d(np.ascontiguousarray(g @ w2.T), dpad)
            dx[sl] = dpad[:, p:p + d, p:p + h, p:p + w, :]
    return dx, dw.reshape(weights.shape), db


def maxpool3d_forward(x):
    """2x2x2 max pool, stride 2, ceil mode. Returns (output, argmax slots)."""
    xb, single = _as_batch(x)
    out, arg = kernels.maxpool3d_forward(np.ascontiguousarray(xb))
    return (out[0], arg[0]) if single else (out, arg)


def maxpool3d_backward(dout, arg, in_shape):
    """Route each output gradient to the input cell that won the max."""
    return kernels.maxpool3d_backward(np.ascontiguousarray(dout), arg, tuple(in_shape))


def dense_forward(x, weights, bias):
    if x.shape[-1] != weights.shape[0] or weights.shape[1] != bias.shape[0]:
        raise ShapeError(f"dense shapes disagree: input {x.shape}, weights {weights.shape}, "
                         f"bias {bias.shape}")
    return x @ weights + bias


def relu(x):
    return np.maximum(x, 0)


def dropout_forward(x, keep_prob: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout. Returns (output, mask); mask is None when nothing was dropped."""
    if not training or keep_prob >= 1.0:
        return x, None
    mask = (rng.random(x.shape) < keep_prob).astype(x.dtype) / x.dtype.type(keep_prob)
    return x * mask, mask
