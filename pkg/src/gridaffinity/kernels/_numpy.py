"""Pure-numpy kernels. Reference behaviour for the compiled twin in _ckernels.pyx."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def unfold3d(xpad, k):
    """Patch matrix of a padded (B, Dp, Hp, Wp, C) array.

    Returns shape (B*D*H*W, k*k*k*C) with D = Dp - k + 1, columns ordered
    (kx, ky, kz, c) to match a (k, k, k, Cin, Cout) weight reshaped to 2-D.
    """
    b, dp, hp, wp, c = xpad.shape
    d, h, w = dp - k + 1, hp - k + 1, wp - k + 1
    win = sliding_window_view(xpad, (k, k, k), axis=(1, 2, 3))
    win = win.transpose(0, 1, 2, 3, 5, 6, 7, 4)
    return np.ascontiguousarray(win).reshape(b * d * h * w, k * k * k * c)


def fold3d(cols, out):
    """Accumulate a patch matrix back into padded array ``out`` (in place)."""
    b, dp, hp, wp, c = out.shape
    k = round((cols.shape[1] // c) ** (1 / 3))
    d, h, w = dp - k + 1, hp - k + 1, wp - k + 1
    patches = cols.reshape(b, d, h, w, k, k, k, c)
    for i in range(k):
        for j in range(k):
            for l in range(k):
                out[:, i:i + d, j:j + h, l:l + w, :] += patches[:, :, :, :, i, j, l, :]
    return out


def _windows(x, fill):
    b, d, h, w, c = x.shape
    d2, h2, w2 = -(-d // 2), -(-h // 2), -(-w // 2)
    padded = np.full((b, 2 * d2, 2 * h2, 2 * w2, c), fill, dtype=x.dtype)
    padded[:, :d, :h, :w, :] = x
    win = padded.reshape(b, d2, 2, h2, 2, w2, 2, c).transpose(0, 1, 3, 5, 7, 2, 4, 6)
    return win.reshape(b, d2, h2, w2, c, 8)


def maxpool3d_forward(x):
    """2x2x2 stride-2 max pooling in ceil mode; argmax is the window slot 0..7."""
    win = _windows(x, -np.inf)
    arg = win.argmax(axis=-1).astype(np.int8)
    out = np.take_along_axis(win, arg[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(out), arg


def maxpool3d_backward(dout, arg, in_shape):
    b, d, h, w, c = in_shape
    d2, h2, w2 = dout.shape[1:4]
    win = np.zeros((b, d2, h2, w2, c, 8), dtype=dout.dtype)
    np.put_along_axis(win, arg[..., None].astype(np.intp), dout[..., None], axis=-1)
    full = win.reshape(b, d2, h2, w2, c, 2, 2, 2).transpose(0, 1, 5, 2, 6, 3, 7, 4)
    full = full.reshape(b, 2 * d2, 2 * h2, 2 * w2, c)
    return np.ascontiguousarray(full[:, :d, :h, :w, :])


def scatter_add(grid, idx, feats):
    """grid[idx[i, 0], idx[i, 1], idx[i, 2], :] += feats[i] (in place)."""
    np.add.at(grid, (idx[:, 0], idx[:, 1], idx[:, 2]), feats)
    return grid
