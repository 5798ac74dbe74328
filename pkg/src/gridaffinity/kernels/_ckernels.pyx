# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the loop-heavy kernels in _numpy.py (same signatures)."""

import numpy as np
cimport numpy as cnp
from cython cimport floating

cnp.import_array()


def unfold3d(floating[:, :, :, :, ::1] xpad, int k):
    cdef Py_ssize_t B = xpad.shape[0], C = xpad.shape[4]
    cdef Py_ssize_t D = xpad.shape[1] - k + 1, H = xpad.shape[2] - k + 1, W = xpad.shape[3] - k + 1
    cdef Py_ssize_t kc = k * k * k * C
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((B * D * H * W, kc), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    cdef Py_ssize_t b, x, y, z, i, j, l, c, row, col
    with nogil:
        row = 0
        for b in range(B):
            for x in range(D):
                for y in range(H):
                    for z in range(W):
                        col = 0
                        for i in range(k):
                            for j in range(k):
                                for l in range(k):
                                    for c in range(C):
                                        out[row, col] = xpad[b, x + i, y + j, z + l, c]
                                        col += 1
                        row += 1
    return out_arr


def fold3d(floating[:, ::1] cols, floating[:, :, :, :, ::1] out):
    cdef Py_ssize_t B = out.shape[0], C = out.shape[4]
    cdef int k = <int>round((cols.shape[1] // C) ** (1.0 / 3.0))
    cdef Py_ssize_t D = out.shape[1] - k + 1, H = out.shape[2] - k + 1, W = out.shape[3] - k + 1
    cdef Py_ssize_t b, x, y, z, i, j, l, c, row, col
    with nogil:
        row = 0
        for b in range(B):
            for x in range(D):
                for y in range(H):
                    for z in range(W):
                        col = 0
                        for i in range(k):
                            for j in range(k):
                                for l in range(k):
                                    for c in range(C):
                                        out[b, x + i, y + j, z + l, c] += cols[row, col]
                                        col += 1
                        row += 1
    return out.base if out.base is not None else out


def maxpool3d_forward(floating[:, :, :, :, ::1] x):
    cdef Py_ssize_t B = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3], C = x.shape[4]
    cdef Py_ssize_t D2 = (D + 1) // 2, H2 = (H + 1) // 2, W2 = (W + 1) // 2
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.empty((B, D2, H2, W2, C), dtype=dtype)
    arg_arr = np.empty((B, D2, H2, W2, C), dtype=np.int8)
    cdef floating[:, :, :, :, ::1] out = out_arr
    cdef cnp.int8_t[:, :, :, :, ::1] arg = arg_arr
    cdef Py_ssize_t b, p, q, r, c, a0, a1, a2, xi, yi, zi
    cdef floating best, v
    cdef cnp.int8_t slot, best_slot
    with nogil:
        for b in range(B):
            for p in range(D2):
                for q in range(H2):
                    for r in range(W2):
                        for c in range(C):
                            best = x[b, 2 * p, 2 * q, 2 * r, c]
                            best_slot = 0
                            slot = 0
                            for a0 in range(2):
                                xi = 2 * p + a0
                                for a1 in range(2):
                                    yi = 2 * q + a1
                                    for a2 in range(2):
                                        zi = 2 * r + a2
                                        if xi < D and yi < H and zi < W:
                                            v = x[b, xi, yi, zi, c]
                                            if v > best:
                                                best = v
                                                best_slot = slot
                                        slot += 1
                            out[b, p, q, r, c] = best
                            arg[b, p, q, r, c] = best_slot
    return out_arr, arg_arr


def maxpool3d_backward(floating[:, :, :, :, ::1] dout, cnp.int8_t[:, :, :, :, ::1] arg, in_shape):
    cdef Py_ssize_t B = dout.shape[0], D2 = dout.shape[1], H2 = dout.shape[2], W2 = dout.shape[3]
    cdef Py_ssize_t C = dout.shape[4]
    dtype = np.float32 if floating is float else np.float64
    dx_arr = np.zeros(tuple(in_shape), dtype=dtype)
    cdef floating[:, :, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b, p, q, r, c
    cdef int s
    with nogil:
        for b in range(B):
            for p in range(D2):
                for q in range(H2):
                    for r in range(W2):
                        for c in range(C):
                            s = arg[b, p, q, r, c]
                            dx[b, 2 * p + (s >> 2), 2 * q + ((s >> 1) & 1), 2 * r + (s & 1), c] += dout[b, p, q, r, c]
    return dx_arr


def scatter_add(floating[:, :, :, ::1] grid, cnp.int64_t[:, ::1] idx, floating[:, ::1] feats):
    cdef Py_ssize_t n = idx.shape[0], F = feats.shape[1], i, f
    with nogil:
        for i in range(n):
            for f in range(F):
                grid[idx[i, 0], idx[i, 1], idx[i, 2], f] += feats[i, f]
    return grid.base if grid.base is not None else grid
