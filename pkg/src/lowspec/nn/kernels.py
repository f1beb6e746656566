"""im2col / col2im for strided 2-D convolution.

Both operate on an already padded input ``xp`` of shape (B, C, Hp, Wp).
Column layout is (B*Ho*Wo, C*kh*kw), row-major over (b, i, j) and
(c, di, dj), which is what the conv layer's matmul expects.
"""

from __future__ import annotations

import numpy as np

from .._accel import njit, pick


def out_size(n: int, k: int, s: int) -> int:
    return (n - k) // s + 1


def _im2col_numpy(xp, kh, kw, sh, sw):
    b, c, hp, wp = xp.shape
    ho, wo = out_size(hp, kh, sh), out_size(wp, kw, sw)
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * sh + 1 : sh, : (wo - 1) * sw + 1 : sw]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(b * ho * wo, c * kh * kw)


def _col2im_numpy(cols, xp_shape, kh, kw, sh, sw):
    b, c, hp, wp = xp_shape
    ho, wo = out_size(hp, kh, sh), out_size(wp, kw, sw)
    blocks = cols.reshape(b, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    dxp = np.zeros(xp_shape, dtype=cols.dtype)
    for di in range(kh):
        for dj in range(kw):
            dxp[:, :, di : di + (ho - 1) * sh + 1 : sh, dj : dj + (wo - 1) * sw + 1 : sw] += blocks[
                :, :, :, :, di, dj
            ]
    return dxp


@njit
def _im2col_loops(xp, kh, kw, sh, sw):
    b, c, hp, wp = xp.shape
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    cols = np.empty((b * ho * wo, c * kh * kw), dtype=xp.dtype)
    for n in range(b):
        for i in range(ho):
            for j in range(wo):
                r = (n * ho + i) * wo + j
                q = 0
                for ch in range(c):
                    for di in range(kh):
                        for dj in range(kw):
                            cols[r, q] = xp[n, ch, i * sh + di, j * sw + dj]
                            q += 1
    return cols


@njit
def _col2im_loops_impl(cols, b, c, hp, wp, kh, kw, sh, sw):
    ho = (hp - kh) // sh + 1
    wo = (wp - kw) // sw + 1
    dxp = np.zeros((b, c, hp, wp), dtype=cols.dtype)
    for n in range(b):
        for i in range(ho):
            for j in range(wo):
                r = (n * ho + i) * wo + j
                q = 0
                for ch in range(c):
                    for di in range(kh):
                        for dj in range(kw):
                            dxp[n, ch, i * sh + di, j * sw + dj] += cols[r, q]
                            q += 1
    return dxp


def _col2im_loops(cols, xp_shape, kh, kw, sh, sw):
    b, c, hp, wp = xp_shape
    return _col2im_loops_impl(np.ascontiguousarray(cols), b, c, hp, wp, kh, kw, sh, sw)


# the strided-view copy beats the loop version, so it serves both paths
im2col = _im2col_numpy
col2im = pick(_col2im_loops, _col2im_numpy)

# both paths stay importable for equivalence tests and the benchmark
IM2COL = {"numba": _im2col_loops, "numpy": _im2col_numpy}
COL2IM = {"numba": _col2im_loops, "numpy": _col2im_numpy}
