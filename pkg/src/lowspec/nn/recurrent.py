"""LSTM and ConvLSTM cells with hand-written backward passes.

Gate layout along the last (dense) or channel (conv) axis is
``[input, forget, output, candidate]``.

The ``*_step`` functions are the self-contained single-step cells. The layers
use the ``*_cell`` forms, which take the input contribution ``zx`` already
computed for every time step in one matmul; only the recurrent term is done
per step.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .kernels import col2im, im2col


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _gates(z, n, axis):
    i, f, o, g = np.split(z, [n, 2 * n, 3 * n], axis=axis)
    return sigmoid(i), sigmoid(f), sigmoid(o), np.tanh(g)


def _update(c, i, f, o, g):
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return c_new, o * tc, tc


def _gate_grads(dc_new, dh_new, c, i, f, o, g, tc, axis):
    do = dh_new * tc
    dct = dc_new + dh_new * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [dct * g * i * (1.0 - i), dct * c * f * (1.0 - f), do * o * (1.0 - o), dct * i * (1.0 - g * g)],
        axis=axis,
    )
    return dct * f, dz


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------


def lstm_cell(c, h, zx, U):
    """``zx`` = x @ W + b for this step, shape (B, 4H)."""
    n = U.shape[0]
    i, f, o, g = _gates(zx + h @ U, n, -1)
    c_new, h_new, tc = _update(c, i, f, o, g)
    return c_new, h_new, (c, h, i, f, o, g, tc)


def lstm_cell_backward(dc_new, dh_new, cache, U):
    """Returns ``(dc, dh, dz)``; ``dz`` is the gradient w.r.t. the gate pre-activations."""
    c, h, i, f, o, g, tc = cache
    dc, dz = _gate_grads(dc_new, dh_new, c, i, f, o, g, tc, -1)
    return dc, dz @ U.T, dz


def lstm_step(c, h, x, W, U, b):
    """One LSTM update.

    Shapes: ``c, h`` (B, H); ``x`` (B, D); ``W`` (D, 4H); ``U`` (H, 4H); ``b`` (4H,).
    Returns ``(c_new, h_new, cache)``.
    """
    n = U.shape[0]
    if c.shape != h.shape or h.shape[-1] != n or x.shape[-1] != W.shape[0] or W.shape[1] != 4 * n:
        raise ShapeError(
            f"lstm_step: state {c.shape}/{h.shape}, input {x.shape}, W {W.shape}, U {U.shape} do not agree"
        )
    c_new, h_new, cache = lstm_cell(c, h, x @ W + b, U)
    return c_new, h_new, cache + (x,)


def lstm_step_backward(dc_new, dh_new, cache, W, U):
    """Gradients of one :func:`lstm_step`: ``(dc, dh, dx, dW, dU, db)``."""
    x = cache[-1]
    h = cache[1]
    dc, dh, dz = lstm_cell_backward(dc_new, dh_new, cache[:-1], U)
    return dc, dh, dz @ W.T, x.T @ dz, h.T @ dz, dz.sum(axis=0)


# ---------------------------------------------------------------------------
# ConvLSTM
# ---------------------------------------------------------------------------


def same_pad(kernel):
    kh, kw = kernel
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"same padding needs odd kernel sizes, got {kernel}")
    return kh // 2, kw // 2


def conv_same_cols(x, kernel):
    """im2col of a same-padded, stride-1 convolution over (B, C, H, W)."""
    ph, pw = same_pad(kernel)
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    return im2col(xp, kernel[0], kernel[1], 1, 1), xp.shape


def conv_same_backward(dcols, xp_shape, kernel):
    ph, pw = same_pad(kernel)
    dxp = col2im(dcols, xp_shape, kernel[0], kernel[1], 1, 1)
    return dxp[:, :, ph : xp_shape[2] - ph, pw : xp_shape[3] - pw]


def convlstm_cell(c, h, zx, Wh, kernel):
    """``zx`` (B, H, W, 4F) is the input-side gate contribution (bias included).

    Gates are kept channels-last inside the cell; ``c`` and ``h`` are (B, H, W, F).
    """
    nf = Wh.shape[0] // 4
    hcols, hp_shape = conv_same_cols(h.transpose(0, 3, 1, 2), kernel)
    z = zx + (hcols @ Wh.T).reshape(zx.shape)
    i, f, o, g = _gates(z, nf, -1)
    c_new, h_new, tc = _update(c, i, f, o, g)
    return c_new, h_new, (c, hcols, hp_shape, i, f, o, g, tc)


def convlstm_cell_backward(dc_new, dh_new, cache, Wh, kernel):
    """Returns ``(dc, dh, dz, hcols)``; dz is channels-last (B, H, W, 4F)."""
    c, hcols, hp_shape, i, f, o, g, tc = cache
    dc, dz = _gate_grads(dc_new, dh_new, c, i, f, o, g, tc, -1)
    dzm = dz.reshape(-1, dz.shape[-1])
    dh = conv_same_backward(dzm @ Wh, hp_shape, kernel).transpose(0, 2, 3, 1)
    return dc, dh, dz, hcols


def _split_conv_weights(W, n_in, kernel):
    k = n_in * kernel[0] * kernel[1]
    return W[:, :k], W[:, k:]


def convlstm_step(c, h, x, W, b, kernel):
    """One ConvLSTM update with same-padded gate convolutions.

    ``x`` (B, C, H, W); ``c, h`` (B, F, H, W); ``W`` (4F, (C+F)*kh*kw); ``b`` (4F,).
    The gate convolution runs over the channel-stacked ``[x, h]``; gate values
    act on the state maps through elementwise products.
    """
    kh, kw = kernel
    nf = W.shape[0] // 4
    if (
        c.shape != h.shape
        or h.shape[1] != nf
        or x.shape[0] != h.shape[0]
        or x.shape[2:] != h.shape[2:]
        or W.shape[1] != (x.shape[1] + nf) * kh * kw
    ):
        raise ShapeError(
            f"convlstm_step: state {c.shape}, input {x.shape}, W {W.shape} do not agree for kernel {kernel}"
        )
    Wx, Wh = _split_conv_weights(W, x.shape[1], kernel)
    xcols, xp_shape = conv_same_cols(x, kernel)
    bsz, _, hh, ww = x.shape
    zx = (xcols @ Wx.T + b).reshape(bsz, hh, ww, 4 * nf)
    c_new, h_new, cache = convlstm_cell(c.transpose(0, 2, 3, 1), h.transpose(0, 2, 3, 1), zx, Wh, kernel)
    return (
        c_new.transpose(0, 3, 1, 2),
        h_new.transpose(0, 3, 1, 2),
        (cache, xcols, xp_shape, x.shape[1], kernel),
    )


def convlstm_step_backward(dc_new, dh_new, cache, W):
    """Gradients of one :func:`convlstm_step`: ``(dc, dh, dx, dW, db)``."""
    cell_cache, xcols, xp_shape, n_in, kernel = cache
    Wx, Wh = _split_conv_weights(W, n_in, kernel)
    dc, dh, dz, hcols = convlstm_cell_backward(
        dc_new.transpose(0, 2, 3, 1), dh_new.transpose(0, 2, 3, 1), cell_cache, Wh, kernel
    )
    dzm = dz.reshape(-1, dz.shape[-1])
    dW = np.concatenate([dzm.T @ xcols, dzm.T @ hcols], axis=1)
    dx = conv_same_backward(dzm @ Wx, xp_shape, kernel)
    return dc.transpose(0, 3, 1, 2), dh.transpose(0, 3, 1, 2), dx, dW, dzm.sum(axis=0)
