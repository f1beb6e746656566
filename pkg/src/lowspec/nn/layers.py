"""Layer kinds. Shapes exclude the batch axis; every layer caches its last forward."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ShapeError
from .kernels import col2im, im2col, out_size
from .recurrent import (
    conv_same_backward,
    conv_same_cols,
    convlstm_cell,
    convlstm_cell_backward,
    lstm_cell,
    lstm_cell_backward,
    sigmoid,
)


def _pair(v) -> tuple[int, int]:
    if isinstance(v, int):
        return v, v
    a, b = v
    return int(a), int(b)


class Layer:
    kind = ""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.in_shape: tuple[int, ...] | None = None
        self.out_shape: tuple[int, ...] | None = None

    def hyper(self) -> dict:
        return {}

    def config(self) -> dict:
        return {"kind": self.kind, **self.hyper()}

    def build(self, in_shape, rng, dtype=np.float64) -> tuple[int, ...]:
        self.in_shape = tuple(int(s) for s in in_shape)
        self.dtype = np.dtype(dtype)
        self.out_shape = tuple(int(s) for s in self._build(self.in_shape, rng))
        for k, v in list(self.params.items()):
            self.params[k] = v.astype(self.dtype)
        return self.out_shape

    def _build(self, in_shape, rng):
        return in_shape

    def param_items(self):
        """(name, value, grad) triples; grad is None before any backward."""
        for k, v in self.params.items():
            yield k, v, self.grads.get(k)

    def forward(self, x):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def __repr__(self):
        hp = ", ".join(f"{k}={v}" for k, v in self.hyper().items())
        return f"{type(self).__name__}({hp})"


def _uniform(rng, fan_in, shape, gain=6.0):
    limit = math.sqrt(gain / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Conv2D(Layer):
    kind = "conv2d"

    def __init__(self, filters, kernel=(3, 3), stride=(1, 1), padding="valid"):
        super().__init__()
        self.filters = int(filters)
        self.kernel = _pair(kernel)
        self.stride = _pair(stride)
        if padding not in ("valid", "same"):
            raise ShapeError(f"padding must be 'valid' or 'same', got {padding!r}")
        self.padding = padding

    def hyper(self):
        return {"filters": self.filters, "kernel": list(self.kernel), "stride": list(self.stride),
                "padding": self.padding}

    def _pads(self):
        if self.padding == "valid":
            return 0, 0
        kh, kw = self.kernel
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError("same padding needs odd kernel sizes")
        return kh // 2, kw // 2

    def _build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise ShapeError(f"conv2d expects (C, H, W) input, got {in_shape}")
        c, h, w = in_shape
        kh, kw = self.kernel
        sh, sw = self.stride
        ph, pw = self._pads()
        ho, wo = out_size(h + 2 * ph, kh, sh), out_size(w + 2 * pw, kw, sw)
        if ho < 1 or wo < 1:
            raise ShapeError(f"conv2d kernel {self.kernel} does not fit input {in_shape}")
        fan_in = c * kh * kw
        self.params = {"W": _uniform(rng, fan_in, (self.filters, fan_in)), "b": np.zeros(self.filters)}
        return self.filters, ho, wo

    def forward(self, x):
        ph, pw = self._pads()
        xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x
        kh, kw = self.kernel
        sh, sw = self.stride
        self._cols = im2col(xp, kh, kw, sh, sw)
        self._xp_shape = xp.shape
        _, ho, wo = self.out_shape
        out = self._cols @ self.params["W"].T + self.params["b"]
        return out.reshape(x.shape[0], ho, wo, self.filters).transpose(0, 3, 1, 2)

    def backward(self, dy):
        dym = dy.transpose(0, 2, 3, 1).reshape(-1, self.filters)
        self.grads = {"W": dym.T @ self._cols, "b": dym.sum(axis=0)}
        kh, kw = self.kernel
        sh, sw = self.stride
        dxp = col2im(dym @ self.params["W"], self._xp_shape, kh, kw, sh, sw)
        ph, pw = self._pads()
        h, w = self.in_shape[1:]
        return dxp[:, :, ph : ph + h, pw : pw + w]


class MaxPool2D(Layer):
    """Non-overlapping max pooling over the last two axes; any leading axes pass through."""

    kind = "maxpool2d"

    def __init__(self, pool=(2, 2)):
        super().__init__()
        self.pool = _pair(pool)

    def hyper(self):
        return {"pool": list(self.pool)}

    def _build(self, in_shape, rng):
        if len(in_shape) < 2:
            raise ShapeError(f"maxpool2d needs at least 2 axes, got {in_shape}")
        ph, pw = self.pool
        ho, wo = in_shape[-2] // ph, in_shape[-1] // pw
        if ho < 1 or wo < 1:
            raise ShapeError(f"pool {self.pool} larger than input {in_shape}")
        return in_shape[:-2] + (ho, wo)

    def _blocks(self, x):
        ph, pw = self.pool
        ho, wo = self.out_shape[-2:]
        lead = x.shape[:-2]
        xr = x[..., : ho * ph, : wo * pw].reshape(lead + (ho, ph, wo, pw))
        return np.swapaxes(xr, -3, -2).reshape(lead + (ho, wo, ph * pw))

    def forward(self, x):
        blocks = self._blocks(x)
        self._arg = blocks.argmax(axis=-1)
        self._x_shape = x.shape
        return np.take_along_axis(blocks, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        ph, pw = self.pool
        ho, wo = self.out_shape[-2:]
        lead = dy.shape[:-2]
        blocks = np.zeros(lead + (ho, wo, ph * pw), dtype=dy.dtype)
        np.put_along_axis(blocks, self._arg[..., None], dy[..., None], axis=-1)
        dx_core = np.swapaxes(blocks.reshape(lead + (ho, wo, ph, pw)), -3, -2).reshape(lead + (ho * ph, wo * pw))
        dx = np.zeros(self._x_shape, dtype=dy.dtype)
        dx[..., : ho * ph, : wo * pw] = dx_core
        return dx


class Dense(Layer):
    kind = "dense"

    def __init__(self, units):
        super().__init__()
        self.units = int(units)

    def hyper(self):
        return {"units": self.units}

    def _build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise ShapeError(f"dense expects a flat input, got {in_shape}; add a flatten layer")
        d = in_shape[0]
        self.params = {"W": _uniform(rng, d, (d, self.units)), "b": np.zeros(self.units)}
        return (self.units,)

    def forward(self, x):
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dy):
        self.grads = {"W": self._x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T


class ReLU(Layer):
    kind = "relu"

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy):
        return np.where(self._mask, dy, 0.0)


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x):
        self._y = sigmoid(x)
        return self._y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)


class Tanh(Layer):
    kind = "tanh"

    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y**2)


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x):
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        self._y = e / e.sum(axis=-1, keepdims=True)
        return self._y

    def backward(self, dy):
        y = self._y
        return y * (dy - (dy * y).sum(axis=-1, keepdims=True))


class Flatten(Layer):
    kind = "flatten"

    def _build(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape((dy.shape[0],) + self.in_shape)


class L2Norm(Layer):
    kind = "l2norm"
    eps = 1e-12

    def _build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise ShapeError(f"l2norm expects a flat input, got {in_shape}")
        return in_shape

    def forward(self, x):
        self._n = np.sqrt((x * x).sum(axis=-1, keepdims=True) + self.eps)
        self._y = x / self._n
        return self._y

    def backward(self, dy):
        y = self._y
        return (dy - y * (dy * y).sum(axis=-1, keepdims=True)) / self._n


class GlobalAvgPool(Layer):
    kind = "global_avgpool"

    def _build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise ShapeError(f"global_avgpool expects (C, H, W), got {in_shape}")
        return (in_shape[0],)

    def forward(self, x):
        return x.mean(axis=(2, 3))

    def backward(self, dy):
        c, h, w = self.in_shape
        return np.broadcast_to(dy[:, :, None, None] / (h * w), (dy.shape[0], c, h, w)).copy()


class Sequence(Layer):
    """(C, H, W) -> time-major sequence over the W (frame) axis.

    ``maps=False`` gives feature vectors (W, C*H) for an LSTM;
    ``maps=True`` gives per-frame column maps (W, C, H, 1) for a ConvLSTM.
    """

    kind = "sequence"

    def __init__(self, maps=False):
        super().__init__()
        self.maps = bool(maps)

    def hyper(self):
        return {"maps": self.maps}

    def _build(self, in_shape, rng):
        if len(in_shape) != 3:
            raise ShapeError(f"sequence expects (C, H, W), got {in_shape}")
        c, h, w = in_shape
        return (w, c, h, 1) if self.maps else (w, c * h)

    def forward(self, x):
        b = x.shape[0]
        y = x.transpose(0, 3, 1, 2)
        return y[..., None] if self.maps else y.reshape(b, self.out_shape[0], -1)

    def backward(self, dy):
        b = dy.shape[0]
        c, h, w = self.in_shape
        return dy.reshape(b, w, c, h).transpose(0, 2, 3, 1)


class LSTM(Layer):
    kind = "lstm"

    def __init__(self, units, return_sequences=False):
        super().__init__()
        self.units = int(units)
        self.return_sequences = bool(return_sequences)

    def hyper(self):
        return {"units": self.units, "return_sequences": self.return_sequences}

    def _build(self, in_shape, rng):
        if len(in_shape) != 2:
            raise ShapeError(f"lstm expects (T, D), got {in_shape}")
        t, d = in_shape
        n = self.units
        b = np.zeros(4 * n)
        b[n : 2 * n] = 1.0  # forget-gate bias
        self.params = {
            "W": _uniform(rng, d + n, (d, 4 * n), gain=3.0),
            "U": _uniform(rng, d + n, (n, 4 * n), gain=3.0),
            "b": b,
        }
        return (t, n) if self.return_sequences else (n,)

    def forward(self, x):
        bsz, t, d = x.shape
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        xt = np.ascontiguousarray(x.transpose(1, 0, 2))
        zx = (xt.reshape(t * bsz, d) @ W + b).reshape(t, bsz, -1)
        c = np.zeros((bsz, self.units), dtype=x.dtype)
        h = np.zeros_like(c)
        self._xt = xt
        self._caches = []
        hs = []
        for s in range(t):
            c, h, cache = lstm_cell(c, h, zx[s], U)
            self._caches.append(cache)
            hs.append(h)
        return np.stack(hs, axis=1) if self.return_sequences else h

    def backward(self, dy):
        W, U = self.params["W"], self.params["U"]
        t = len(self._caches)
        bsz = dy.shape[0]
        dz = np.empty((t, bsz, W.shape[1]), dtype=dy.dtype)
        dc = np.zeros((bsz, self.units), dtype=dy.dtype)
        dh = np.zeros_like(dc)
        for s in range(t - 1, -1, -1):
            if self.return_sequences:
                dh = dh + dy[:, s]
            elif s == t - 1:
                dh = dh + dy
            dc, dh, dz[s] = lstm_cell_backward(dc, dh, self._caches[s], U)
        dzm = dz.reshape(t * bsz, -1)
        h_prev = np.stack([cache[1] for cache in self._caches]).reshape(t * bsz, -1)
        self.grads = {
            "W": self._xt.reshape(t * bsz, -1).T @ dzm,
            "U": h_prev.T @ dzm,
            "b": dzm.sum(axis=0),
        }
        return (dzm @ W.T).reshape(t, bsz, -1).transpose(1, 0, 2)


class ConvLSTM(Layer):
    """Input (T, C, H, W); state maps keep the spatial shape (same padding)."""

    kind = "convlstm"

    def __init__(self, filters, kernel=(3, 1), return_sequences=False):
        super().__init__()
        self.filters = int(filters)
        self.kernel = _pair(kernel)
        self.return_sequences = bool(return_sequences)

    def hyper(self):
        return {"filters": self.filters, "kernel": list(self.kernel),
                "return_sequences": self.return_sequences}

    def _build(self, in_shape, rng):
        if len(in_shape) != 4:
            raise ShapeError(f"convlstm expects (T, C, H, W), got {in_shape}")
        kh, kw = self.kernel
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"convlstm needs odd kernel sizes, got {self.kernel}")
        t, c, h, w = in_shape
        f = self.filters
        fan_in = (c + f) * kh * kw
        b = np.zeros(4 * f)
        b[f : 2 * f] = 1.0
        self.params = {"W": _uniform(rng, fan_in, (4 * f, fan_in), gain=3.0), "b": b}
        return (t, f, h, w) if self.return_sequences else (f, h, w)

    def forward(self, x):
        bsz, t, cin, h, w = x.shape
        f = self.filters
        Wx, Wh = self._split()
        xt = np.ascontiguousarray(x.transpose(1, 0, 2, 3, 4)).reshape(t * bsz, cin, h, w)
        self._xcols, self._xp_shape = conv_same_cols(xt, self.kernel)
        zx = (self._xcols @ Wx.T + self.params["b"]).reshape(t, bsz, h, w, 4 * f)
        c = np.zeros((bsz, h, w, f), dtype=x.dtype)
        hid = np.zeros_like(c)
        self._caches = []
        hs = []
        for s in range(t):
            c, hid, cache = convlstm_cell(c, hid, zx[s], Wh, self.kernel)
            self._caches.append(cache)
            hs.append(hid)
        if self.return_sequences:
            return np.stack(hs, axis=1).transpose(0, 1, 4, 2, 3)
        return hid.transpose(0, 3, 1, 2)

    def _split(self):
        k = self.in_shape[1] * self.kernel[0] * self.kernel[1]
        W = self.params["W"]
        return W[:, :k], W[:, k:]

    def backward(self, dy):
        Wx, Wh = self._split()
        t, cin, h, w = self.in_shape
        bsz = dy.shape[0]
        f = self.filters
        if self.return_sequences:
            dy_last = dy.transpose(0, 1, 3, 4, 2)
        else:
            dy_last = dy.transpose(0, 2, 3, 1)
        dz = np.empty((t, bsz, h, w, 4 * f), dtype=dy.dtype)
        hcols = []
        dc = np.zeros((bsz, h, w, f), dtype=dy.dtype)
        dh = np.zeros_like(dc)
        for s in range(t - 1, -1, -1):
            if self.return_sequences:
                dh = dh + dy_last[:, s]
            elif s == t - 1:
                dh = dh + dy_last
            dc, dh, dz[s], hc = convlstm_cell_backward(dc, dh, self._caches[s], Wh, self.kernel)
            hcols.append(hc)
        dzm = dz.reshape(-1, 4 * f)
        hcols_all = np.concatenate(hcols[::-1], axis=0)
        self.grads = {
            "W": np.concatenate([dzm.T @ self._xcols, dzm.T @ hcols_all], axis=1),
            "b": dzm.sum(axis=0),
        }
        dx = conv_same_backward(dzm @ Wx, self._xp_shape, self.kernel)
        return dx.reshape(t, bsz, cin, h, w).transpose(1, 0, 2, 3, 4)


class Residual(Layer):
    """``x + f(x)`` for a stack ``f`` that preserves shape."""

    kind = "residual"

    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def hyper(self):
        return {"layers": [layer.config() for layer in self.layers]}

    def _build(self, in_shape, rng):
        shape = in_shape
        for layer in self.layers:
            shape = layer.build(shape, rng, self.dtype)
        if shape != in_shape:
            raise ShapeError(f"residual branch maps {in_shape} to {shape}; shapes must match")
        return in_shape

    @property
    def params(self):
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.params.items()}

    @params.setter
    def params(self, value):
        if value:
            raise AttributeError("residual parameters live in its sub-layers")

    @property
    def grads(self):
        return {f"{i}.{k}": v for i, layer in enumerate(self.layers) for k, v in layer.grads.items()}

    @grads.setter
    def grads(self, value):
        pass

    def forward(self, x):
        y = x
        for layer in self.layers:
            y = layer.forward(y)
        return x + y

    def backward(self, dy):
        d = dy
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return dy + d


LAYER_KINDS = {
    cls.kind: cls
    for cls in (Conv2D, MaxPool2D, Dense, ReLU, Sigmoid, Tanh, Softmax, Flatten, L2Norm,
                GlobalAvgPool, Sequence, LSTM, ConvLSTM, Residual)
}


def layer_from_config(cfg: dict) -> Layer:
    cfg = dict(cfg)
    kind = cfg.pop("kind")
    if kind not in LAYER_KINDS:
        raise ShapeError(f"unknown layer kind {kind!r}")
    if kind == "residual":
        return Residual([layer_from_config(c) for c in cfg["layers"]])
    for key in ("kernel", "stride", "pool"):
        if key in cfg:
            cfg[key] = tuple(cfg[key])
    return LAYER_KINDS[kind](**cfg)
