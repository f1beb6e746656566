"""Losses as (value, gradient) function pairs. Values are batch means."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError

EPS = 1e-7


def _as_col(pred, target):
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64).reshape(p.shape)
    return p, y


def bce(pred, target) -> float:
    p, y = _as_col(pred, target)
    pc = np.clip(p, EPS, 1.0 - EPS)
    return float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))


def bce_grad(pred, target):
    # exact derivative where unclamped; the clamp only guards the denominator
    p, y = _as_col(pred, target)
    pc = np.clip(p, EPS, 1.0 - EPS)
    return (pc - y) / (pc * (1.0 - pc)) / p.size


def one_hot(labels, k: int):
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _targets(pred, target):
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target)
    if t.ndim == 1 and p.ndim == 2:
        t = one_hot(t, p.shape[1])
    return p, t.astype(np.float64)


def cce(pred, target) -> float:
    """Categorical cross-entropy; ``target`` is one-hot rows or integer labels."""
    p, t = _targets(pred, target)
    return float(np.mean(-(t * np.log(np.clip(p, EPS, 1.0))).sum(axis=-1)))


def cce_grad(pred, target):
    p, t = _targets(pred, target)
    return -t / np.clip(p, EPS, 1.0) / p.shape[0]


def mse(pred, target) -> float:
    p, y = _as_col(pred, target)
    return float(np.mean((p - y) ** 2))


def mse_grad(pred, target):
    p, y = _as_col(pred, target)
    return 2.0 * (p - y) / p.size


def contrastive(d, same, margin: float = 1.0) -> float:
    """``same*d^2 + (1-same)*max(0, margin-d)^2``, averaged."""
    d = np.asarray(d, dtype=np.float64)
    s = np.asarray(same, dtype=np.float64)
    if np.any(d < 0):
        raise ParameterError("distances must be non-negative")
    if margin <= 0:
        raise ParameterError("margin must be positive")
    return float(np.mean(s * d**2 + (1.0 - s) * np.maximum(0.0, margin - d) ** 2))


def contrastive_grad(d, same, margin: float = 1.0):
    d = np.asarray(d, dtype=np.float64)
    s = np.asarray(same, dtype=np.float64)
    return (2.0 * s * d - 2.0 * (1.0 - s) * np.maximum(0.0, margin - d)) / d.size


def triplet(d_ap, d_an, margin: float = 0.2) -> float:
    d_ap = np.asarray(d_ap, dtype=np.float64)
    d_an = np.asarray(d_an, dtype=np.float64)
    if margin <= 0:
        raise ParameterError("margin must be positive")
    return float(np.mean(np.maximum(0.0, d_ap - d_an + margin)))


def triplet_grad(d_ap, d_an, margin: float = 0.2):
    """Gradients w.r.t. ``(d_ap, d_an)``; zero wherever the margin holds strictly."""
    d_ap = np.asarray(d_ap, dtype=np.float64)
    d_an = np.asarray(d_an, dtype=np.float64)
    active = (d_ap - d_an + margin > 0).astype(np.float64) / d_ap.size
    return active, -active


def euclidean(a, b):
    """Row-wise Euclidean distance."""
    diff = np.asarray(a) - np.asarray(b)
    return np.sqrt((diff * diff).sum(axis=-1))


def euclidean_grad(a, b, d, dd):
    """Backprop ``dd`` (per-row upstream grad) through :func:`euclidean` to ``(da, db)``.

    The distance is not differentiable at ``a == b``; the zero subgradient is used.
    """
    diff = np.asarray(a) - np.asarray(b)
    scale = np.where(d > 0, dd / np.where(d > 0, d, 1.0), 0.0)[..., None]
    g = scale * diff
    return g, -g


LOSSES = {
    "bce": (bce, bce_grad),
    "cce": (cce, cce_grad),
    "mse": (mse, mse_grad),
}
