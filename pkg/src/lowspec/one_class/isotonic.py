"""Isotonic (non-decreasing) least-squares fit by pool-adjacent-violators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._accel import njit, pick
from ..errors import FitError


def _pav_py(y, w):
    """Weighted PAV over values already sorted by score; returns the fitted values."""
    n = y.shape[0]
    val = np.empty(n)
    wt = np.empty(n)
    cnt = np.empty(n, dtype=np.int64)
    top = 0
    for i in range(n):
        val[top] = y[i]
        wt[top] = w[i]
        cnt[top] = 1
        top += 1
        while top > 1 and val[top - 2] > val[top - 1]:
            tw = wt[top - 2] + wt[top - 1]
            val[top - 2] = (val[top - 2] * wt[top - 2] + val[top - 1] * wt[top - 1]) / tw
            wt[top - 2] = tw
            cnt[top - 2] += cnt[top - 1]
            top -= 1
    out = np.empty(n)
    k = 0
    for b in range(top):
        for _ in range(cnt[b]):
            out[k] = val[b]
            k += 1
    return out


_pav_loops = njit(_pav_py)
PAV = {"numba": _pav_loops, "numpy": _pav_py}
pav = pick(_pav_loops, _pav_py)


@dataclass(frozen=True)
class IsotonicMap:
    """Piecewise-linear monotone map through (x, y) knots; clipped outside."""

    x: np.ndarray
    y: np.ndarray

    def __call__(self, scores) -> np.ndarray:
        return np.clip(np.interp(np.asarray(scores, dtype=np.float64), self.x, self.y), 0.0, 1.0)


def fit_isotonic(scores, labels, impl=None) -> IsotonicMap:
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = np.asarray(labels, dtype=np.float64).ravel()
    if s.shape != t.shape:
        raise FitError("scores and labels differ in length")
    if not np.isfinite(s).all():
        raise FitError("calibration scores contain non-finite values")
    if len(np.unique(t)) < 2:
        raise FitError("calibration set needs both labels present")
    # tied scores are pooled first so the map is a function of the score
    xs, inv = np.unique(s, return_inverse=True)
    if len(xs) < 2:
        raise FitError("calibration needs at least 2 distinct scores")
    w = np.bincount(inv).astype(np.float64)
    ys = np.bincount(inv, weights=t) / w
    run = PAV[impl] if impl else pav
    fitted = run(ys, w)
    return IsotonicMap(xs, np.clip(fitted, 0.0, 1.0))
