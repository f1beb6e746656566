"""Isolation forest with array-encoded trees.

Each tree is stored as five parallel arrays (feature, threshold, left, right,
size); leaves have ``feature == -1``. Path length of a leaf adds the
average-unsuccessful-search correction ``c(size)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._accel import njit, pick
from ..errors import FitError, ParameterError
from ..synth import child_seed

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class IsoForestConfig:
    n_estimators: int = 70
    contamination: float = 0.08
    subsample: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ParameterError("n_estimators must be >= 1")
        if not 0.0 < self.contamination < 0.5:
            raise ParameterError(f"contamination must lie in (0, 0.5), got {self.contamination}")
        if self.subsample < 2:
            raise ParameterError("subsample must be >= 2")


def c_factor(n):
    """Average path length of an unsuccessful BST search over ``n`` points."""
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    big = n > 2
    out[n == 2] = 1.0
    nb = n[big]
    out[big] = 2.0 * (np.log(nb - 1.0) + EULER_GAMMA) - 2.0 * (nb - 1.0) / nb
    return out


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "size")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], np.int64),
            np.asarray(d["threshold"], np.float64),
            np.asarray(d["left"], np.int64),
            np.asarray(d["right"], np.int64),
            np.asarray(d["size"], np.int64),
        )


def grow_tree(X, rng, max_depth) -> Tree:
    feature, threshold, left, right, size = [], [], [], [], []

    def node(idx, depth):
        k = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        size.append(len(idx))
        if depth >= max_depth or len(idx) <= 1:
            return k
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        usable = np.flatnonzero(hi > lo)
        if usable.size == 0:
            return k
        f = int(usable[rng.integers(usable.size)])
        t = float(rng.uniform(lo[f], hi[f]))
        mask = sub[:, f] < t
        feature[k], threshold[k] = f, t
        left[k] = node(idx[mask], depth + 1)
        right[k] = node(idx[~mask], depth + 1)
        return k

    node(np.arange(len(X)), 0)
    return Tree(
        np.array(feature, np.int64),
        np.array(threshold, np.float64),
        np.array(left, np.int64),
        np.array(right, np.int64),
        np.array(size, np.int64),
    )


@njit
def _path_loops(X, feature, threshold, left, right, leaf_c, offsets):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for t in range(n_trees):
        base = offsets[t]
        for r in range(n):
            k = base
            depth = 0.0
            while feature[k] >= 0:
                if X[r, feature[k]] < threshold[k]:
                    k = base + left[k]
                else:
                    k = base + right[k]
                depth += 1.0
            out[r] += depth + leaf_c[k]
    return out / n_trees


def _path_numpy(X, feature, threshold, left, right, leaf_c, offsets):
    n = X.shape[0]
    rows = np.arange(n)
    total = np.zeros(n)
    for t in range(len(offsets) - 1):
        base = offsets[t]
        k = np.full(n, base)
        depth = np.zeros(n)
        active = feature[k] >= 0
        while active.any():
            ka = k[active]
            go_left = X[rows[active], feature[ka]] < threshold[ka]
            k[active] = base + np.where(go_left, left[ka], right[ka])
            depth[active] += 1.0
            active = feature[k] >= 0
        total += depth + leaf_c[k]
    return total / (len(offsets) - 1)


PATH_LENGTH = {"numba": _path_loops, "numpy": _path_numpy}
path_length_kernel = pick(_path_loops, _path_numpy)


@dataclass(frozen=True)
class IsoForestModel:
    trees: tuple
    psi: int
    threshold: float  # anomaly score above which a point is flagged

    def _packed(self):
        offsets = np.zeros(len(self.trees) + 1, np.int64)
        offsets[1:] = np.cumsum([len(t.feature) for t in self.trees])
        cat = {k: np.concatenate([getattr(t, k) for t in self.trees])
               for k in ("feature", "threshold", "left", "right", "size")}
        leaf_c = np.where(cat["feature"] < 0, c_factor(cat["size"]), 0.0)
        return cat, leaf_c, offsets

    def path_length(self, X, impl=None) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        cat, leaf_c, offsets = self._packed()
        run = PATH_LENGTH[impl] if impl else path_length_kernel
        return run(X, cat["feature"], cat["threshold"], cat["left"], cat["right"], leaf_c, offsets)

    def anomaly_score(self, X, impl=None) -> np.ndarray:
        """``2 ** (-E[h(x)] / c(psi))``; close to 1 for anomalies, below 0.5 for inliers."""
        return 2.0 ** (-self.path_length(X, impl) / float(c_factor(self.psi)))


def canonical_order(X):
    """Row order independent of how the training set was shuffled."""
    return X[np.lexsort(X.T[::-1])]


def grow(X, cfg: IsoForestConfig = IsoForestConfig()) -> IsoForestModel:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise FitError("isolation forest needs a non-empty 2-D array")
    if not np.isfinite(X).all():
        raise FitError("isolation forest input contains non-finite values")
    X = canonical_order(X)
    psi = min(cfg.subsample, len(X))
    max_depth = int(math.ceil(math.log2(max(psi, 2))))
    trees = []
    for t in range(cfg.n_estimators):
        rng = np.random.default_rng(child_seed(cfg.seed, t))
        idx = np.sort(rng.choice(len(X), size=psi, replace=False))
        trees.append(grow_tree(X[idx], rng, max_depth))
    model = IsoForestModel(tuple(trees), psi, 0.0)
    scores = model.anomaly_score(X)
    thr = float(np.quantile(scores, 1.0 - cfg.contamination))
    return IsoForestModel(model.trees, psi, thr)
