"""One-class SVM (nu formulation, RBF kernel) solved by SMO.

Dual, in the libsvm scaling::

    min_a  0.5 a^T K a    s.t.  0 <= a_i <= 1,  sum(a) = nu * n

Decision value ``f(x) = sum_i a_i k(x_i, x) - rho``; positive means inlier.
Pair selection uses second-order working-set selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._accel import njit, pick
from ..errors import FitError, ParameterError

TAU = 1e-12


@dataclass(frozen=True)
class OcSvmConfig:
    gamma: float = 0.001
    nu: float = 0.08
    kernel: str = "rbf"
    tol: float = 1e-3
    max_iter: int = 100_000

    def __post_init__(self):
        if self.kernel != "rbf":
            raise ParameterError(f"only the rbf kernel is supported, got {self.kernel!r}")
        if not 0.0 < self.nu < 1.0:
            raise ParameterError(f"nu must lie in (0, 1), got {self.nu}")
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if self.tol <= 0 or self.max_iter < 1:
            raise ParameterError("tol and max_iter must be positive")


def sq_dists(a, b):
    d = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.maximum(d, 0.0)


def rbf_kernel(a, b, gamma):
    return np.exp(-gamma * sq_dists(np.asarray(a, np.float64), np.asarray(b, np.float64)))


def initial_alpha(n, nu):
    # libsvm start: the first floor(nu*n) multipliers at the bound, one fractional
    alpha = np.zeros(n)
    total = nu * n
    k = int(total)
    alpha[:k] = 1.0
    if k < n:
        alpha[k] = total - k
    return alpha


def _smo_numpy(K, alpha, tol, max_iter):
    G = K @ alpha
    diag = np.diag(K).copy()
    it = 0
    while it < max_iter:
        up = alpha < 1.0
        low = alpha > 0.0
        mg = -G
        cand = np.where(up, mg, -np.inf)
        i = int(np.argmax(cand))
        gmax = cand[i]
        lo_vals = np.where(low, mg, np.inf)
        if gmax - lo_vals.min() < tol:
            break
        b = gmax - mg
        ok = low & (b > 0)
        a = np.maximum(diag[i] + diag - 2.0 * K[i], TAU)
        obj = np.where(ok, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        delta = min(b[j] / a[j], 1.0 - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        G += delta * (K[:, i] - K[:, j])
        it += 1
    return alpha, G, it


@njit
def _smo_loops(K, alpha, tol, max_iter):
    n = K.shape[0]
    G = K @ alpha
    it = 0
    while it < max_iter:
        i = -1
        gmax = -np.inf
        gmin = np.inf
        for t in range(n):
            if alpha[t] < 1.0 and -G[t] > gmax:
                gmax = -G[t]
                i = t
            if alpha[t] > 0.0 and -G[t] < gmin:
                gmin = -G[t]
        if gmax - gmin < tol:
            break
        j = -1
        best = np.inf
        for t in range(n):
            if alpha[t] > 0.0:
                b = gmax + G[t]
                if b > 0.0:
                    a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                    if a < TAU:
                        a = TAU
                    v = -(b * b) / a
                    if v < best:
                        best = v
                        j = t
        a = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if a < TAU:
            a = TAU
        delta = (gmax + G[j]) / a
        if delta > 1.0 - alpha[i]:
            delta = 1.0 - alpha[i]
        if delta > alpha[j]:
            delta = alpha[j]
        alpha[i] += delta
        alpha[j] -= delta
        for t in range(n):
            G[t] += delta * (K[t, i] - K[t, j])
        it += 1
    return alpha, G, it


SMO = {"numba": _smo_loops, "numpy": _smo_numpy}
smo = pick(_smo_loops, _smo_numpy)


def compute_rho(alpha, G):
    free = (alpha > 0.0) & (alpha < 1.0)
    if free.any():
        return float(G[free].mean())
    # no free multipliers: midpoint of the feasible interval
    ub = G[alpha <= 0.0].min() if (alpha <= 0.0).any() else np.inf
    lb = G[alpha >= 1.0].max() if (alpha >= 1.0).any() else -np.inf
    return float((ub + lb) / 2)


@dataclass(frozen=True)
class OcSvmModel:
    support: np.ndarray  # (n_sv, d)
    coef: np.ndarray  # (n_sv,)
    rho: float
    gamma: float
    n_iter: int

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return rbf_kernel(X, self.support, self.gamma) @ self.coef - self.rho


def solve(X, cfg: OcSvmConfig = OcSvmConfig(), impl=None) -> OcSvmModel:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise FitError("OC-SVM needs a 2-D array with at least 2 rows")
    if not np.isfinite(X).all():
        raise FitError("OC-SVM input contains non-finite values")
    if np.ptp(X, axis=0).max() == 0.0:
        raise FitError("OC-SVM input rows are all identical")
    K = rbf_kernel(X, X, cfg.gamma)
    run = SMO[impl] if impl else smo
    alpha, G, it = run(K, initial_alpha(len(X), cfg.nu), cfg.tol, cfg.max_iter)
    rho = compute_rho(alpha, G)
    sv = alpha > 0.0
    return OcSvmModel(X[sv].copy(), alpha[sv].copy(), rho, cfg.gamma, int(it))
