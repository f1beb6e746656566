"""Spherical-covariance Gaussian mixture fitted by EM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FitError, ParameterError

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GmmConfig:
    n_components: int = 18
    covariance: str = "spherical"
    max_iter: int = 500
    tol: float = 1e-6
    var_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.n_components < 1:
            raise ParameterError("n_components must be >= 1")
        if self.covariance != "spherical":
            raise ParameterError(f"only spherical covariance is supported, got {self.covariance!r}")
        if self.max_iter < 1 or self.tol <= 0 or self.var_floor <= 0:
            raise ParameterError("max_iter, tol and var_floor must be positive")


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k,)
    converged: bool = False
    history: tuple = field(default=(), compare=False)  # mean log-likelihood per iteration

    def component_logpdf(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        d = X.shape[1]
        sq = ((X[:, None, :] - self.means[None]) ** 2).sum(-1)
        return (
            np.log(self.weights)[None]
            - 0.5 * (d * (LOG_2PI + np.log(self.variances)))[None]
            - 0.5 * sq / self.variances[None]
        )

    def logpdf(self, X) -> np.ndarray:
        return logsumexp(self.component_logpdf(X), axis=1)


def logsumexp(a, axis):
    m = a.max(axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.exp(a - m).sum(axis=axis))


def kmeans_pp(X, k, rng):
    centers = [X[rng.integers(len(X))]]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        i = int(rng.choice(len(X), p=d2 / total)) if total > 0 else int(rng.integers(len(X)))
        centers.append(X[i])
        d2 = np.minimum(d2, ((X - X[i]) ** 2).sum(1))
    return np.array(centers)


def _m_step(X, resp, var_floor):
    n, d = X.shape
    nk = resp.sum(0) + 10 * np.finfo(np.float64).eps
    means = (resp.T @ X) / nk[:, None]
    sq = ((X[:, None, :] - means[None]) ** 2).sum(-1)
    variances = np.maximum((resp * sq).sum(0) / (d * nk), var_floor)
    return nk / n, means, variances


def em(X, cfg: GmmConfig = GmmConfig()) -> GmmModel:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise FitError("GMM needs a 2-D array")
    if len(X) < cfg.n_components:
        raise FitError(f"GMM with {cfg.n_components} components needs at least that many rows, got {len(X)}")
    if not np.isfinite(X).all():
        raise FitError("GMM input contains non-finite values")
    rng = np.random.default_rng(cfg.seed)
    # hard assignment to k-means++ seeds gives the first responsibilities
    centers = kmeans_pp(X, cfg.n_components, rng)
    nearest = ((X[:, None, :] - centers[None]) ** 2).sum(-1).argmin(1)
    resp = np.zeros((len(X), cfg.n_components))
    resp[np.arange(len(X)), nearest] = 1.0
    model = GmmModel(*_m_step(X, resp, cfg.var_floor))
    history = []
    converged = False
    for _ in range(cfg.max_iter):
        lp = model.component_logpdf(X)
        norm = logsumexp(lp, axis=1)
        history.append(float(norm.mean()))
        if len(history) > 1 and abs(history[-1] - history[-2]) < cfg.tol:
            converged = True
            break
        resp = np.exp(lp - norm[:, None])
        model = GmmModel(*_m_step(X, resp, cfg.var_floor))
    return GmmModel(model.weights, model.means, model.variances, converged, tuple(history))
