"""Mini-batch training loop for supervised and metric (pair / triplet) objectives."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..errors import ParameterError, TrainingError
from ..synth import child_seed
from . import losses as L
from .model import ModelGraph
from .optim import make_optimizer

log = logging.getLogger(__name__)

DEFAULT_MARGINS = {"contrastive": 1.0, "triplet": 0.2}
LOSS_NAMES = ("bce", "cce", "mse", "contrastive", "triplet")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 20
    loss: str = "bce"
    margin: float | None = None
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    early_stopping: bool = False
    patience: int = 3
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ParameterError("epochs and batch_size must be >= 1")
        if self.loss not in LOSS_NAMES:
            raise ParameterError(f"loss must be one of {LOSS_NAMES}, got {self.loss!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ParameterError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.margin is not None and self.margin <= 0:
            raise ParameterError("margin must be positive")
        if self.patience < 1:
            raise ParameterError("patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ParameterError("val_fraction must lie in (0, 1)")

    @property
    def effective_margin(self) -> float:
        if self.margin is not None:
            return self.margin
        return DEFAULT_MARGINS.get(self.loss, 1.0)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "TrainConfig":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# objectives: each runs forward + backward on one batch and returns the loss
# ---------------------------------------------------------------------------


def _supervised(model, batch, cfg, backward=True):
    x, y = batch
    out = model.forward(x)
    value = L.LOSSES[cfg.loss][0](out, y)
    if backward and math.isfinite(value):
        model.backward(L.LOSSES[cfg.loss][1](out, y))
    return value


def pair_distances(model, a, b):
    e = model.forward(np.concatenate([a, b]), stop=model.embedding_index)
    ea, eb = e[: len(a)], e[len(a) :]
    return ea, eb, L.euclidean(ea, eb)


def _pairs(model, batch, cfg, backward=True):
    a, b, same = batch
    m = cfg.effective_margin
    ea, eb, d = pair_distances(model, a, b)
    value = L.contrastive(d, same, m)
    if backward and math.isfinite(value):
        da, db = L.euclidean_grad(ea, eb, d, L.contrastive_grad(d, same, m))
        model.backward(np.concatenate([da, db]), stop=model.embedding_index)
    return value


def _triplets(model, batch, cfg, backward=True):
    a, p, n = batch
    m = cfg.effective_margin
    k = len(a)
    e = model.forward(np.concatenate([a, p, n]), stop=model.embedding_index)
    ea, ep, en = e[:k], e[k : 2 * k], e[2 * k :]
    d_ap, d_an = L.euclidean(ea, ep), L.euclidean(ea, en)
    value = L.triplet(d_ap, d_an, m)
    if backward and math.isfinite(value):
        g_ap, g_an = L.triplet_grad(d_ap, d_an, m)
        da1, dp = L.euclidean_grad(ea, ep, d_ap, g_ap)
        da2, dn = L.euclidean_grad(ea, en, d_an, g_an)
        model.backward(np.concatenate([da1 + da2, dp, dn]), stop=model.embedding_index)
    return value


OBJECTIVES = {"bce": _supervised, "cce": _supervised, "mse": _supervised,
              "contrastive": _pairs, "triplet": _triplets}


def _accuracy(model, batch, cfg):
    if cfg.loss == "bce":
        x, y = batch
        return float(np.mean((model.predict(x)[:, 0] > 0.5) == (np.asarray(y) > 0.5)))
    if cfg.loss == "cce":
        x, y = batch
        return float(np.mean(model.predict(x).argmax(axis=1) == np.asarray(y)))
    return None


def _take(batch, idx):
    return tuple(np.asarray(part)[idx] for part in batch)


def _evaluate_loss(model, batch, cfg, batch_size):
    n = len(batch[0])
    total = 0.0
    for s in range(0, n, batch_size):
        part = _take(batch, np.arange(s, min(n, s + batch_size)))
        total += OBJECTIVES[cfg.loss](model, part, cfg, backward=False) * len(part[0])
    return total / n


def train(model: ModelGraph, data, cfg: TrainConfig, callback=None) -> ModelGraph:
    """Train ``model`` in place and return it; per-epoch metrics go to ``model.history``.

    ``data`` is ``(X, y)`` for bce/cce/mse, ``(A, B, same)`` for contrastive and
    ``(anchor, positive, negative)`` for triplet.
    """
    data = tuple(np.asarray(part) for part in data)
    n = len(data[0])
    if n == 0:
        raise TrainingError("training data is empty")
    if any(len(part) != n for part in data):
        raise ParameterError("all parts of the training data must have the same length")
    expected = 3 if cfg.loss in ("contrastive", "triplet") else 2
    if len(data) != expected:
        raise ParameterError(f"loss {cfg.loss!r} expects {expected} data arrays, got {len(data)}")

    rng = np.random.default_rng(child_seed(cfg.seed, 0x7A1))
    order = np.arange(n)
    val = None
    if cfg.early_stopping:
        order = rng.permutation(n)
        n_val = max(1, int(round(n * cfg.val_fraction)))
        if n_val >= n:
            raise ParameterError("validation split leaves no training data")
        val = _take(data, order[n - n_val :])
        order = order[: n - n_val]
    train_data = _take(data, order)
    n_train = len(order)

    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    step = OBJECTIVES[cfg.loss]
    best_score, best_weights, stale = -math.inf, None, 0
    model.history = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n_train)
        total = 0.0
        for b, s in enumerate(range(0, n_train, cfg.batch_size)):
            idx = perm[s : s + cfg.batch_size]
            value = step(model, _take(train_data, idx), cfg)
            if not math.isfinite(value):
                raise TrainingError(
                    f"non-finite {cfg.loss} loss ({value}) at epoch {epoch + 1}, batch {b + 1}"
                )
            opt.step(model.parameters())
            total += value * len(idx)
        record = {"epoch": epoch + 1, "loss": total / n_train}
        acc = _accuracy(model, train_data, cfg)
        if acc is not None:
            record["accuracy"] = acc
        if val is not None:
            vacc = _accuracy(model, val, cfg)
            vloss = _evaluate_loss(model, val, cfg, cfg.batch_size)
            record["val_loss"] = vloss
            score = -vloss if vacc is None else vacc
            if vacc is not None:
                record["val_accuracy"] = vacc
            if score > best_score:
                best_score, best_weights, stale = score, model.get_weights(), 0
            else:
                stale += 1
        model.history.append(record)
        log.info("%s epoch %d: %s", model.name, epoch + 1,
                 " ".join(f"{k}={v:.4f}" for k, v in record.items() if k != "epoch"))
        if callback is not None:
            callback(record)
        if val is not None and stale >= cfg.patience:
            log.info("%s: early stop after epoch %d", model.name, epoch + 1)
            break
    if best_weights is not None:
        model.set_weights(best_weights)
    return model
