"""Twin-network verification over a single shared embedding trunk.

Both branches run through the same ModelGraph object (inputs are stacked into
one batch), so there is exactly one copy of the weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .architectures import as_batch, build
from .errors import ArtifactError, ParameterError, TrainingError
from .nn import ModelGraph, TrainConfig, load_model, save_model, train
from .nn.losses import euclidean
from .spectrogram import StftConfig, spectrogram_stack
from .synth import LabeledAudioSet, child_seed

SIDECAR = "siamese.json"
SIDECAR_VERSION = 1
REGIME_FOR_LOSS = {"contrastive": "pairs", "triplet": "triplets"}


@dataclass
class SiameseModel:
    trunk: ModelGraph
    distance: str = "euclidean"
    threshold: float | None = None

    def embed(self, x) -> np.ndarray:
        out = self.trunk.predict(as_batch(x), embed=True)
        return out.reshape(len(out), -1).astype(np.float64)

    def distances(self, a, b) -> np.ndarray:
        return euclidean(self.embed(a), self.embed(b))


def pair_arrays(data: LabeledAudioSet, stft_cfg: StftConfig = StftConfig()):
    """(A, B, same) for a pair set, (anchor, positive, negative) for a triplet set."""
    if data.regime not in ("pairs", "triplets"):
        raise ParameterError(f"expected a pairs or triplets set, got regime {data.regime!r}")
    k = 2 if data.regime == "pairs" else 3
    x = as_batch(spectrogram_stack(data.audio_items(), stft_cfg, data.duration_s, data.fs))
    x = x.reshape((len(data), k) + x.shape[1:])
    parts = tuple(np.ascontiguousarray(x[:, j]) for j in range(k))
    if data.regime == "pairs":
        return parts + (data.labels,)
    return parts


def triplets_as_pairs(a, p, n):
    """Each triplet yields one same pair (a, p) and one different pair (a, n)."""
    return np.concatenate([a, a]), np.concatenate([p, n]), np.r_[np.ones(len(a)), np.zeros(len(a))]


def select_threshold(distances, same) -> float:
    """Cutoff maximising pair accuracy (similar iff distance < cutoff).

    Candidates are the midpoints between consecutive distinct sorted distances,
    plus one point below the minimum and one above the maximum. Ties go to the
    smallest cutoff.
    """
    d = np.asarray(distances, dtype=np.float64).ravel()
    y = np.asarray(same).ravel().astype(bool)
    if d.size == 0:
        raise ParameterError("threshold selection needs at least one validation pair")
    if d.shape != y.shape:
        raise ParameterError("distances and flags differ in length")
    u = np.unique(d)
    cands = np.concatenate([[u[0] - 1.0], (u[:-1] + u[1:]) / 2, [u[-1] + 1.0]])
    return float(cands[int(np.argmax(threshold_accuracies(d, y, cands)))])


def threshold_accuracies(d, same, cutoffs) -> np.ndarray:
    order = np.sort(d)
    ys = np.asarray(same, bool)[np.argsort(d, kind="stable")]
    k = np.searchsorted(order, cutoffs, side="left")  # pairs predicted similar
    same_below = np.concatenate([[0], np.cumsum(ys)])[k]
    diff_above = (~ys).sum() - np.concatenate([[0], np.cumsum(~ys)])[k]
    return (same_below + diff_above) / d.size


def train_siamese(trunk_arch, data, cfg: TrainConfig = TrainConfig(epochs=30, batch_size=10, loss="contrastive"),
                  stft_cfg: StftConfig = StftConfig(), val_fraction: float = 0.2, seed: int | None = None,
                  dtype: str = "float64") -> SiameseModel:
    """Train the trunk on pairs (contrastive) or triplets (triplet loss).

    ``val_fraction`` of the training records is held out to choose the
    distance threshold.
    """
    if cfg.loss not in REGIME_FOR_LOSS:
        raise ParameterError(f"siamese training needs a contrastive or triplet loss, got {cfg.loss!r}")
    if isinstance(data, LabeledAudioSet):
        if data.regime != REGIME_FOR_LOSS[cfg.loss]:
            raise ParameterError(f"{cfg.loss} loss needs a {REGIME_FOR_LOSS[cfg.loss]} set, got {data.regime!r}")
        arrays = pair_arrays(data, stft_cfg)
    else:
        arrays = tuple(np.asarray(a) for a in data)
    if not 0.0 < val_fraction < 1.0:
        raise ParameterError("val_fraction must lie in (0, 1)")
    n = len(arrays[0])
    n_val = max(1, int(round(n * val_fraction)))
    if n_val >= n:
        raise ParameterError("validation split leaves no training records")
    s = cfg.seed if seed is None else seed
    order = np.random.default_rng(child_seed(s, 0x51A)).permutation(n)
    fit_idx, val_idx = np.sort(order[n_val:]), np.sort(order[:n_val])
    if isinstance(trunk_arch, ModelGraph):
        trunk = trunk_arch
    else:
        trunk = build(trunk_arch, arrays[0].shape[2:], head="embedding", seed=s, dtype=dtype)
    train(trunk, tuple(a[fit_idx] for a in arrays), cfg)
    model = SiameseModel(trunk)
    val = tuple(a[val_idx] for a in arrays)
    va, vb, vsame = val if cfg.loss == "contrastive" else triplets_as_pairs(*val)
    model.threshold = select_threshold(model.distances(va, vb), vsame)
    return model


def similarity(model: SiameseModel, a, b):
    """``(distance, similar)`` for one pair of spectrograms (or row-aligned batches)."""
    if model.threshold is None:
        raise TrainingError("siamese model has no decision threshold; train it first")
    single = np.ndim(a if not hasattr(a, "mag") else a.mag) == 2
    d = model.distances(a, b)
    if single:
        return float(d[0]), bool(d[0] < model.threshold)
    return d, d < model.threshold


def verify_fewshot(model: SiameseModel, support, support_labels, query) -> np.ndarray:
    """Label each query by the nearest class centroid of the support embeddings."""
    labels = np.asarray(support_labels)
    if labels.size == 0:
        raise ParameterError("few-shot verification needs a non-empty support set")
    es = model.embed(support)
    if len(es) != labels.size:
        raise ParameterError("support items and labels differ in length")
    classes = np.unique(labels)
    centroids = np.stack([es[labels == c].mean(axis=0) for c in classes])
    eq = model.embed(query)
    d = ((eq[:, None, :] - centroids[None]) ** 2).sum(-1)
    return classes[np.argmin(d, axis=1)]


def save_siamese(model: SiameseModel, directory) -> Path:
    d = save_model(model.trunk, directory)
    sidecar = {"format_version": SIDECAR_VERSION, "distance": model.distance, "threshold": model.threshold}
    (d / SIDECAR).write_text(json.dumps(sidecar, sort_keys=True))
    return d


def load_siamese(directory) -> SiameseModel:
    d = Path(directory)
    try:
        sidecar = json.loads((d / SIDECAR).read_text())
    except FileNotFoundError:
        raise ArtifactError(f"missing siamese sidecar {d / SIDECAR}") from None
    if sidecar.get("format_version") != SIDECAR_VERSION:
        raise ArtifactError(f"siamese sidecar version {sidecar.get('format_version')} != {SIDECAR_VERSION}")
    return SiameseModel(load_model(d), sidecar["distance"], sidecar["threshold"])


def fewshot_accuracy(model: SiameseModel, signatures, noise, seed: int, n_way: int = 2, n_shot: int = 1,
                     n_episodes: int = 50, stft_cfg: StftConfig = StftConfig(), duration_s: float = 0.75,
                     fs: int = 44100) -> float:
    """Mean accuracy of :func:`verify_fewshot` over random n-way k-shot episodes.

    Every support and query item is a fresh noise realisation.
    """
    from .synth import AudioItem

    if len(signatures) < n_way:
        raise ParameterError(f"{n_way}-way episodes need at least {n_way} signatures")
    rng = np.random.default_rng(child_seed(seed, 0xF5))
    correct = total = 0
    for e in range(n_episodes):
        classes = rng.choice(len(signatures), size=n_way, replace=False)
        support, labels, query, truth = [], [], [], []
        for c in classes:
            sig = signatures[int(c)]
            for j in range(n_shot + 1):
                item = AudioItem(sig, noise, child_seed(seed, e, int(c), j), "member")
                (support if j < n_shot else query).append(item)
                (labels if j < n_shot else truth).append(int(c))
        xs = spectrogram_stack(support, stft_cfg, duration_s, fs).astype(np.float32)
        xq = spectrogram_stack(query, stft_cfg, duration_s, fs).astype(np.float32)
        pred = verify_fewshot(model, xs, labels, xq)
        correct += int(np.sum(pred == np.asarray(truth)))
        total += len(truth)
    return correct / total
