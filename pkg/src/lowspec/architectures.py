"""Layer recipes for the proposed networks and the comparison baselines.

Inputs are single-channel spectrograms ``(1, bins, frames)``. Kernels and
strides are written (frequency, time); no recipe strides harder along
frequency than along time.

Every recipe is a trunk plus one of three heads:

* ``binary``    -> dense 1 + sigmoid
* ``softmax``   -> dense 64 + relu (embedding) -> dense K + softmax
* ``embedding`` -> dense 64 + l2norm
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .nn import (
    LSTM,
    ConvLSTM,
    Conv2D,
    Dense,
    Flatten,
    GlobalAvgPool,
    L2Norm,
    MaxPool2D,
    ModelGraph,
    ReLU,
    Residual,
    Sequence,
    Sigmoid,
    Softmax,
    TrainConfig,
    train,
)
from .spectrogram import Spectrogram, StftConfig, spectrogram_stack
from .synth import LabeledAudioSet

ARCHITECTURES = ("spec_cnn", "oc_spec_cnn", "si_spec_cnn", "basic_cnn", "lenet", "mini_deep")
HEADS = ("binary", "softmax", "embedding")
DEFAULT_HEADS = {"spec_cnn": "binary", "oc_spec_cnn": "softmax", "si_spec_cnn": "embedding"}
EMBEDDING_DIM = 64


@dataclass(frozen=True)
class ArchitectureId:
    name: str
    input_shape: tuple[int, int] = (64, 63)

    def __post_init__(self):
        if self.name not in ARCHITECTURES:
            raise ParameterError(f"unknown architecture {self.name!r}; choose from {ARCHITECTURES}")
        if len(self.input_shape) != 2 or min(self.input_shape) < 1:
            raise ParameterError(f"input_shape must be (bins, frames), got {self.input_shape}")


def _spec_cnn_trunk():
    return [
        Conv2D(16, (3, 5), (1, 2)), ReLU(), MaxPool2D((2, 2)),
        Conv2D(32, (3, 5), (1, 2)), ReLU(), MaxPool2D((2, 2)),
        Flatten(), Dense(128), ReLU(),
    ]


def _oc_spec_cnn_trunk():
    return [
        Conv2D(16, (3, 5)), ReLU(), MaxPool2D((2, 2)),
        Conv2D(32, (3, 5)), ReLU(), MaxPool2D((2, 2)),
        Sequence(maps=False), LSTM(64),
    ]


def _si_spec_cnn_trunk():
    return [
        Sequence(maps=True),
        ConvLSTM(16, (3, 1), return_sequences=True),
        MaxPool2D((2, 1)),
        ConvLSTM(8, (3, 1)),
        Flatten(),
    ]


def _basic_cnn_trunk():
    return [Conv2D(8, (3, 3)), ReLU(), MaxPool2D((2, 2)), Flatten()]


def _lenet_trunk():
    return [
        Conv2D(6, (5, 5)), ReLU(), MaxPool2D((2, 2)),
        Conv2D(16, (5, 5)), ReLU(), MaxPool2D((2, 2)),
        Flatten(), Dense(120), ReLU(), Dense(84), ReLU(),
    ]


def _mini_deep_trunk():
    # ResNet-style stand-in: strided stem, 6 same-padded conv blocks with an
    # identity skip around every pair, global average pooling
    def block():
        return [Conv2D(16, (3, 3), padding="same"), ReLU()]

    return [
        Conv2D(16, (3, 3), (2, 2)), ReLU(), MaxPool2D((2, 2)),
        Residual(block() + block()),
        Residual(block() + block()),
        Residual(block() + block()),
        GlobalAvgPool(),
    ]


TRUNKS = {
    "spec_cnn": _spec_cnn_trunk,
    "oc_spec_cnn": _oc_spec_cnn_trunk,
    "si_spec_cnn": _si_spec_cnn_trunk,
    "basic_cnn": _basic_cnn_trunk,
    "lenet": _lenet_trunk,
    "mini_deep": _mini_deep_trunk,
}


def build(arch, input_shape=None, head=None, n_classes=8, seed=0, dtype="float64") -> ModelGraph:
    """Untrained ModelGraph for ``arch`` (an :class:`ArchitectureId` or its name)."""
    if isinstance(arch, str):
        arch = ArchitectureId(arch, tuple(input_shape) if input_shape is not None else (64, 63))
    elif input_shape is not None:
        arch = ArchitectureId(arch.name, tuple(input_shape))
    head = head or DEFAULT_HEADS.get(arch.name, "binary")
    if head not in HEADS:
        raise ParameterError(f"unknown head {head!r}; choose from {HEADS}")
    layers = TRUNKS[arch.name]()
    if head == "binary":
        if arch.name == "oc_spec_cnn":
            layers += [Dense(EMBEDDING_DIM), ReLU()]
        layers += [Dense(1), Sigmoid()]
        emb = len(layers) - 2
    elif head == "softmax":
        if n_classes < 2:
            raise ParameterError("softmax head needs n_classes >= 2")
        if arch.name != "lenet":
            layers += [Dense(EMBEDDING_DIM), ReLU()]
        emb = len(layers)
        layers += [Dense(n_classes), Softmax()]
    else:
        layers += [Dense(EMBEDDING_DIM), L2Norm()]
        emb = len(layers)
    meta = {"architecture": arch.name, "head": head, "n_classes": n_classes if head == "softmax" else None}
    try:
        return ModelGraph(layers, (1,) + tuple(arch.input_shape), seed=seed, name=arch.name,
                          embedding_index=emb, meta=meta, dtype=dtype)
    except ShapeError as exc:
        raise ShapeError(f"{arch.name} does not fit input {arch.input_shape}: {exc}") from None


def as_batch(x) -> np.ndarray:
    """Spectrogram(s) -> float array of shape (n, 1, bins, frames)."""
    if isinstance(x, Spectrogram):
        x = x.mag
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None, None]
    if x.ndim == 3:
        return x[:, None]
    if x.ndim == 4:
        return x
    raise ShapeError(f"cannot interpret array of shape {x.shape} as spectrograms")


def set_arrays(data, stft_cfg: StftConfig = StftConfig()):
    """(X, y) arrays for a binary/one-class/multiclass set, or pass arrays through."""
    if isinstance(data, LabeledAudioSet):
        items = data.audio_items()
        return as_batch(spectrogram_stack(items, stft_cfg, data.duration_s, data.fs)), data.labels
    x, y = data
    return as_batch(x), np.asarray(y)


def _check_regime(data, allowed):
    if isinstance(data, LabeledAudioSet) and data.regime not in allowed:
        raise ParameterError(f"expected a {' or '.join(allowed)} set, got regime {data.regime!r}")


def train_binary(arch, data, cfg: TrainConfig = TrainConfig(), stft_cfg=StftConfig(), seed=None):
    """Binary one-vs-all classifier, bce loss."""
    _check_regime(data, ("binary",))
    x, y = set_arrays(data, stft_cfg)
    model = arch if isinstance(arch, ModelGraph) else build(
        arch, x.shape[2:], head="binary", seed=cfg.seed if seed is None else seed)
    return train(model, (x, y.astype(np.float64)), cfg.with_(loss="bce"))


def train_extractor(arch, aux_data, cfg: TrainConfig = TrainConfig(epochs=30, batch_size=30, loss="cce"),
                    stft_cfg=StftConfig(), seed=None):
    """Feature extractor trained on a multi-class auxiliary task (cce loss)."""
    _check_regime(aux_data, ("multiclass",))
    x, y = set_arrays(aux_data, stft_cfg)
    k = int(y.max()) + 1
    model = arch if isinstance(arch, ModelGraph) else build(
        arch, x.shape[2:], head="softmax", n_classes=k, seed=cfg.seed if seed is None else seed)
    return train(model, (x, y.astype(np.int64)), cfg.with_(loss="cce"))


def embed(model: ModelGraph, spec) -> np.ndarray:
    """Embedding vector(s): one row per input spectrogram (a single input gives a 1-D vector)."""
    single = isinstance(spec, Spectrogram) or np.ndim(spec) == 2
    out = model.predict(as_batch(spec), embed=True)
    out = out.reshape(len(out), -1)
    return out[0] if single else out
