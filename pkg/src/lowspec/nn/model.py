from __future__ import annotations

import hashlib

import numpy as np

from ..errors import ShapeError
from ..synth import child_seed
from .layers import Layer, layer_from_config


class ModelGraph:
    """An ordered layer stack with its weights.

    Layer ``i`` is initialised from ``child_seed(seed, i)``, so the seed alone
    fixes the initial weights. ``embedding_index`` marks how many layers make up
    the feature extractor used by :meth:`embed`.
    """

    def __init__(self, layers, input_shape, seed=0, name="model", embedding_index=None, meta=None,
                 dtype="float64"):
        self.layers: list[Layer] = list(layers)
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.float32, np.float64):
            raise ShapeError(f"dtype must be float32 or float64, got {dtype}")
        self.input_shape = tuple(int(s) for s in input_shape)
        self.seed = int(seed)
        self.name = name
        self.meta = dict(meta or {})
        self.history: list[dict] = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer.build(shape, np.random.default_rng(child_seed(self.seed, i)), self.dtype)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
        self.output_shape = shape
        n = len(self.layers)
        self.embedding_index = n if embedding_index is None else int(embedding_index)
        if not 1 <= self.embedding_index <= n:
            raise ShapeError(f"embedding_index {self.embedding_index} outside 1..{n}")

    @classmethod
    def from_config(cls, cfg: dict) -> "ModelGraph":
        layers = [layer_from_config(c) for c in cfg["layers"]]
        return cls(layers, cfg["input_shape"], cfg["seed"], cfg.get("name", "model"),
                   cfg.get("embedding_index"), cfg.get("meta"), cfg.get("dtype", "float64"))

    def config(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "seed": self.seed,
            "embedding_index": self.embedding_index,
            "meta": self.meta,
            "dtype": self.dtype.name,
            "layers": [layer.config() for layer in self.layers],
        }

    @property
    def embedding_shape(self) -> tuple[int, ...]:
        return self.layers[self.embedding_index - 1].out_shape

    def _check_input(self, x):
        if x.ndim != len(self.input_shape) + 1 or x.shape[1:] != self.input_shape:
            raise ShapeError(f"batch shape {x.shape[1:]} does not match model input {self.input_shape}")

    def forward(self, x, stop: int | None = None):
        x = np.asarray(x, dtype=self.dtype)
        self._check_input(x)
        for layer in self.layers[: len(self.layers) if stop is None else stop]:
            x = layer.forward(x)
        return x

    def backward(self, dy, stop: int | None = None):
        """Backprop from the output of layer ``stop - 1`` (default: last layer)."""
        d = np.asarray(dy, dtype=self.dtype)
        for layer in reversed(self.layers[: len(self.layers) if stop is None else stop]):
            d = layer.backward(d)
        return d

    def __call__(self, x):
        return self.forward(x)

    def embed(self, x):
        return self.forward(x, stop=self.embedding_index)

    def predict(self, x, batch_size: int = 64, embed: bool = False):
        """Batched forward pass for inference."""
        x = np.asarray(x, dtype=self.dtype)
        stop = self.embedding_index if embed else None
        outs = [self.forward(x[i : i + batch_size], stop=stop) for i in range(0, len(x), batch_size)]
        return np.concatenate(outs, axis=0)

    def parameters(self):
        """(key, value, grad) for every trainable array, in a fixed order."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, value, grad in layer.param_items():
                out.append((f"{i}.{name}", value, grad))
        return out

    @property
    def n_params(self) -> int:
        return sum(v.size for _, v, _ in self.parameters())

    def get_weights(self) -> list[np.ndarray]:
        return [v.copy() for _, v, _ in self.parameters()]

    def set_weights(self, weights) -> None:
        params = self.parameters()
        if len(weights) != len(params):
            raise ShapeError(f"expected {len(params)} arrays, got {len(weights)}")
        for (key, v, _), w in zip(params, weights):
            if v.shape != np.shape(w):
                raise ShapeError(f"{key}: shape {np.shape(w)} does not match {v.shape}")
            v[...] = w

    def round_to_float32(self) -> None:
        """Snap weights onto float32 values so a saved model reloads bit-identically."""
        for _, v, _ in self.parameters():
            v[...] = v.astype(np.float32)

    def weights_digest(self) -> str:
        h = hashlib.sha256()
        for _, v, _ in self.parameters():
            h.update(np.ascontiguousarray(v).tobytes())
        return h.hexdigest()

    def summary(self) -> str:
        rows = [f"{self.name}: input {self.input_shape}"]
        for i, layer in enumerate(self.layers):
            n = sum(v.size for _, v, _ in layer.param_items())
            mark = "  <- embedding" if i + 1 == self.embedding_index and i + 1 < len(self.layers) else ""
            rows.append(f"  {i:2d} {layer!r:50s} -> {layer.out_shape}  params={n}{mark}")
        rows.append(f"  total params: {self.n_params}")
        return "\n".join(rows)
