"""Weight container: ``manifest.json`` (layer specs, shapes, seed) + ``weights.bin``.

``weights.bin`` is every parameter array as little-endian float32, concatenated
in manifest order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ArtifactError, ShapeError
from .model import ModelGraph

FORMAT_VERSION = 1


def save_model(model: ModelGraph, directory: str | Path, extra: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    params = model.parameters()
    manifest = {
        "format_version": FORMAT_VERSION,
        "model": model.config(),
        "arrays": [{"key": k, "shape": list(v.shape)} for k, v, _ in params],
    }
    if extra:
        manifest["extra"] = extra
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    with open(d / "weights.bin", "wb") as fh:
        for _, v, _ in params:
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())
    return d


def load_model(directory: str | Path) -> ModelGraph:
    d = Path(directory)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
        raw = (d / "weights.bin").read_bytes()
    except FileNotFoundError as exc:
        raise ArtifactError(f"missing model file: {exc.filename}") from None
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactError(
            f"model format version {version} != supported {FORMAT_VERSION}; re-save the model "
            "with a matching lowspec release or migrate the manifest"
        )
    try:
        model = ModelGraph.from_config(manifest["model"])
    except (ShapeError, KeyError, TypeError) as exc:
        raise ArtifactError(f"manifest does not describe a valid model: {exc}") from None
    params = model.parameters()
    arrays = manifest["arrays"]
    if len(arrays) != len(params):
        raise ArtifactError(f"manifest lists {len(arrays)} arrays, model has {len(params)}")
    offset = 0
    for entry, (key, value, _) in zip(arrays, params):
        if entry["key"] != key or tuple(entry["shape"]) != value.shape:
            raise ArtifactError(
                f"array {entry['key']} {tuple(entry['shape'])} does not match model {key} {value.shape}"
            )
        nbytes = value.size * 4
        chunk = raw[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise ArtifactError("weights.bin is shorter than the manifest requires")
        value[...] = np.frombuffer(chunk, dtype="<f4").reshape(value.shape)
        offset += nbytes
    if offset != len(raw):
        raise ArtifactError(f"weights.bin has {len(raw) - offset} trailing bytes")
    return model
