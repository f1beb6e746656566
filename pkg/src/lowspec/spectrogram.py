"""Windowed DFT spectrograms, min-max normalised to [0, 1].

Convention: ``A_k = sum_n a_n exp(-2j*pi*k*n/N)`` (forward sign), frames are
not centred and a trailing partial window is dropped.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, ShapeError
from .synth import AudioSignal, DEFAULT_DURATION_S, DEFAULT_FS

WINDOWS = ("rect", "hann")
SCALINGS = ("linear", "log")


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 1024
    hop: int = 512
    window_fn: str = "hann"
    keep_bins: int = 64
    scaling: str = "log"

    def __post_init__(self):
        if self.window_len < 1:
            raise ParameterError(f"window_len must be >= 1, got {self.window_len}")
        if not 0 < self.hop <= self.window_len:
            raise ParameterError(f"hop must satisfy 0 < hop <= window_len, got {self.hop}")
        if not 1 <= self.keep_bins <= self.window_len // 2 + 1:
            raise ParameterError(
                f"keep_bins must lie in [1, {self.window_len // 2 + 1}], got {self.keep_bins}"
            )
        if self.window_fn not in WINDOWS:
            raise ParameterError(f"window_fn must be one of {WINDOWS}, got {self.window_fn!r}")
        if self.scaling not in SCALINGS:
            raise ParameterError(f"scaling must be one of {SCALINGS}, got {self.scaling!r}")

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window_len:
            raise ParameterError(
                f"signal of {n_samples} samples is shorter than one window ({self.window_len})"
            )
        return (n_samples - self.window_len) // self.hop + 1

    def shape_for(self, duration_s: float = DEFAULT_DURATION_S, fs: int = DEFAULT_FS) -> tuple[int, int]:
        return self.keep_bins, self.n_frames(int(round(duration_s * fs)))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Spectrogram:
    mag: np.ndarray  # [keep_bins, n_frames]
    config: StftConfig
    bin_hz: float
    frame_s: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.mag.shape


def dft(frame) -> np.ndarray:
    """Complex spectrum of a real (or complex) frame via the FFT."""
    a = np.asarray(frame)
    if a.ndim != 1 or a.size == 0:
        raise ParameterError("dft needs a non-empty 1-D frame")
    return np.fft.fft(a)


def window(cfg: StftConfig) -> np.ndarray:
    n = cfg.window_len
    if cfg.window_fn == "rect":
        return np.ones(n)
    # periodic Hann
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def minmax(mag: np.ndarray) -> np.ndarray:
    """Scale to [0, 1]; a constant matrix maps to all zeros."""
    lo, hi = float(mag.min()), float(mag.max())
    if hi <= lo:
        return np.zeros_like(mag)
    return (mag - lo) / (hi - lo)


def stft_magnitude(samples: np.ndarray, cfg: StftConfig) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    n_frames = cfg.n_frames(len(x))
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_len)[:: cfg.hop][:n_frames]
    spec = np.fft.rfft(frames * window(cfg), axis=1)[:, : cfg.keep_bins]
    mag = np.abs(spec).T
    if cfg.scaling == "log":
        mag = np.log1p(mag)
    return minmax(mag)


def stft(signal: AudioSignal, cfg: StftConfig = StftConfig()) -> Spectrogram:
    mag = stft_magnitude(signal.samples, cfg)
    fs = signal.sample_rate_hz
    return Spectrogram(mag=mag, config=cfg, bin_hz=fs / cfg.window_len, frame_s=cfg.hop / fs)


def spectrogram_stack(items, cfg: StftConfig, duration_s: float, fs: int) -> np.ndarray:
    """Render each AudioItem and stack its spectrogram: (n, bins, frames)."""
    rows, cols = cfg.shape_for(duration_s, fs)
    out = np.empty((len(items), rows, cols))
    for i, item in enumerate(items):
        out[i] = stft_magnitude(item.render(duration_s, fs).samples, cfg)
    return out


# ---------------------------------------------------------------------------
# cache files: b"LSPC" | u32 header length | JSON header | little-endian f32 data
# ---------------------------------------------------------------------------

_MAGIC = b"LSPC"


def write_cache(path: str | Path, array: np.ndarray, header: dict | None = None) -> None:
    data = np.ascontiguousarray(array, dtype="<f4")
    head = dict(header or {})
    head["shape"] = list(data.shape)
    head["dtype"] = "<f4"
    blob = json.dumps(head, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(data.tobytes())


def read_cache(path: str | Path) -> tuple[np.ndarray, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ShapeError(f"{path}: not a spectrogram cache file")
    (hlen,) = struct.unpack("<I", raw[4:8])
    head = json.loads(raw[8 : 8 + hlen])
    shape = tuple(head["shape"])
    body = raw[8 + hlen :]
    expected = int(np.prod(shape)) * 4
    if len(body) != expected:
        raise ShapeError(f"{path}: header shape {shape} needs {expected} bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f4").reshape(shape).astype(np.float64), head


def export_png(spec: Spectrogram | np.ndarray, path: str | Path) -> None:
    """Grayscale image, dark = high magnitude, low frequencies at the bottom."""
    from PIL import Image

    mag = spec.mag if isinstance(spec, Spectrogram) else np.asarray(spec)
    if mag.ndim != 2:
        raise ShapeError("export_png expects a 2-D matrix")
    pixels = np.round(255.0 * (1.0 - np.clip(mag, 0.0, 1.0))).astype(np.uint8)
    Image.fromarray(pixels[::-1], mode="L").save(path)


def load_png(path: str | Path) -> np.ndarray:
    """Inverse of :func:`export_png`, quantised to 1/255."""
    from PIL import Image

    pixels = np.asarray(Image.open(path).convert("L"), dtype=np.float64)
    return 1.0 - pixels[::-1] / 255.0
