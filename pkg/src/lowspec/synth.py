"""Seed-deterministic tone+noise signal generator and dataset assembly.

Every random draw goes through :func:`child_seed`, so an item is a pure
function of ``(dataset seed, index, stream)``. Datasets hold *recipes*
(:class:`AudioItem`), not audio; call :meth:`AudioItem.render` to synthesize.
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ParameterError

DEFAULT_FS = 44100
DEFAULT_DURATION_S = 0.75
DEFAULT_SNR_DB = 3.0
MAX_TONE_HZ = 1000.0
MAX_TONES = 10
# width of one bin of the default 1024-point STFT, used by the negative rejection rule
DEFAULT_BIN_HZ = DEFAULT_FS / 1024


def child_seed(*keys: int) -> int:
    """Derive a 32-bit seed from an arbitrary tuple of non-negative ints."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class ToneSpec:
    frequency_hz: float
    amplitude: float
    onset_s: float
    duration_s: float

    def __post_init__(self):
        if not 0.0 < self.frequency_hz <= MAX_TONE_HZ:
            raise ParameterError(f"frequency_hz must lie in (0, {MAX_TONE_HZ}], got {self.frequency_hz}")
        if not 0.0 < self.amplitude <= 1.0:
            raise ParameterError(f"amplitude must lie in (0, 1], got {self.amplitude}")
        if self.onset_s < 0.0:
            raise ParameterError(f"onset_s must be >= 0, got {self.onset_s}")
        if self.duration_s <= 0.0:
            raise ParameterError(f"duration_s must be > 0, got {self.duration_s}")

    @property
    def offset_s(self) -> float:
        return self.onset_s + self.duration_s


@dataclass(frozen=True)
class SignatureSpec:
    """The fixed tone set that identifies one source."""

    tones: tuple[ToneSpec, ...]
    signature_id: str
    seed: int

    def __post_init__(self):
        if not 1 <= len(self.tones) <= MAX_TONES:
            raise ParameterError(f"a signature needs 1..{MAX_TONES} tones, got {len(self.tones)}")

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([t.frequency_hz for t in self.tones])

    @property
    def span_s(self) -> float:
        return max(t.offset_s for t in self.tones)

    def to_dict(self) -> dict:
        return {
            "signature_id": self.signature_id,
            "seed": self.seed,
            "tones": [
                [t.frequency_hz, t.amplitude, t.onset_s, t.duration_s] for t in self.tones
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SignatureSpec":
        tones = tuple(ToneSpec(*map(float, row)) for row in d["tones"])
        return cls(tones=tones, signature_id=str(d["signature_id"]), seed=int(d["seed"]))


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise at ``snr_db``; ``inf`` disables noise."""

    snr_db: float = DEFAULT_SNR_DB
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ParameterError(f"unsupported noise kind {self.kind!r}")
        if math.isnan(self.snr_db):
            raise ParameterError("snr_db must not be NaN")

    @property
    def enabled(self) -> bool:
        return math.isfinite(self.snr_db)

    def to_dict(self) -> dict:
        return {"snr_db": self.snr_db if self.enabled else "inf", "kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        return cls(snr_db=float(d["snr_db"]), kind=d.get("kind", "gaussian"))


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate_hz: int
    provenance: dict = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def _check_range(name, lo, hi, lower, upper, integer=False):
    if integer and (int(lo) != lo or int(hi) != hi):
        raise ParameterError(f"{name} bounds must be integers, got ({lo}, {hi})")
    if not (lower <= lo <= hi <= upper):
        raise ParameterError(f"{name} range ({lo}, {hi}) must satisfy {lower} <= lo <= hi <= {upper}")


def sample_signature(
    seed: int,
    n_tones: tuple[int, int] = (1, MAX_TONES),
    freq_range: tuple[float, float] = (0.0, MAX_TONE_HZ),
    duration_s: float = DEFAULT_DURATION_S,
    amp_range: tuple[float, float] = (0.5, 1.0),
    min_tone_fraction: float = 0.3,
    signature_id: str | None = None,
) -> SignatureSpec:
    """Draw a random signature; tones are uniform inside the given ranges.

    Each tone lasts between ``min_tone_fraction`` and all of ``duration_s``
    and starts at a uniform onset that keeps it inside the signal.
    """
    _check_range("n_tones", n_tones[0], n_tones[1], 1, MAX_TONES, integer=True)
    _check_range("freq_range", freq_range[0], freq_range[1], 0.0, MAX_TONE_HZ)
    if freq_range[1] <= 0.0:
        raise ParameterError("freq_range upper bound must be > 0")
    _check_range("amp_range", amp_range[0], amp_range[1], 0.0, 1.0)
    if amp_range[1] <= 0.0:
        raise ParameterError("amp_range upper bound must be > 0")
    if duration_s <= 0.0:
        raise ParameterError(f"duration_s must be > 0, got {duration_s}")
    if not 0.0 < min_tone_fraction <= 1.0:
        raise ParameterError("min_tone_fraction must lie in (0, 1]")

    rng = np.random.default_rng(child_seed(seed, 0x5167))
    count = int(rng.integers(n_tones[0], n_tones[1] + 1))
    lo_f, hi_f = freq_range
    lo_a, hi_a = amp_range
    tones = []
    for _ in range(count):
        # drawn downward from the upper bound so the open lower end is excluded
        freq = hi_f - rng.uniform(0.0, hi_f - lo_f) if hi_f > lo_f else hi_f
        amp = hi_a - rng.uniform(0.0, hi_a - lo_a) if hi_a > lo_a else hi_a
        dur = duration_s * rng.uniform(min_tone_fraction, 1.0)
        onset = rng.uniform(0.0, duration_s - dur)
        tones.append(ToneSpec(float(freq), float(amp), float(onset), float(dur)))
    tones.sort(key=lambda t: t.frequency_hz)
    sid = signature_id if signature_id is not None else f"sig-{seed}"
    return SignatureSpec(tones=tuple(tones), signature_id=sid, seed=int(seed))


def tonal_component(sig: SignatureSpec | None, n_samples: int, fs: int) -> np.ndarray:
    """Sum of gated sinusoids, before noise and normalization."""
    out = np.zeros(n_samples)
    if sig is None:
        return out
    t = np.arange(n_samples) / fs
    for tone in sig.tones:
        start = int(round(tone.onset_s * fs))
        stop = min(n_samples, int(round(tone.offset_s * fs)))
        seg = t[start:stop]
        out[start:stop] += tone.amplitude * np.sin(2.0 * np.pi * tone.frequency_hz * seg)
    return out


def noise_component(tonal: np.ndarray, noise: NoiseSpec, seed: int) -> np.ndarray:
    """White noise scaled so mean(tonal**2) / mean(noise**2) equals the SNR.

    The realisation itself is rescaled to the exact target power. With no
    tonal energy the noise keeps unit variance.
    """
    if not noise.enabled:
        return np.zeros_like(tonal)
    rng = np.random.default_rng(child_seed(seed, 0x401))
    raw = rng.standard_normal(len(tonal))
    p_tone = float(np.mean(tonal**2))
    target = p_tone / 10.0 ** (noise.snr_db / 10.0) if p_tone > 0.0 else 1.0
    return raw * math.sqrt(target / float(np.mean(raw**2)))


def synthesize(
    sig: SignatureSpec | None,
    noise: NoiseSpec,
    duration_s: float = DEFAULT_DURATION_S,
    fs: int = DEFAULT_FS,
    seed: int = 0,
) -> AudioSignal:
    """Render tones plus noise; the result is scaled down only if its peak exceeds 1."""
    if duration_s <= 0.0:
        raise ParameterError(f"duration_s must be > 0, got {duration_s}")
    if fs <= 0:
        raise ParameterError(f"fs must be positive, got {fs}")
    if sig is not None:
        fmax = float(sig.frequencies.max())
        if fs <= 2.0 * fmax:
            raise ParameterError(f"fs={fs} Hz is below the Nyquist rate of a {fmax:.1f} Hz tone")
        if sig.span_s > duration_s + 1e-9:
            raise ParameterError(f"signature spans {sig.span_s:.3f} s, longer than duration {duration_s} s")
    n = int(round(duration_s * fs))
    tonal = tonal_component(sig, n, fs)
    x = tonal + noise_component(tonal, noise, seed)
    peak = float(np.max(np.abs(x))) if n else 0.0
    if peak > 1.0:
        x = x / peak
    provenance = {
        "source": sig.signature_id if sig is not None else "noise-only",
        "noise": noise.to_dict(),
        "seed": int(seed),
    }
    return AudioSignal(samples=x, sample_rate_hz=int(fs), provenance=provenance)


def write_wav(path: str | Path, signal: AudioSignal) -> None:
    """16-bit PCM mono WAV."""
    pcm = np.clip(np.round(signal.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(signal.sample_rate_hz)
        fh.writeframes(pcm.tobytes())


def read_wav(path: str | Path) -> AudioSignal:
    with wave.open(str(path), "rb") as fh:
        fs = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32767.0
    return AudioSignal(samples=samples, sample_rate_hz=fs, provenance={"source": str(path)})


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

REGIMES = ("binary", "one_class", "multiclass", "pairs", "triplets")
SPLITS = ("train", "test", "calibration")


@dataclass(frozen=True)
class AudioItem:
    """Recipe for one signal: which signature (if any) and which noise seed."""

    signature: SignatureSpec | None
    noise: NoiseSpec
    seed: int
    kind: str  # "target" | "negative" | "noise-only" | "member"

    def render(self, duration_s: float = DEFAULT_DURATION_S, fs: int = DEFAULT_FS) -> AudioSignal:
        return synthesize(self.signature, self.noise, duration_s, fs, self.seed)

    @property
    def signature_id(self) -> str | None:
        return None if self.signature is None else self.signature.signature_id

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "noise": self.noise.to_dict(),
            "signature": None if self.signature is None else self.signature.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AudioItem":
        sig = None if d["signature"] is None else SignatureSpec.from_dict(d["signature"])
        return cls(sig, NoiseSpec.from_dict(d["noise"]), int(d["seed"]), d["kind"])


@dataclass(frozen=True)
class Example:
    item: AudioItem
    label: int


@dataclass(frozen=True)
class Pair:
    first: AudioItem
    second: AudioItem
    same: int


@dataclass(frozen=True)
class Triplet:
    anchor: AudioItem
    positive: AudioItem
    negative: AudioItem


@dataclass(frozen=True)
class LabeledAudioSet:
    items: tuple
    regime: str
    split: str
    duration_s: float = DEFAULT_DURATION_S
    fs: int = DEFAULT_FS

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ParameterError(f"unknown regime {self.regime!r}")
        if self.split not in SPLITS:
            raise ParameterError(f"unknown split {self.split!r}")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self) -> Iterator:
        return iter(self.items)

    @property
    def labels(self) -> np.ndarray:
        if self.regime == "pairs":
            return np.array([p.same for p in self.items], dtype=np.int64)
        if self.regime == "triplets":
            raise ParameterError("triplet sets carry no labels")
        return np.array([e.label for e in self.items], dtype=np.int64)

    def audio_items(self) -> list[AudioItem]:
        """Every AudioItem in item order (pairs and triplets flattened)."""
        out = []
        for rec in self.items:
            if isinstance(rec, Example):
                out.append(rec.item)
            elif isinstance(rec, Pair):
                out.extend((rec.first, rec.second))
            else:
                out.extend((rec.anchor, rec.positive, rec.negative))
        return out

    def subset(self, start: int, stop: int | None = None, split: str | None = None) -> "LabeledAudioSet":
        return LabeledAudioSet(
            self.items[start:stop], self.regime, split or self.split, self.duration_s, self.fs
        )

    def to_manifest(self) -> dict:
        rows = []
        for i, rec in enumerate(self.items):
            if isinstance(rec, Example):
                rows.append({"index": i, "label": rec.label, "item": rec.item.to_dict()})
            elif isinstance(rec, Pair):
                rows.append({"index": i, "label": rec.same,
                             "items": [rec.first.to_dict(), rec.second.to_dict()]})
            else:
                rows.append({"index": i, "label": None,
                             "items": [rec.anchor.to_dict(), rec.positive.to_dict(),
                                       rec.negative.to_dict()]})
        return {
            "regime": self.regime,
            "split": self.split,
            "duration_s": self.duration_s,
            "fs": self.fs,
            "items": rows,
        }

    @classmethod
    def from_manifest(cls, d: dict) -> "LabeledAudioSet":
        regime = d["regime"]
        items = []
        for row in d["items"]:
            if regime == "pairs":
                a, b = (AudioItem.from_dict(x) for x in row["items"])
                items.append(Pair(a, b, int(row["label"])))
            elif regime == "triplets":
                items.append(Triplet(*(AudioItem.from_dict(x) for x in row["items"])))
            else:
                items.append(Example(AudioItem.from_dict(row["item"]), int(row["label"])))
        return cls(tuple(items), regime, d["split"], float(d["duration_s"]), int(d["fs"]))


def write_manifest(path: str | Path, sets: Sequence[LabeledAudioSet], extra: dict | None = None) -> None:
    doc = {"sets": [s.to_manifest() for s in sets]}
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def read_manifest(path: str | Path) -> tuple[list[LabeledAudioSet], dict]:
    doc = json.loads(Path(path).read_text())
    sets = [LabeledAudioSet.from_manifest(s) for s in doc.pop("sets")]
    return sets, doc


def matches_target(candidate: SignatureSpec, target: SignatureSpec, bin_hz: float = DEFAULT_BIN_HZ) -> bool:
    """Rejection predicate for negatives: same tone count and every tone within one bin of a target tone."""
    if len(candidate.tones) != len(target.tones):
        return False
    tf = target.frequencies
    return all(np.min(np.abs(tf - f)) <= bin_hz for f in candidate.frequencies)


def _random_negative(target, seed, duration_s, bin_hz, sig_params, max_tries=1000):
    for attempt in range(max_tries):
        s = child_seed(seed, attempt)
        cand = sample_signature(s, duration_s=duration_s, signature_id=f"neg-{s}", **sig_params)
        if target is None or not matches_target(cand, target, bin_hz):
            return cand
    raise ParameterError("could not draw a negative distinct from the target")  # pragma: no cover


def _negative_items(target, n, noise, seed, duration_s, bin_hz, noise_only_fraction, sig_params):
    n_noise = int(round(n * noise_only_fraction))
    items = []
    for i in range(n):
        item_seed = child_seed(seed, 2, i)
        if i < n_noise:
            items.append(AudioItem(None, noise, item_seed, "noise-only"))
        else:
            sig = _random_negative(target, child_seed(seed, 3, i), duration_s, bin_hz, sig_params)
            items.append(AudioItem(sig, noise, item_seed, "negative"))
    return items


def _shuffled(records, seed):
    order = np.random.default_rng(child_seed(seed, 0x5F)).permutation(len(records))
    return tuple(records[i] for i in order)


def make_binary_dataset(
    target: SignatureSpec,
    n_pos: int,
    n_neg: int,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    split: str = "train",
    duration_s: float = DEFAULT_DURATION_S,
    fs: int = DEFAULT_FS,
    bin_hz: float = DEFAULT_BIN_HZ,
    noise_only_fraction: float = 0.2,
    signature_params: dict | None = None,
) -> LabeledAudioSet:
    """One-vs-all set: target under fresh noise (label 1) against random signatures and pure noise (label 0)."""
    if n_pos <= 0 or n_neg <= 0:
        raise ParameterError("n_pos and n_neg must be positive")
    if not 0.0 <= noise_only_fraction <= 1.0:
        raise ParameterError("noise_only_fraction must lie in [0, 1]")
    sp = signature_params or {}
    pos = [Example(AudioItem(target, noise, child_seed(seed, 1, i), "target"), 1) for i in range(n_pos)]
    neg = [
        Example(it, 0)
        for it in _negative_items(target, n_neg, noise, seed, duration_s, bin_hz, noise_only_fraction, sp)
    ]
    return LabeledAudioSet(_shuffled(pos + neg, seed), "binary", split, duration_s, fs)


def make_one_class_dataset(
    target: SignatureSpec,
    n_pos: int,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    train_fraction: float = 2.0 / 3.0,
    n_neg_test: int | None = None,
    duration_s: float = DEFAULT_DURATION_S,
    fs: int = DEFAULT_FS,
    bin_hz: float = DEFAULT_BIN_HZ,
    noise_only_fraction: float = 0.2,
    signature_params: dict | None = None,
) -> tuple[LabeledAudioSet, LabeledAudioSet]:
    """Positive-only train split and a mixed test split.

    ``n_pos`` positives are split ``train_fraction`` / rest; the test split
    adds ``n_neg_test`` negatives (default: as many as test positives).
    """
    if n_pos < 2:
        raise ParameterError("n_pos must be >= 2 to form train and test splits")
    n_train = min(n_pos - 1, max(1, int(round(n_pos * train_fraction))))
    n_test_pos = n_pos - n_train
    n_neg = n_test_pos if n_neg_test is None else n_neg_test
    if n_neg <= 0:
        raise ParameterError("n_neg_test must be positive")
    pos = [AudioItem(target, noise, child_seed(seed, 1, i), "target") for i in range(n_pos)]
    train = LabeledAudioSet(
        tuple(Example(it, 1) for it in pos[:n_train]), "one_class", "train", duration_s, fs
    )
    sp = signature_params or {}
    neg = _negative_items(target, n_neg, noise, seed, duration_s, bin_hz, noise_only_fraction, sp)
    test_recs = [Example(it, 1) for it in pos[n_train:]] + [Example(it, 0) for it in neg]
    test = LabeledAudioSet(_shuffled(test_recs, seed), "one_class", "test", duration_s, fs)
    return train, test


def sample_signature_bank(
    k: int,
    seed: int,
    exclude: SignatureSpec | None = None,
    duration_s: float = DEFAULT_DURATION_S,
    bin_hz: float = DEFAULT_BIN_HZ,
    signature_params: dict | None = None,
) -> list[SignatureSpec]:
    """``k`` random signatures, none matching ``exclude`` or each other."""
    if k < 1:
        raise ParameterError("k must be >= 1")
    sp = signature_params or {}
    bank: list[SignatureSpec] = []
    attempt = 0
    while len(bank) < k:
        s = child_seed(seed, 7, attempt)
        attempt += 1
        cand = sample_signature(s, duration_s=duration_s, signature_id=f"bank-{s}", **sp)
        if exclude is not None and matches_target(cand, exclude, bin_hz):
            continue
        if any(matches_target(cand, b, bin_hz) for b in bank):
            continue
        bank.append(cand)
    return bank


def make_multiclass_dataset(
    signatures: Sequence[SignatureSpec],
    n_per_class: int,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    split: str = "train",
    duration_s: float = DEFAULT_DURATION_S,
    fs: int = DEFAULT_FS,
) -> LabeledAudioSet:
    """Noise realisations of each signature, labelled by signature index."""
    if len(signatures) < 2:
        raise ParameterError("need at least 2 signatures")
    if n_per_class < 1:
        raise ParameterError("n_per_class must be >= 1")
    recs = [
        Example(AudioItem(sig, noise, child_seed(seed, 4, c, i), "member"), c)
        for c, sig in enumerate(signatures)
        for i in range(n_per_class)
    ]
    return LabeledAudioSet(_shuffled(recs, seed), "multiclass", split, duration_s, fs)


def make_pair_dataset(
    signatures: Sequence[SignatureSpec],
    n_pairs: int,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    split: str = "train",
    duration_s: float = DEFAULT_DURATION_S,
    fs: int = DEFAULT_FS,
) -> LabeledAudioSet:
    """Balanced same/different pairs; a same pair is two noise realisations of one signature."""
    if len(signatures) < 2:
        raise ParameterError("pairs need at least 2 signatures")
    if n_pairs < 1:
        raise ParameterError("n_pairs must be >= 1")
    rng = np.random.default_rng(child_seed(seed, 5))
    k = len(signatures)
    recs = []
    for i in range(n_pairs):
        a_seed, b_seed = child_seed(seed, 6, i, 0), child_seed(seed, 6, i, 1)
        if i % 2 == 0:
            s = int(rng.integers(k))
            recs.append(Pair(AudioItem(signatures[s], noise, a_seed, "member"),
                             AudioItem(signatures[s], noise, b_seed, "member"), 1))
        else:
            s, t = rng.choice(k, size=2, replace=False)
            recs.append(Pair(AudioItem(signatures[int(s)], noise, a_seed, "member"),
                             AudioItem(signatures[int(t)], noise, b_seed, "member"), 0))
    return LabeledAudioSet(_shuffled(recs, seed), "pairs", split, duration_s, fs)


def make_triplet_dataset(
    signatures: Sequence[SignatureSpec],
    n_triplets: int,
    noise: NoiseSpec = NoiseSpec(),
    seed: int = 0,
    split: str = "train",
    duration_s: float = DEFAULT_DURATION_S,
    fs: int = DEFAULT_FS,
) -> LabeledAudioSet:
    """(anchor, positive, negative) with anchor/positive sharing a signature; uniform sampling."""
    if len(signatures) < 2:
        raise ParameterError("triplets need at least 2 signatures")
    if n_triplets < 1:
        raise ParameterError("n_triplets must be >= 1")
    rng = np.random.default_rng(child_seed(seed, 8))
    k = len(signatures)
    recs = []
    for i in range(n_triplets):
        s, t = rng.choice(k, size=2, replace=False)
        a, p, n = (child_seed(seed, 9, i, j) for j in range(3))
        recs.append(Triplet(AudioItem(signatures[int(s)], noise, a, "member"),
                            AudioItem(signatures[int(s)], noise, p, "member"),
                            AudioItem(signatures[int(t)], noise, n, "member")))
    return LabeledAudioSet(tuple(recs), "triplets", split, duration_s, fs)
