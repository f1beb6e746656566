"""Configuration-driven experiment runs: datasets, training, evaluation, artifacts, tables."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .architectures import ARCHITECTURES, as_batch, build
from .errors import ArtifactError, ConfigError, ParameterError
from .evaluation import EvalReport, append_ledger, fingerprint, make_report
from .nn import ModelGraph, TrainConfig, load_model, save_model, train
from .one_class import HEAD_KINDS, OneClassHead, fit_head, load_head, save_head, with_calibration
from .one_class.gmm import GmmConfig
from .one_class.iforest import IsoForestConfig
from .one_class.ocsvm import OcSvmConfig
from .siamese import SiameseModel, fewshot_accuracy, load_siamese, save_siamese, train_siamese
from .spectrogram import StftConfig, read_cache, spectrogram_stack, write_cache
from .synth import (
    LabeledAudioSet,
    NoiseSpec,
    child_seed,
    make_binary_dataset,
    make_multiclass_dataset,
    make_one_class_dataset,
    make_pair_dataset,
    make_triplet_dataset,
    read_manifest,
    sample_signature,
    sample_signature_bank,
    write_manifest,
)

log = logging.getLogger(__name__)

EXPERIMENT_REGIMES = ("binary", "one_class", "siamese")
SIAMESE_LOSSES = ("contrastive", "triplet")
FEATURES = ("embedding", "raw")
ARTIFACT_VERSION = 1
CACHE_ENV = "LOWSPEC_CACHE_DIR"

DEFAULT_ARCH = {"binary": "spec_cnn", "one_class": "oc_spec_cnn", "siamese": "si_spec_cnn"}
TRAIN_DEFAULTS = {
    "binary": {"epochs": 20, "batch_size": 20},
    "one_class": {"epochs": 30, "batch_size": 30},
    "siamese": {"epochs": 30, "batch_size": 10},
}
TRAIN_KEYS = ("epochs", "batch_size", "learning_rate", "optimizer", "margin", "early_stopping",
              "patience", "val_fraction")
HEAD_CONFIGS = {"ocsvm": OcSvmConfig, "ocrf": IsoForestConfig, "gmm": GmmConfig}


@dataclass(frozen=True)
class DatasetConfig:
    """Counts and signal settings. Which counts apply depends on the regime:

    binary: n_pos/n_neg (train), n_test_pos/n_test_neg (test);
    one_class: n_pos positives split 2/3 train, 1/3 test, n_test_neg test
    negatives, an auxiliary set of n_aux_classes x n_aux_per_class, and a
    calibration set of n_cal_pos + n_cal_neg;
    siamese: n_signatures, n_train_pairs or n_train_triplets, n_test_pairs.
    """

    snr_db: float = 3.0
    duration_s: float = 0.75
    fs: int = 44100
    target_seed: int | None = None
    test_seed: int | None = None
    n_pos: int = 100
    n_neg: int = 100
    n_test_pos: int = 50
    n_test_neg: int = 50
    n_aux_classes: int = 8
    n_aux_per_class: int = 30
    n_cal_pos: int = 30
    n_cal_neg: int = 30
    n_signatures: int = 10
    n_train_pairs: int = 400
    n_test_pairs: int = 200
    n_train_triplets: int = 200

    def __post_init__(self):
        for f in fields(self):
            if f.name.startswith("n_") and getattr(self, f.name) < 1:
                raise ParameterError(f"{f.name} must be >= 1")
        if self.duration_s <= 0 or self.fs <= 0:
            raise ParameterError("duration_s and fs must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str
    architecture: str = ""
    seed: int = 0
    loss: str = ""
    heads: tuple = HEAD_KINDS
    features: str = "embedding"
    dtype: str = "float32"
    dataset: DatasetConfig = DatasetConfig()
    train: dict = field(default_factory=dict)
    stft: StftConfig = StftConfig()
    head_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.regime not in EXPERIMENT_REGIMES:
            raise ConfigError(f"regime: must be one of {EXPERIMENT_REGIMES}, got {self.regime!r}")
        if not self.architecture:
            object.__setattr__(self, "architecture", DEFAULT_ARCH[self.regime])
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture: must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.regime == "siamese":
            if not self.loss:
                object.__setattr__(self, "loss", "contrastive")
            if self.loss not in SIAMESE_LOSSES:
                raise ConfigError(f"loss: siamese runs need one of {SIAMESE_LOSSES}, got {self.loss!r}")
        elif self.loss:
            raise ConfigError(f"loss: only siamese runs take a loss; {self.regime} uses a fixed one")
        object.__setattr__(self, "heads", tuple(self.heads))
        bad = [h for h in self.heads if h not in HEAD_KINDS]
        if bad or not self.heads:
            raise ConfigError(f"heads: must be a non-empty subset of {HEAD_KINDS}, got {list(self.heads)}")
        if self.features not in FEATURES:
            raise ConfigError(f"features: must be one of {FEATURES}, got {self.features!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype: must be float32 or float64, got {self.dtype!r}")
        for k in self.train:
            if k not in TRAIN_KEYS:
                raise ConfigError(f"train.{k}: unknown key (allowed: {', '.join(TRAIN_KEYS)})")
        for kind, params in self.head_params.items():
            if kind not in HEAD_KINDS:
                raise ConfigError(f"head_params.{kind}: unknown head kind")
            names = {f.name for f in fields(HEAD_CONFIGS[kind])}
            for k in params:
                if k not in names:
                    raise ConfigError(f"head_params.{kind}.{k}: unknown key")
        try:
            self.train_config()
            for kind in self.heads:
                self.head_config(kind)
        except ParameterError as exc:
            raise ConfigError(f"train/head_params: {exc}") from None

    def train_config(self) -> TrainConfig:
        loss = {"binary": "bce", "one_class": "cce"}.get(self.regime, self.loss)
        kw = {**TRAIN_DEFAULTS[self.regime], **self.train}
        return TrainConfig(loss=loss, seed=self.seed, **kw)

    def head_config(self, kind):
        params = dict(self.head_params.get(kind, {}))
        if kind in ("ocrf", "gmm"):
            params.setdefault("seed", self.seed)
        return HEAD_CONFIGS[kind](**params)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


# ---------------------------------------------------------------------------
# config (de)serialisation with strict key and type checks
# ---------------------------------------------------------------------------

_OPTIONAL_INT = {"target_seed", "test_seed"}


def _check_value(path, value, default, optional=False):
    if value is None and optional:
        return
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{path}: expected {type(default).__name__}, got {value!r}")


def _section(cls, d, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name: f for f in fields(cls)}
    for k, v in d.items():
        if k not in known:
            raise ConfigError(f"{path}.{k}: unknown key")
        if k in _OPTIONAL_INT:
            _check_value(f"{path}.{k}", v, 0, optional=True)
        else:
            _check_value(f"{path}.{k}", v, known[k].default)
    try:
        return cls(**d)
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    for k in d:
        if k not in known:
            raise ConfigError(f"{k}: unknown key")
    if "regime" not in d:
        raise ConfigError("regime: required key is missing")
    kw = dict(d)
    for k, default in (("seed", 0), ("architecture", ""), ("loss", ""), ("features", ""), ("dtype", ""),
                       ("regime", "")):
        if k in kw:
            _check_value(k, kw[k], default)
    if "dataset" in kw:
        kw["dataset"] = _section(DatasetConfig, kw["dataset"], "dataset")
    if "stft" in kw:
        kw["stft"] = _section(StftConfig, kw["stft"], "stft")
    if "heads" in kw and not isinstance(kw["heads"], (list, tuple)):
        raise ConfigError("heads: expected a list")
    for k in ("train", "head_params"):
        if k in kw and not isinstance(kw[k], dict):
            raise ConfigError(f"{k}: expected an object")
    train_kw = kw.get("train", {})
    tdefaults = {f.name: f.default for f in fields(TrainConfig)}
    for k, v in train_kw.items():
        if k in tdefaults and k != "margin":
            _check_value(f"train.{k}", v, tdefaults[k])
        elif k == "margin":
            _check_value("train.margin", v, 0.0, optional=True)
    return ExperimentConfig(**kw)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "regime": cfg.regime,
        "architecture": cfg.architecture,
        "seed": cfg.seed,
        "loss": cfg.loss,
        "heads": list(cfg.heads),
        "features": cfg.features,
        "dtype": cfg.dtype,
        "dataset": asdict(cfg.dataset),
        "train": dict(cfg.train),
        "stft": asdict(cfg.stft),
        "head_params": {k: dict(v) for k, v in cfg.head_params.items()},
    }


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=1, sort_keys=True) + "\n")


def default_config(regime: str, **overrides) -> ExperimentConfig:
    if regime == "one_class":
        overrides.setdefault("dataset", DatasetConfig(n_pos=180, n_test_neg=60))
    return ExperimentConfig(regime=regime, **overrides)


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def target_signature(cfg: ExperimentConfig):
    ds = cfg.dataset
    seed = ds.target_seed if ds.target_seed is not None else child_seed(cfg.seed, 100)
    return sample_signature(seed, duration_s=ds.duration_s, signature_id="target")


def signature_bank(cfg: ExperimentConfig):
    return sample_signature_bank(cfg.dataset.n_signatures, child_seed(cfg.seed, 11),
                                 duration_s=cfg.dataset.duration_s)


def build_datasets(cfg: ExperimentConfig) -> dict[str, LabeledAudioSet]:
    """Every split the regime needs, keyed by name."""
    ds, seed = cfg.dataset, cfg.seed
    noise = NoiseSpec(ds.snr_db)
    common = {"duration_s": ds.duration_s, "fs": ds.fs}
    if cfg.regime == "binary":
        target = target_signature(cfg)
        test_seed = ds.test_seed if ds.test_seed is not None else child_seed(seed, 2)
        return {
            "train": make_binary_dataset(target, ds.n_pos, ds.n_neg, noise, child_seed(seed, 1), "train",
                                         **common),
            "test": make_binary_dataset(target, ds.n_test_pos, ds.n_test_neg, noise, test_seed, "test",
                                        **common),
        }
    if cfg.regime == "one_class":
        target = target_signature(cfg)
        train_set, test_set = make_one_class_dataset(target, ds.n_pos, noise, child_seed(seed, 3),
                                                     n_neg_test=ds.n_test_neg, **common)
        if ds.test_seed is not None:
            test_set = make_one_class_dataset(target, ds.n_pos, noise, ds.test_seed,
                                              n_neg_test=ds.n_test_neg, **common)[1]
        bank = sample_signature_bank(ds.n_aux_classes, child_seed(seed, 4), exclude=target,
                                     duration_s=ds.duration_s)
        aux = make_multiclass_dataset(bank, ds.n_aux_per_class, noise, child_seed(seed, 5), **common)
        cal = make_binary_dataset(target, ds.n_cal_pos, ds.n_cal_neg, noise, child_seed(seed, 6), **common)
        cal = LabeledAudioSet(cal.items, "one_class", "calibration", ds.duration_s, ds.fs)
        return {"train": train_set, "test": test_set, "aux": aux, "calibration": cal}
    sigs = signature_bank(cfg)
    test_seed = ds.test_seed if ds.test_seed is not None else child_seed(seed, 13)
    if cfg.loss == "contrastive":
        train_set = make_pair_dataset(sigs, ds.n_train_pairs, noise, child_seed(seed, 12), **common)
    else:
        train_set = make_triplet_dataset(sigs, ds.n_train_triplets, noise, child_seed(seed, 12), **common)
    return {"train": train_set,
            "test": make_pair_dataset(sigs, ds.n_test_pairs, noise, test_seed, "test", **common)}


def render_stack(data: LabeledAudioSet, stft_cfg: StftConfig) -> np.ndarray:
    """Spectrograms of every audio item, rounded to float32 (the cache precision)."""
    return spectrogram_stack(data.audio_items(), stft_cfg, data.duration_s, data.fs).astype(np.float32)


@dataclass
class DataBundle:
    sets: dict
    stacks: dict

    def arrays(self, name):
        data, x = self.sets[name], as_batch(self.stacks[name])
        if data.regime == "pairs":
            x = x.reshape((len(data), 2) + x.shape[1:])
            return x[:, 0], x[:, 1], data.labels
        if data.regime == "triplets":
            x = x.reshape((len(data), 3) + x.shape[1:])
            return x[:, 0], x[:, 1], x[:, 2]
        return x, data.labels


def data_fingerprint(cfg: ExperimentConfig) -> str:
    return fingerprint({"regime": cfg.regime, "seed": cfg.seed, "loss": cfg.loss,
                        "dataset": asdict(cfg.dataset), "stft": asdict(cfg.stft)})


def cache_root() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "lowspec"


def default_data_dir(cfg: ExperimentConfig) -> Path:
    return cache_root() / f"{cfg.regime}-{data_fingerprint(cfg)}"


def prepare_data(cfg: ExperimentConfig) -> DataBundle:
    sets = build_datasets(cfg)
    return DataBundle(sets, {k: render_stack(v, cfg.stft) for k, v in sets.items()})


def generate_data(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Manifest plus one spectrogram cache file per split; reruns write identical bytes."""
    d = Path(out_dir) if out_dir is not None else default_data_dir(cfg)
    d.mkdir(parents=True, exist_ok=True)
    bundle = prepare_data(cfg)
    names = sorted(bundle.sets)
    write_manifest(d / "manifest.json", [bundle.sets[n] for n in names],
                   {"names": names, "fingerprint": data_fingerprint(cfg), "stft": asdict(cfg.stft)})
    for n in names:
        write_cache(d / f"{n}.lspc", bundle.stacks[n], {"split": n, "stft": asdict(cfg.stft)})
    return d


def load_data(cfg: ExperimentConfig, data_dir=None) -> DataBundle:
    d = Path(data_dir) if data_dir is not None else default_data_dir(cfg)
    if not (d / "manifest.json").exists():
        raise ArtifactError(f"dataset not found at {d}; run `lowspec gen-data --config <file>` first")
    sets, extra = read_manifest(d / "manifest.json")
    if extra.get("fingerprint") != data_fingerprint(cfg):
        raise ArtifactError(f"dataset at {d} was generated from a different config; regenerate it")
    bundle_sets = dict(zip(extra["names"], sets))
    stacks = {}
    for n, s in bundle_sets.items():
        arr, _ = read_cache(d / f"{n}.lspc")
        if len(arr) != len(s.audio_items()):
            raise ArtifactError(f"{d / (n + '.lspc')} holds {len(arr)} spectrograms, manifest lists "
                                f"{len(s.audio_items())}")
        stacks[n] = arr
    return DataBundle(bundle_sets, stacks)


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass
class OneClassPredictor:
    extractor: ModelGraph | None
    head: OneClassHead
    features: str = "embedding"

    def features_of(self, x) -> np.ndarray:
        return head_features(self.extractor, x, self.features)


def head_features(extractor, x, features="embedding") -> np.ndarray:
    if features == "raw":
        x = np.asarray(x, dtype=np.float64)
        return x.reshape(len(x), -1)
    out = extractor.predict(as_batch(x), embed=True)
    return out.reshape(len(out), -1).astype(np.float64)


@dataclass
class RunArtifact:
    config: ExperimentConfig
    model: ModelGraph | SiameseModel | None
    heads: dict
    reports: list
    manifest: dict


def evaluate_experiment(predictor, test: LabeledAudioSet, cfg: ExperimentConfig, stack=None,
                        name: str = "") -> EvalReport:
    """Score ``test`` through the path that matches the predictor and regime."""
    x = stack if stack is not None else render_stack(test, cfg.stft)
    bundle = DataBundle({"test": test}, {"test": x})
    conf = config_to_dict(cfg)
    if isinstance(predictor, SiameseModel):
        if test.regime != "pairs":
            raise ParameterError(f"a siamese model scores pair sets, not {test.regime!r}")
        a, b, same = bundle.arrays("test")
        d = predictor.distances(a, b)
        fewshot = fewshot_accuracy(predictor, signature_bank(cfg), NoiseSpec(cfg.dataset.snr_db),
                                   child_seed(cfg.seed, 14), stft_cfg=cfg.stft,
                                   duration_s=cfg.dataset.duration_s, fs=cfg.dataset.fs)
        return make_report("siamese", (d < predictor.threshold).astype(int), -d, same, cfg.seed, conf,
                           cfg.architecture, name or cfg.loss,
                           {"threshold": predictor.threshold, "fewshot_1shot_2way": fewshot})
    if isinstance(predictor, OneClassPredictor):
        if test.regime != "one_class":
            raise ParameterError(f"a one-class head scores one_class sets, not {test.regime!r}")
        xs, y = bundle.arrays("test")
        f = predictor.features_of(xs)
        head = predictor.head
        return make_report("one_class", head.predict(f), head.score(f), y, cfg.seed, conf,
                           cfg.architecture, name or head.kind)
    if isinstance(predictor, ModelGraph):
        if test.regime != "binary":
            raise ParameterError(f"a binary classifier scores binary sets, not {test.regime!r}")
        if predictor.meta.get("head") not in (None, "binary"):
            raise ParameterError(f"model has a {predictor.meta.get('head')} head, not a binary one")
        xs, y = bundle.arrays("test")
        p = predictor.predict(xs)[:, 0].astype(np.float64)
        return make_report("binary", (p > 0.5).astype(int), p, y, cfg.seed, conf, cfg.architecture,
                           name or "bce")
    raise ParameterError(f"cannot evaluate a {type(predictor).__name__}")


def _manifest(bundle: DataBundle) -> dict:
    return {k: v.to_manifest() for k, v in sorted(bundle.sets.items())}


def run_binary(cfg, bundle) -> RunArtifact:
    x, y = bundle.arrays("train")
    model = build(cfg.architecture, x.shape[2:], head="binary", seed=cfg.seed, dtype=cfg.dtype)
    train(model, (x, y.astype(np.float64)), cfg.train_config())
    model.round_to_float32()
    report = evaluate_experiment(model, bundle.sets["test"], cfg, bundle.stacks["test"])
    return RunArtifact(cfg, model, {}, [report], _manifest(bundle))


def fit_heads(cfg, extractor, bundle) -> dict:
    x, _ = bundle.arrays("train")
    f = head_features(extractor, x, cfg.features)
    heads = {}
    for kind in cfg.heads:
        head = fit_head(kind, f, asdict(cfg.head_config(kind)))
        if kind == "gmm":
            xc, yc = bundle.arrays("calibration")
            head = with_calibration(head, head_features(extractor, xc, cfg.features), yc)
        heads[kind] = head
    return heads


def run_one_class(cfg, bundle) -> RunArtifact:
    extractor = None
    if cfg.features == "embedding":
        xa, ya = bundle.arrays("aux")
        extractor = build(cfg.architecture, xa.shape[2:], head="softmax", n_classes=int(ya.max()) + 1,
                          seed=cfg.seed, dtype=cfg.dtype)
        train(extractor, (xa, ya), cfg.train_config())
        extractor.round_to_float32()
    heads = fit_heads(cfg, extractor, bundle)
    reports = [
        evaluate_experiment(OneClassPredictor(extractor, h, cfg.features), bundle.sets["test"], cfg,
                            bundle.stacks["test"])
        for h in heads.values()
    ]
    return RunArtifact(cfg, extractor, heads, reports, _manifest(bundle))


def run_siamese(cfg, bundle) -> RunArtifact:
    arrays = bundle.arrays("train")
    model = train_siamese(cfg.architecture, arrays, cfg.train_config(), cfg.stft, dtype=cfg.dtype)
    model.trunk.round_to_float32()
    report = evaluate_experiment(model, bundle.sets["test"], cfg, bundle.stacks["test"])
    return RunArtifact(cfg, model, {}, [report], _manifest(bundle))


RUNNERS = {"binary": run_binary, "one_class": run_one_class, "siamese": run_siamese}


def run_experiment(cfg: ExperimentConfig, bundle: DataBundle | None = None) -> RunArtifact:
    bundle = bundle if bundle is not None else prepare_data(cfg)
    log.info("run %s/%s seed=%d", cfg.regime, cfg.architecture, cfg.seed)
    return RUNNERS[cfg.regime](cfg, bundle)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def save_artifact(art: RunArtifact, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_config(art.config, d / "config.json")
    (d / "dataset.json").write_text(json.dumps(art.manifest, indent=1, sort_keys=True))
    if isinstance(art.model, SiameseModel):
        save_siamese(art.model, d / "model")
    elif art.model is not None:
        save_model(art.model, d / "model")
    for kind, head in art.heads.items():
        save_head(head, d / "heads" / kind)
    doc = {
        "format_version": ARTIFACT_VERSION,
        "regime": art.config.regime,
        "heads": list(art.heads),
        "has_model": art.model is not None,
        "reports": [r.to_dict() for r in art.reports],
    }
    (d / "artifact.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    return d


def load_artifact(directory) -> RunArtifact:
    d = Path(directory)
    try:
        doc = json.loads((d / "artifact.json").read_text())
    except FileNotFoundError:
        raise ArtifactError(f"no run artifact at {d} (artifact.json missing)") from None
    if doc.get("format_version") != ARTIFACT_VERSION:
        raise ArtifactError(
            f"artifact format version {doc.get('format_version')} != supported {ARTIFACT_VERSION}; "
            "migrate the artifact or re-run training"
        )
    cfg = load_config(d / "config.json")
    model = None
    if doc["has_model"]:
        model = load_siamese(d / "model") if cfg.regime == "siamese" else load_model(d / "model")
    heads = {k: load_head(d / "heads" / k) for k in doc["heads"]}
    manifest = json.loads((d / "dataset.json").read_text())
    reports = [EvalReport.from_dict(r) for r in doc["reports"]]
    return RunArtifact(cfg, model, heads, reports, manifest)


def evaluate_artifact(art: RunArtifact, test_seed: int | None = None) -> list[EvalReport]:
    """Re-score a stored run on its own test split, or on a fresh one drawn from ``test_seed``."""
    cfg = art.config
    if test_seed is None:
        test = LabeledAudioSet.from_manifest(art.manifest["test"])
    else:
        cfg = replace(cfg, dataset=replace(cfg.dataset, test_seed=int(test_seed)))
        test = build_datasets(cfg)["test"]
    stack = render_stack(test, cfg.stft)
    if cfg.regime == "one_class":
        return [evaluate_experiment(OneClassPredictor(art.model, h, cfg.features), test, cfg, stack)
                for h in art.heads.values()]
    if art.model is None:
        raise ArtifactError("artifact holds no model to evaluate")
    return [evaluate_experiment(art.model, test, cfg, stack)]


# ---------------------------------------------------------------------------
# table reproduction
# ---------------------------------------------------------------------------

# (accuracy, auc) printed next to the obtained values; one_class rows carry the
# per-extractor average AUC
TABLE_TARGETS = {
    1: {("spec_cnn", "bce"): (0.96, 1.0), ("basic_cnn", "bce"): (0.78, 0.71),
        ("lenet", "bce"): (0.92, 0.91)},
    2: {("oc_spec_cnn", "ocsvm"): (0.95, 0.93), ("oc_spec_cnn", "ocrf"): (0.89, 0.93),
        ("oc_spec_cnn", "gmm"): (0.92, 0.93),
        ("basic_cnn", "ocsvm"): (0.72, 0.48), ("basic_cnn", "ocrf"): (0.58, 0.48),
        ("basic_cnn", "gmm"): (0.74, 0.48),
        ("lenet", "ocsvm"): (0.90, 0.81), ("lenet", "ocrf"): (0.77, 0.81), ("lenet", "gmm"): (0.87, 0.81)},
    3: {("si_spec_cnn", "contrastive"): (0.92, 0.91), ("si_spec_cnn", "triplet"): (0.87, 0.82),
        ("basic_cnn", "contrastive"): (0.72, 0.61), ("basic_cnn", "triplet"): (0.70, 0.61),
        ("lenet", "contrastive"): (0.89, 0.84), ("lenet", "triplet"): (0.81, 0.80)},
}
NOT_IMPLEMENTED = ("ResNet", "VGG-16", "Inception", "AlexNet")
TABLE_REGIME = {1: "binary", 2: "one_class", 3: "siamese"}
TABLE_ARCHS = {
    1: ("spec_cnn", "basic_cnn", "lenet", "mini_deep"),
    2: ("oc_spec_cnn", "basic_cnn", "lenet", "mini_deep"),
    3: ("si_spec_cnn", "basic_cnn", "lenet", "mini_deep"),
}


def table_configs(table: int, seeds=(0, 1, 2), architectures=None, base: ExperimentConfig | None = None):
    if table not in TABLE_REGIME:
        raise ConfigError(f"table: must be 1, 2 or 3, got {table}")
    regime = TABLE_REGIME[table]
    base = base or default_config(regime)
    if base.regime != regime:
        raise ConfigError(f"table {table} needs a {regime} config, got {base.regime}")
    archs = architectures or TABLE_ARCHS[table]
    losses = SIAMESE_LOSSES if regime == "siamese" else ("",)
    return [replace(base, architecture=a, seed=s, loss=l) if regime == "siamese"
            else replace(base, architecture=a, seed=s)
            for a in archs for l in losses for s in seeds]


def summarize(reports) -> list[dict]:
    """Seed-averaged rows keyed by (extractor, head_or_loss), in first-seen order."""
    groups: dict = {}
    for r in reports:
        groups.setdefault((r.extractor, r.head_or_loss), []).append(r)
    rows = []
    for (arch, kind), rs in groups.items():
        acc = np.array([r.accuracy for r in rs])
        auc = np.array([r.auc for r in rs])
        rows.append({"extractor": arch, "head_or_loss": kind, "n": len(rs),
                     "accuracy": float(acc.mean()), "accuracy_sd": float(acc.std()),
                     "auc": float(auc.mean()), "auc_sd": float(auc.std())})
    return rows


def format_comparison(table: int, rows) -> str:
    lines = [f"table {table} ({TABLE_REGIME[table]})",
             f"{'extractor':<12} {'head/loss':<12} {'target acc':>10} {'obtained acc':>16} "
             f"{'target auc':>10} {'obtained auc':>16}"]
    for row in rows:
        tgt = TABLE_TARGETS[table].get((row["extractor"], row["head_or_loss"]))
        ta, tu = (f"{tgt[0]:.2f}", f"{tgt[1]:.2f}") if tgt else ("-", "-")
        lines.append(
            f"{row['extractor']:<12} {row['head_or_loss']:<12} {ta:>10} "
            f"{row['accuracy']:>9.3f} ±{row['accuracy_sd']:.3f} {tu:>10} {row['auc']:>9.3f} ±{row['auc_sd']:.3f}"
        )
    for name in NOT_IMPLEMENTED:
        lines.append(f"{name:<12} {'':<12} not implemented (see mini_deep)")
    return "\n".join(lines)


def reproduce_table(table: int, out_dir, seeds=(0, 1, 2), architectures=None,
                    base: ExperimentConfig | None = None, echo=print) -> list[EvalReport]:
    """Run the grid for one table, write ``table<N>.csv`` and print the comparison."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ledger = out / f"table{table}.csv"
    if ledger.exists():
        ledger.unlink()
    reports = []
    bundles: dict = {}
    for cfg in table_configs(table, seeds, architectures, base):
        key = data_fingerprint(cfg)
        if key not in bundles:
            bundles[key] = prepare_data(cfg)
        art = run_experiment(cfg, bundles[key])
        append_ledger(ledger, art.reports, table=str(table))
        reports.extend(art.reports)
    echo(format_comparison(table, summarize(reports)))
    return reports


__all__ = [
    "ARTIFACT_VERSION", "DataBundle", "DatasetConfig", "ExperimentConfig",
    "OneClassPredictor", "RunArtifact", "build_datasets", "config_from_dict", "config_to_dict",
    "default_config", "evaluate_artifact", "evaluate_experiment", "generate_data", "load_artifact",
    "load_config", "load_data", "prepare_data", "reproduce_table", "run_experiment", "save_artifact",
    "save_config", "summarize", "table_configs",
]
