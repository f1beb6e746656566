"""Fitted anomaly heads over embedding vectors, with a common score/predict surface.

``score`` is oriented so that larger means more target-like for every kind:
the OC-SVM decision value, the negated isolation-forest anomaly score, and the
GMM log-density.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..errors import ArtifactError, FitError, ParameterError
from .gmm import GmmConfig, GmmModel, em
from .iforest import IsoForestConfig, IsoForestModel, Tree, grow
from .isotonic import IsotonicMap, fit_isotonic
from .ocsvm import OcSvmConfig, OcSvmModel, solve

HEAD_KINDS = ("ocsvm", "ocrf", "gmm")
HEAD_FORMAT_VERSION = 1


@dataclass(frozen=True)
class OneClassHead:
    kind: str
    model: object
    threshold: float
    config: dict
    calibration: IsotonicMap | None = None

    def __post_init__(self):
        if self.kind not in HEAD_KINDS:
            raise ParameterError(f"unknown head kind {self.kind!r}; choose from {HEAD_KINDS}")

    def score(self, X) -> np.ndarray:
        X = _as_matrix(X)
        if self.kind == "ocsvm":
            return self.model.decision(X)
        if self.kind == "ocrf":
            return -self.model.anomaly_score(X)
        return self.model.logpdf(X)

    def probability(self, X) -> np.ndarray | None:
        if self.calibration is None:
            return None
        return self.calibration(self.score(X))

    def predict(self, X, threshold: float | None = None) -> np.ndarray:
        """1 = target (inlier), 0 = anomaly."""
        thr = self.threshold if threshold is None else float(threshold)
        if self.kind == "gmm":
            if self.calibration is None:
                raise FitError("GMM head needs calibration before it can predict labels")
            return (self.probability(X) >= thr).astype(np.int64)
        return (self.score(X) >= thr).astype(np.int64)


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return X[None]
    if X.ndim == 2:
        return X
    return X.reshape(len(X), -1)


def fit_ocsvm(X, cfg: OcSvmConfig = OcSvmConfig()) -> OneClassHead:
    return OneClassHead("ocsvm", solve(_as_matrix(X), cfg), 0.0, asdict(cfg))


def score_ocsvm(head: OneClassHead, x) -> np.ndarray:
    return head.model.decision(_as_matrix(x))


def fit_isolation_forest(X, cfg: IsoForestConfig = IsoForestConfig()) -> OneClassHead:
    model = grow(_as_matrix(X), cfg)
    # score is the negated anomaly score, so the threshold flips sign with it
    return OneClassHead("ocrf", model, -model.threshold, asdict(cfg))


def score_if(head: OneClassHead, x) -> np.ndarray:
    """Raw anomaly score in (0, 1]; larger is more anomalous."""
    return head.model.anomaly_score(_as_matrix(x))


def fit_gmm(X, cfg: GmmConfig = GmmConfig()) -> OneClassHead:
    return OneClassHead("gmm", em(_as_matrix(X), cfg), 0.5, asdict(cfg))


def gmm_logpdf(head: OneClassHead, x) -> np.ndarray:
    return head.model.logpdf(_as_matrix(x))


def calibrate(mapping: IsotonicMap, score) -> np.ndarray:
    return mapping(score)


def with_calibration(head: OneClassHead, X, labels) -> OneClassHead:
    """Attach an isotonic map from head scores to label frequency on a mixed set."""
    mapping = fit_isotonic(head.score(X), labels)
    return OneClassHead(head.kind, head.model, head.threshold, head.config, mapping)


def predict_one_class(head: OneClassHead, x, threshold: float | None = None):
    """``(labels, values)``: values are calibrated probabilities if available, else scores."""
    prob = head.probability(x)
    values = head.score(x) if prob is None else prob
    return head.predict(x, threshold), values


HEAD_FITTERS = {
    "ocsvm": (fit_ocsvm, OcSvmConfig),
    "ocrf": (fit_isolation_forest, IsoForestConfig),
    "gmm": (fit_gmm, GmmConfig),
}


def fit_head(kind: str, X, params: dict | None = None) -> OneClassHead:
    if kind not in HEAD_FITTERS:
        raise ParameterError(f"unknown head kind {kind!r}; choose from {HEAD_KINDS}")
    fit, cfg_cls = HEAD_FITTERS[kind]
    return fit(X, cfg_cls(**(params or {})))


# ---------------------------------------------------------------------------
# persistence: head.json plus raw little-endian float64 support vectors
# ---------------------------------------------------------------------------


def save_head(head: OneClassHead, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": HEAD_FORMAT_VERSION,
        "kind": head.kind,
        "threshold": head.threshold,
        "config": head.config,
        "calibration": None if head.calibration is None else {
            "x": head.calibration.x.tolist(), "y": head.calibration.y.tolist()},
    }
    m = head.model
    if head.kind == "ocsvm":
        doc["model"] = {"coef": m.coef.tolist(), "rho": m.rho, "gamma": m.gamma, "n_iter": m.n_iter,
                        "support_shape": list(m.support.shape)}
        (d / "support.bin").write_bytes(np.ascontiguousarray(m.support, dtype="<f8").tobytes())
    elif head.kind == "ocrf":
        doc["model"] = {"psi": m.psi, "threshold": m.threshold, "trees": [t.to_dict() for t in m.trees]}
    else:
        doc["model"] = {"weights": m.weights.tolist(), "means": m.means.tolist(),
                        "variances": m.variances.tolist(), "converged": m.converged}
    (d / "head.json").write_text(json.dumps(doc, sort_keys=True))
    return d


def load_head(directory: str | Path) -> OneClassHead:
    d = Path(directory)
    try:
        doc = json.loads((d / "head.json").read_text())
    except FileNotFoundError:
        raise ArtifactError(f"missing head file: {d / 'head.json'}") from None
    if doc.get("format_version") != HEAD_FORMAT_VERSION:
        raise ArtifactError(
            f"head format version {doc.get('format_version')} != supported {HEAD_FORMAT_VERSION}; "
            "migrate the artifact"
        )
    m = doc["model"]
    kind = doc["kind"]
    if kind == "ocsvm":
        shape = tuple(m["support_shape"])
        raw = (d / "support.bin").read_bytes()
        if len(raw) != 8 * int(np.prod(shape)) or len(m["coef"]) != shape[0]:
            raise ArtifactError("support.bin does not match the recorded support shape")
        support = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        model = OcSvmModel(support, np.asarray(m["coef"]), m["rho"], m["gamma"], m["n_iter"])
    elif kind == "ocrf":
        model = IsoForestModel(tuple(Tree.from_dict(t) for t in m["trees"]), m["psi"], m["threshold"])
    elif kind == "gmm":
        model = GmmModel(np.asarray(m["weights"]), np.asarray(m["means"]), np.asarray(m["variances"]),
                         m["converged"])
    else:
        raise ArtifactError(f"unknown head kind {kind!r} in {d}")
    cal = doc["calibration"]
    mapping = None if cal is None else IsotonicMap(np.asarray(cal["x"]), np.asarray(cal["y"]))
    return OneClassHead(kind, model, doc["threshold"], doc["config"], mapping)
