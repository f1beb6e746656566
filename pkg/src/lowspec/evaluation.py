"""Accuracy, confusion counts, ROC/AUC and run reports."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError

LEDGER_COLUMNS = (
    "table", "regime", "extractor", "head_or_loss", "seed", "accuracy", "auc",
    "tp", "fp", "tn", "fn", "fingerprint",
)


def _labels(a, name):
    a = np.asarray(a).ravel()
    if a.size and not np.isin(a, (0, 1)).all():
        raise ParameterError(f"{name} must be 0/1 valued")
    return a.astype(np.int64)


def accuracy(preds, labels) -> float:
    p, y = _labels(preds, "preds"), _labels(labels, "labels")
    if p.shape != y.shape or p.size == 0:
        raise ParameterError("preds and labels must be non-empty and equally long")
    return float(np.mean(p == y))


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total


def confusion(preds, labels) -> ConfusionMatrix:
    p, y = _labels(preds, "preds"), _labels(labels, "labels")
    if p.shape != y.shape:
        raise ParameterError("preds and labels differ in length")
    return ConfusionMatrix(
        int(np.sum((p == 1) & (y == 1))),
        int(np.sum((p == 1) & (y == 0))),
        int(np.sum((p == 0) & (y == 0))),
        int(np.sum((p == 0) & (y == 1))),
    )


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores, labels) -> RocCurve:
    """Sweep the threshold down through every distinct score.

    Tied scores move together, so a tie contributes a diagonal segment and the
    trapezoid rule gives it half credit.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _labels(labels, "labels")
    if s.shape != y.shape:
        raise ParameterError("scores and labels differ in length")
    if not np.isfinite(s).all():
        raise ParameterError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ParameterError("ROC/AUC needs both labels present")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s)), y.size - 1]  # end of each tie group
    tp = np.cumsum(y)[last]
    fp = (last + 1) - tp
    # integer trapezoid sum, normalised once, so equal inputs give exactly equal AUCs
    tp0 = np.r_[0, tp]
    fp0 = np.r_[0, fp]
    twice_area = int(np.sum(np.diff(fp0) * (tp0[1:] + tp0[:-1])))
    auc = twice_area / (2 * n_pos * n_neg)
    return RocCurve(fp0 / n_neg, tp0 / n_pos, np.r_[np.inf, s[last]], auc)


def roc_auc(scores, labels) -> float:
    return roc_curve(scores, labels).auc


def pairwise_auc(scores, labels) -> float:
    """O(P*N) oracle: P(positive outscores negative), ties counted as half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _labels(labels, "labels")
    pos, neg = s[y == 1], s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise ParameterError("AUC needs both labels present")
    wins = int(np.sum(pos[:, None] > neg[None, :]))
    ties = int(np.sum(pos[:, None] == neg[None, :]))
    return (2 * wins + ties) / (2 * pos.size * neg.size)


def fingerprint(obj) -> str:
    """Short stable hash of a JSON-serialisable config (seeds + hyperparameters)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class EvalReport:
    regime: str
    accuracy: float
    auc: float
    confusion: ConfusionMatrix
    seed: int
    fingerprint: str
    extractor: str = ""
    head_or_loss: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = asdict(self.confusion)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        d = dict(d)
        d["confusion"] = ConfusionMatrix(**d["confusion"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def ledger_row(self, table: str = "") -> dict:
        c = self.confusion
        return {
            "table": table, "regime": self.regime, "extractor": self.extractor,
            "head_or_loss": self.head_or_loss, "seed": self.seed,
            "accuracy": f"{self.accuracy:.6f}", "auc": f"{self.auc:.6f}",
            "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn, "fingerprint": self.fingerprint,
        }


def make_report(regime, preds, scores, labels, seed, config, extractor="", head_or_loss="", extra=None):
    cm = confusion(preds, labels)
    return EvalReport(regime, cm.accuracy, roc_auc(scores, labels), cm, int(seed), fingerprint(config),
                      extractor, head_or_loss, dict(extra or {}))


def append_ledger(path: str | Path, reports, table: str = "") -> None:
    """Append one CSV row per report, writing the header on first use."""
    p = Path(path)
    new = not p.exists() or p.stat().st_size == 0
    with open(p, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LEDGER_COLUMNS, lineterminator="\n")
        if new:
            w.writeheader()
        for r in reports:
            w.writerow(r.ledger_row(table))


def read_ledger(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
