"""ROC, AUC, equal-error-rate operating point and confusion metrics.

The abnormal class is the positive class everywhere. A sequence is predicted
abnormal when its score is ``>=`` the threshold.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .data import ABNORMAL, NORMAL
from .errors import DataError, MissingManifest, SingleClass


def positive_mask(labels) -> np.ndarray:
    """Boolean abnormal-mask from ``"abnormal"/"normal"`` strings, bools or 0/1 ints."""
    out = []
    for lab in labels:
        if lab == ABNORMAL or lab is True or (isinstance(lab, (int, np.integer)) and lab == 1):
            out.append(True)
        elif lab == NORMAL or lab is False or (isinstance(lab, (int, np.integer)) and lab == 0):
            out.append(False)
        else:
            raise DataError(f"unusable label {lab!r}")
    return np.array(out, dtype=bool)


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64)
    y = positive_mask(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError("scores and labels must be 1-D and equally long")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    if y.all() or not y.any():
        raise SingleClass("both normal and abnormal sequences are required")
    return s, y


@dataclass
class RocCurve:
    thresholds: np.ndarray  # descending; first entry is +inf
    tp: np.ndarray
    fp: np.ndarray
    n_pos: int
    n_neg: int

    @property
    def tpr(self) -> np.ndarray:
        return self.tp / self.n_pos

    @property
    def fpr(self) -> np.ndarray:
        return self.fp / self.n_neg

    @property
    def points(self) -> list:
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))


def roc_curve(scores, labels) -> RocCurve:
    """Sweep thresholds over ``+inf`` and every distinct score, highest first.

    The ``+inf`` threshold gives the (0, 0) corner and the lowest score gives
    (1, 1), so no ``-inf`` sentinel is needed.
    """
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    last_of_group = np.r_[np.nonzero(np.diff(s_sorted))[0], s.size - 1]
    tp = np.cumsum(y_sorted)[last_of_group]
    fp = np.cumsum(~y_sorted)[last_of_group]
    return RocCurve(np.r_[np.inf, s_sorted[last_of_group]], np.r_[0, tp], np.r_[0, fp],
                    int(y.sum()), int((~y).sum()))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area; equals P(score_abn > score_norm) + 0.5 * P(tie)."""
    tp, fp = curve.tp.astype(np.float64), curve.fp.astype(np.float64)
    area2 = np.sum(np.diff(fp) * (tp[1:] + tp[:-1]))  # twice the area in count units
    return float(area2 / (2.0 * curve.n_pos * curve.n_neg))


@dataclass
class EerPoint:
    threshold: float
    fpr: float
    fnr: float
    index: int

    @property
    def eer(self) -> float:
        return 0.5 * (self.fpr + self.fnr)


def eer_point(curve: RocCurve) -> EerPoint:
    """Curve point minimizing ``|fpr - fnr|``; ties go to smaller fpr, then smaller threshold.

    The comparison is done on integer counts (``|fp * P - fn * N|``) so ties
    are exact.
    """
    fn = curve.n_pos - curve.tp
    gap = np.abs(curve.fp.astype(np.int64) * curve.n_pos - fn.astype(np.int64) * curve.n_neg)
    # lexsort: last key is primary
    i = int(np.lexsort((curve.thresholds, curve.fp, gap))[0])
    return EerPoint(float(curve.thresholds[i]), float(curve.fp[i] / curve.n_neg),
                    float(fn[i] / curve.n_pos), i)


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    precision_undefined: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_at(scores, labels, tau: float) -> Metrics:
    """Confusion counts and accuracy / precision / recall / F1 at threshold ``tau``.

    Precision is reported as 0 (and flagged) when nothing is predicted abnormal.
    """
    s, y = _check(scores, labels)
    pred = s >= tau
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    undefined = tp + fp == 0
    precision = 0.0 if undefined else tp / (tp + fp)
    recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Metrics((tp + tn) / s.size, precision, recall, f1, tp, fp, tn, fn, undefined)


@dataclass
class Evaluation:
    auc: float
    eer: EerPoint
    at_eer: Metrics
    curve: RocCurve

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "eer": {"threshold": self.eer.threshold, "fpr": self.eer.fpr,
                    "fnr": self.eer.fnr, "rate": self.eer.eer},
            "at_eer": self.at_eer.to_dict(),
        }


def evaluate(scores, labels) -> Evaluation:
    """ROC, AUC, EER point and the metrics at the EER threshold."""
    curve = roc_curve(scores, labels)
    pt = eer_point(curve)
    return Evaluation(auc(curve), pt, metrics_at(scores, labels, pt.threshold), curve)


def per_fault_breakdown(totals: Mapping[str, float], manifest: Optional[dict],
                        threshold: Optional[float] = None) -> dict:
    """Loss statistics per injected fault kind.

    ``totals`` maps sequence id to its total score. Returns
    ``{"kinds": {kind: {n, min, mean, max, margin}}, "hardest": kind}`` where
    ``margin`` is ``min - threshold`` (or ``None``) and the hardest kind is the
    one with the lowest minimum score.
    """
    if not manifest or "faults" not in manifest:
        raise MissingManifest("a fault manifest is required")
    groups = {}
    for entry in manifest["faults"]:
        if entry["id"] in totals:
            groups.setdefault(entry["kind"], []).append(float(totals[entry["id"]]))
    if not groups:
        raise DataError("no abnormal sequences from the manifest were scored")
    kinds = {}
    for kind, vals in groups.items():
        v = np.array(vals)
        kinds[kind] = {
            "n": int(v.size), "min": float(v.min()), "mean": float(v.mean()), "max": float(v.max()),
            "margin": None if threshold is None else float(v.min() - threshold),
        }
    hardest = min(kinds, key=lambda k: (kinds[k]["min"], k))
    return {"kinds": kinds, "hardest": hardest}


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("threshold,fpr,tpr\n")
        for t, f, p in curve.points:
            fh.write(f"{t!r},{f!r},{p!r}\n")


# -- terminal table ----------------------------------------------------------

_RED, _WHITE, _BLUE = (248, 105, 107), (251, 251, 254), (90, 138, 198)


def _shade(v: float):
    """Red (0) -> white (0.9) -> blue (1) background, roughly like a heat-mapped table."""
    if v < 0.9:
        a, b, t = _RED, _WHITE, max(v, 0.0) / 0.9
    else:
        a, b, t = _WHITE, _BLUE, (min(v, 1.0) - 0.9) / 0.1
    return tuple(int(round(x + (y - x) * t)) for x, y in zip(a, b))


def format_table(rows: Mapping[str, Metrics], color: bool = True) -> str:
    """Accuracy / precision / recall / F1 per model, one line each."""
    cols = ("accuracy", "precision", "recall", "f1")
    width = max([len(k) for k in rows] + [5])
    lines = [f"{'model':<{width}} " + " ".join(f"{c:>9}" for c in cols)]
    for name, m in rows.items():
        cells = []
        for c in cols:
            v = getattr(m, c)
            text = f"{v:>9.3f}"
            if color:
                r, g, b = _shade(v)
                text = f"\x1b[48;2;{r};{g};{b}m\x1b[38;2;0;0;0m{text}\x1b[0m"
            cells.append(text)
        lines.append(f"{name:<{width}} " + " ".join(cells))
    return "\n".join(lines)


def average_metrics(items: Sequence[Metrics]) -> dict:
    cols = ("accuracy", "precision", "recall", "f1")
    return {c: float(np.mean([getattr(m, c) for m in items])) for c in cols}
