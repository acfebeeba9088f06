"""Per-timestamp anomaly scores, thresholds and wafer-level classification."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import ABNORMAL, NORMAL, Dataset, LabeledSequence, NormalizationParams, normalize
from .errors import DataError, DegenerateSpread, MalformedInput, ShapeMismatch
from .model import ModelConfig
from .train import evaluate_losses

THRESHOLD_METHODS = ("three_sigma", "eer", "quantile")


@dataclass
class AnomalyScore:
    id: str
    per_timestamp: np.ndarray
    total: float
    label: Optional[str] = None


@dataclass
class Threshold:
    value: float
    method: str
    provenance: dict = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("threshold must be finite")
        if self.method not in THRESHOLD_METHODS:
            raise ValueError(f"unknown threshold method {self.method!r}")


def score_sequence(params: dict, config: ModelConfig, seq, id: Optional[str] = None) -> AnomalyScore:
    """Score one already-normalized wafer of length ``T``.

    ``per_timestamp[t]`` is the cross-entropy of the prediction for position
    ``t + 1``; ``total`` is their sum.
    """
    if isinstance(seq, LabeledSequence):
        values, id, label = seq.values, seq.id if id is None else id, seq.label
    else:
        values, label = np.asarray(seq, dtype=np.float64), None
    if values.shape != (config.seq_len,):
        raise ShapeMismatch(f"expected a sequence of length {config.seq_len}, got {values.shape}")
    per_t, total = evaluate_losses(params, config, values[None])
    return AnomalyScore(id or "", per_t[0], float(total[0]), label)


def score_dataset(params: dict, config: ModelConfig, dataset: Dataset,
                  norm: NormalizationParams) -> list:
    """Normalize and score every sequence of ``dataset`` (labels are only carried along)."""
    if dataset.seq_len != config.seq_len:
        raise ShapeMismatch(f"dataset seq_len {dataset.seq_len} != model seq_len {config.seq_len}")
    per_t, totals = evaluate_losses(params, config, normalize(dataset.values(), norm))
    return [AnomalyScore(s.id, per_t[i], float(totals[i]), s.label)
            for i, s in enumerate(dataset.sequences)]


def fit_threshold_three_sigma(train_totals: Sequence[float]) -> Threshold:
    """``tau = mean + 3 * sample std`` of the training sequence losses."""
    x = np.sort(np.asarray(train_totals, dtype=np.float64))  # sorted: permutation-invariant sums
    if x.size < 2:
        raise DataError("three-sigma threshold needs at least 2 training totals")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    degenerate = sd == 0.0
    if degenerate:
        warnings.warn("training totals have zero spread; threshold equals the mean", DegenerateSpread)
    return Threshold(mean + 3.0 * sd, "three_sigma", {"mean": mean, "std": sd, "n": int(x.size)}, degenerate)


def fit_threshold_quantile(train_totals: Sequence[float], q: float = 0.99) -> Threshold:
    x = np.asarray(train_totals, dtype=np.float64)
    if x.size < 1 or not 0 <= q <= 1:
        raise DataError("quantile threshold needs data and 0 <= q <= 1")
    return Threshold(float(np.quantile(x, q)), "quantile", {"q": q, "n": int(x.size)})


def fit_threshold_eer(totals: Sequence[float], labels: Sequence) -> Threshold:
    """Threshold at the equal-error point of the labeled ROC curve (evaluation only)."""
    from .metrics import eer_point, roc_curve

    pt = eer_point(roc_curve(totals, labels))
    return Threshold(pt.threshold, "eer", {"fpr": pt.fpr, "fnr": pt.fnr})


def classify(score, threshold) -> str:
    """``normal`` iff ``tau > total``; a score equal to the threshold is abnormal."""
    total = score.total if isinstance(score, AnomalyScore) else float(score)
    tau = threshold.value if isinstance(threshold, Threshold) else float(threshold)
    return NORMAL if tau > total else ABNORMAL


def write_scores_csv(scores: Sequence[AnomalyScore], path) -> None:
    """``id,label,total,l_t_0,...,l_t_{T-2}`` with round-trip (17 digit) floats."""
    scores = list(scores)
    if not scores:
        raise DataError("no scores to write")
    L = len(scores[0].per_timestamp)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["id", "label", "total"] + [f"l_t_{i}" for i in range(L)]) + "\n")
        for s in scores:
            if len(s.per_timestamp) != L:
                raise ShapeMismatch("all scores must have the same length")
            cells = [s.id, s.label or "", repr(float(s.total))] + [repr(float(v)) for v in s.per_timestamp]
            fh.write(",".join(cells) + "\n")


def read_scores_csv(path) -> list:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:3] != ["id", "label", "total"]:
            raise MalformedInput(0, "score CSV header must start with id,label,total")
        out = []
        for row, rec in enumerate(reader, start=1):
            if not rec:
                continue
            if len(rec) != len(header):
                raise MalformedInput(row, "wrong number of fields")
            try:
                nums = [float(v) for v in rec[2:]]
            except ValueError:
                raise MalformedInput(row, "non-numeric score") from None
            out.append(AnomalyScore(rec[0], np.array(nums[1:]), nums[0], rec[1] or None))
    if not out:
        raise DataError(f"{path}: no scores")
    return out
