"""End-to-end runs: pre-train on a train split, score a test split, evaluate.

Used by the CLI, the demos and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data import Dataset, NormalizationParams, fit_normalizer, prepare
from .detector import Threshold, fit_threshold_three_sigma, score_dataset
from .metrics import Evaluation, Metrics, evaluate, metrics_at, per_fault_breakdown
from .model import ModelConfig
from .train import LossRecord, TrainConfig, train

# Per-dataset training defaults; model sizes live in ModelConfig.
CVD_EPOCHS = 200
UCR_EPOCHS = 50

ABLATIONS = ("full", "no-PE", "no-TCN", "no-Transformer")


def ablation_config(config: ModelConfig, variant: str) -> ModelConfig:
    if variant == "full":
        return config
    if variant == "no-PE":
        return replace(config, use_pe=False)
    if variant == "no-TCN":
        return replace(config, use_tcn=False)
    if variant == "no-Transformer":
        return replace(config, use_transformer=False)
    raise ValueError(f"unknown ablation variant {variant!r}")


@dataclass
class ExperimentResult:
    model_config: ModelConfig
    train_config: TrainConfig
    normalization: NormalizationParams
    params: dict
    record: LossRecord
    test_scores: list
    three_sigma: Threshold
    evaluation: Evaluation
    at_three_sigma: Metrics
    breakdown: Optional[dict]
    train_seconds: float
    total_seconds: float

    @property
    def train_totals(self) -> np.ndarray:
        return self.record.sequence_totals

    @property
    def test_totals(self) -> np.ndarray:
        return np.array([s.total for s in self.test_scores])

    def summary(self) -> dict:
        ev = self.evaluation.to_dict()
        return {
            "auc": ev["auc"],
            "eer": ev["eer"],
            "at_eer": ev["at_eer"],
            "three_sigma": {"threshold": self.three_sigma.value, **self.three_sigma.provenance,
                            "degenerate": self.three_sigma.degenerate,
                            "metrics": self.at_three_sigma.to_dict()},
            "breakdown": self.breakdown,
            "train_seconds": self.train_seconds,
        }


def run_experiment(train_set: Dataset, test_set: Dataset, model_config: ModelConfig,
                   train_config: TrainConfig, manifest: Optional[dict] = None) -> ExperimentResult:
    """Unsupervised pre-training on ``train_set`` values, then scoring and evaluation on ``test_set``."""
    t0 = time.perf_counter()
    norm = fit_normalizer(train_set)
    params, record = train(prepare(train_set, norm), model_config, train_config)
    t1 = time.perf_counter()
    scores = score_dataset(params, model_config, test_set, norm)
    totals = [s.total for s in scores]
    labels = [s.label for s in scores]
    tau = fit_threshold_three_sigma(record.sequence_totals)
    ev = evaluate(totals, labels)
    breakdown = None
    if manifest is not None:
        breakdown = per_fault_breakdown({s.id: s.total for s in scores}, manifest, tau.value)
    return ExperimentResult(model_config, train_config, norm, params, record, scores, tau, ev,
                            metrics_at(totals, labels, tau.value), breakdown,
                            t1 - t0, time.perf_counter() - t0)


def run_ablation(train_set: Dataset, test_set: Dataset, model_config: ModelConfig,
                 train_config: TrainConfig, manifest: Optional[dict] = None,
                 variants=ABLATIONS) -> dict:
    return {v: run_experiment(train_set, test_set, ablation_config(model_config, v), train_config, manifest)
            for v in variants}


def all_abnormal_above(result: ExperimentResult) -> bool:
    """Every abnormal test total strictly above the three-sigma threshold."""
    return all(s.total > result.three_sigma.value for s in result.test_scores if s.label == "abnormal")
