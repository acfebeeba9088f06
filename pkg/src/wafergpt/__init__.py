"""Unsupervised anomaly detection for fixed-length wafer sensor traces.

A causal-convolution embedded, decoder-only Transformer is pre-trained to
predict the quantized next value of each trace; the summed cross-entropy of
those predictions is the anomaly score.
"""

from .data import (Dataset, LabeledSequence, NormalizationParams, QuantizedSequence, fit_normalizer,
                   load_csv, load_ucr_tsv, normalize, quantize, write_csv)
from .detector import (AnomalyScore, Threshold, classify, fit_threshold_three_sigma, score_dataset,
                       score_sequence)
from .faults import FaultSpec, TraceProfile, cvd_replica, generate_normal, inject_fault
from .metrics import auc, eer_point, evaluate, metrics_at, per_fault_breakdown, roc_curve
from .model import ModelConfig, build_causal_mask, forward, init_params, load_checkpoint, save_checkpoint
from .train import TrainConfig, cross_entropy, grad_check, sequence_loss, train

__version__ = "0.1.0"

__all__ = [
    "AnomalyScore", "Dataset", "FaultSpec", "LabeledSequence", "ModelConfig", "NormalizationParams",
    "QuantizedSequence", "Threshold", "TraceProfile", "TrainConfig", "auc", "build_causal_mask",
    "classify", "cross_entropy", "cvd_replica", "eer_point", "evaluate", "fit_normalizer",
    "fit_threshold_three_sigma", "forward", "generate_normal", "grad_check", "init_params",
    "inject_fault", "load_checkpoint", "load_csv", "load_ucr_tsv", "metrics_at", "normalize",
    "per_fault_breakdown", "quantize", "roc_curve", "save_checkpoint", "score_dataset",
    "score_sequence", "sequence_loss", "train", "write_csv",
]
