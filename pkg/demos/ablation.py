"""
Ablation on the CVD replica
===========================

Removes one ingredient at a time: the position channel, the convolutional
embedding (replaced by a linear lift) or the decoder stack (embedding goes
straight to the output head). Run with ``python demos/ablation.py [epochs]``.
"""

# %%
import sys

from wafergpt.experiments import ABLATIONS, CVD_EPOCHS, ablation_config, run_experiment
from wafergpt.faults import cvd_replica
from wafergpt.metrics import format_table
from wafergpt.model import ModelConfig, init_params, n_parameters
from wafergpt.train import TrainConfig

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else CVD_EPOCHS
rep = cvd_replica(0)
base = ModelConfig(seq_len=rep.train.seq_len)

# %%
rows = {}
for variant in ABLATIONS:
    cfg = ablation_config(base, variant)
    res = run_experiment(rep.train, rep.test, cfg, TrainConfig(epochs=epochs), rep.manifest)
    rows[variant] = res.evaluation.at_eer
    print(f"{variant:<15} {n_parameters(init_params(cfg)):6d} params  AUC {res.evaluation.auc:.4f}  "
          f"hardest {res.breakdown['hardest']} (margin {res.breakdown['kinds'][res.breakdown['hardest']]['margin']:.2f})")

# %%
# On this synthetic suite every variant tends to separate the faults, so the
# ordering between variants is mostly decided on real data.
print()
print(format_table(rows, color=sys.stdout.isatty()))
