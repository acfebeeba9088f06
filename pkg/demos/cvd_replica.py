"""
Synthetic CVD replica, end to end
=================================

Nine clean wafers are enough to pre-train the detector. It then has to pick
eight injected faults out of 575 test wafers using nothing but its own
next-value surprise.

Run with ``python demos/cvd_replica.py [seed]``.
"""

# %%
import sys

from wafergpt.experiments import CVD_EPOCHS, run_experiment
from wafergpt.faults import cvd_replica
from wafergpt.metrics import format_table
from wafergpt.model import ModelConfig
from wafergpt.train import TrainConfig

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
rep = cvd_replica(seed)
print("train:", rep.train.label_counts(), " test:", rep.test.label_counts())

# %%
# Training only ever sees the value matrix. The labels in the test split are
# carried along for evaluation.
cfg = ModelConfig(seq_len=rep.train.seq_len, seed=seed)
res = run_experiment(rep.train, rep.test, cfg, TrainConfig(epochs=CVD_EPOCHS, seed=seed), rep.manifest)
print(f"trained {CVD_EPOCHS} epochs in {res.train_seconds:.1f}s, "
      f"final mean loss {res.record.epoch_means[-1]:.4f}")

# %%
# The three-sigma threshold is fitted on the nine training totals alone.
tau = res.three_sigma
normal = res.test_totals[[s.label == "normal" for s in res.test_scores]]
print(f"tau = {tau.value:.3f}  (mean {tau.provenance['mean']:.3f}, std {tau.provenance['std']:.3f})")
print(f"worst normal test wafer: {normal.max():.3f}")

# %%
# Per-fault totals, lowest first. The margin is how far each fault clears tau.
kinds = res.breakdown["kinds"]
for kind in sorted(kinds, key=lambda k: kinds[k]["min"]):
    print(f"  {kind:<22} total {kinds[kind]['min']:9.3f}   margin {kinds[kind]['margin']:9.3f}")
print("hardest:", res.breakdown["hardest"])

# %%
print()
rows = {"at EER": res.evaluation.at_eer, "at 3-sigma": res.at_three_sigma}
print(format_table(rows, color=sys.stdout.isatty()))
print(f"AUC {res.evaluation.auc:.4f}")
