"""
UCR Wafer benchmark
===================

Needs ``Wafer_TRAIN.tsv`` and ``Wafer_TEST.tsv`` from the UCR archive, either
under ``data/Wafer/`` or in the directory named by ``WAFERGPT_UCR_DIR``.
Training labels are stripped before pre-training.
"""

# %%
import os
import sys
from pathlib import Path

from wafergpt.data import Dataset, load_ucr_tsv, strip_labels
from wafergpt.experiments import UCR_EPOCHS, run_experiment
from wafergpt.metrics import format_table
from wafergpt.model import ModelConfig
from wafergpt.train import TrainConfig

base = Path(os.environ.get("WAFERGPT_UCR_DIR", "data/Wafer"))
if not (base / "Wafer_TRAIN.tsv").exists():
    sys.exit(f"Wafer_TRAIN.tsv not found in {base}")
train = load_ucr_tsv(base / "Wafer_TRAIN.tsv")
test = load_ucr_tsv(base / "Wafer_TEST.tsv")
print("train:", train.label_counts(), " test:", test.label_counts(), " T =", train.seq_len)

# %%
unlabeled = Dataset(strip_labels(train.sequences), train.seq_len, "train")
res = run_experiment(unlabeled, test, ModelConfig(seq_len=train.seq_len), TrainConfig(epochs=UCR_EPOCHS))
print(f"trained in {res.train_seconds / 60:.1f} min")
rows = {"at EER": res.evaluation.at_eer, "at 3-sigma": res.at_three_sigma}
print(format_table(rows, color=sys.stdout.isatty()))
print(f"AUC {res.evaluation.auc:.4f}  EER {res.evaluation.eer.eer:.4f}")
