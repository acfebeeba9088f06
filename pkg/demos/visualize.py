"""
Looking inside a trained detector
=================================

Trains on the CVD replica, then exports for the micro-arcing wafer: the
predicted next-value distribution with the real trace on top, every
attention map, the loss histogram with the threshold, and the ROC curve.
Everything lands in ``demos_out/viz/`` as CSV + SVG.
"""

# %%
from pathlib import Path

from wafergpt.data import normalize
from wafergpt.experiments import run_experiment
from wafergpt.faults import cvd_replica
from wafergpt.model import ModelConfig, forward, softmax_probs
from wafergpt.train import TrainConfig
from wafergpt import viz

out = Path("demos_out/viz")
out.mkdir(parents=True, exist_ok=True)
rep = cvd_replica(0)
res = run_experiment(rep.train, rep.test, ModelConfig(seq_len=53), TrainConfig(epochs=200), rep.manifest)

# %%
# The output at step t is a distribution over the value at t + 1, so the
# overlay is drawn one step to the right of the input.
fault = next(f for f in rep.manifest["faults"] if f["kind"] == "MicroArcing")
seq = next(s for s in rep.test if s.id == fault["id"])
values = normalize(seq, res.normalization)
fo = forward(values[:-1], res.params, res.model_config)
hm = viz.export_probability_heatmap(softmax_probs(fo.logits), values, out / "micro_arcing_probs")
print("heatmap:", hm.csv_path, hm.svg_path)

# %%
maps = viz.export_attention_maps(fo.attentions, out / "attention")
print(f"{len(maps) - 1} attention grids + mosaic in {out / 'attention'}")

# %%
kinds = {f["id"]: f["kind"] for f in rep.manifest["faults"]}
hist = viz.export_loss_histogram(res.train_totals, res.test_totals, [s.label for s in res.test_scores],
                                 res.three_sigma.value, out / "loss_histogram",
                                 fault_kinds=[kinds.get(s.id) for s in res.test_scores])
roc = viz.export_roc(res.evaluation.curve, res.evaluation.auc, out / "roc")
print("histogram:", hist["svg"], " roc:", roc["svg"])
