"""
Noise sensitivity of the synthetic suite
========================================

The replica's clean traces sit on a flat setpoint, and the model quantizes
values into 100 classes. Once sensor noise is comparable to one class width
(0.01 of the range), normal wafers start landing in classes the nine training
wafers never visited, and their totals climb toward the single-point fault.
This sweep shows where separation breaks down.
"""

# %%
import numpy as np

from wafergpt.experiments import all_abnormal_above, run_experiment
from wafergpt.faults import TraceProfile, cvd_replica
from wafergpt.model import ModelConfig
from wafergpt.train import TrainConfig

for sigma in (0.0005, 0.001, 0.0015, 0.002):
    rep = cvd_replica(0, TraceProfile(noise_sigma=sigma))
    res = run_experiment(rep.train, rep.test, ModelConfig(seq_len=53), TrainConfig(epochs=200), rep.manifest)
    normal = res.test_totals[[s.label == "normal" for s in res.test_scores]]
    hardest = res.breakdown["hardest"]
    print(f"sigma {sigma:<7} tau {res.three_sigma.value:8.3f}  worst normal {normal.max():8.3f}  "
          f"weakest fault {hardest} {res.breakdown['kinds'][hardest]['min']:8.3f}  "
          f"F1@EER {res.evaluation.at_eer.f1:.3f}  all faults > tau {all_abnormal_above(res)}  "
          f"normals > tau {int(np.sum(normal > res.three_sigma.value))}")
