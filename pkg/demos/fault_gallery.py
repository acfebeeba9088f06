"""
Fault gallery
=============

Each of the eight fault kinds applied to the same clean host wafer, with a
summary of where and how much it moves the trace. The traces are written to
``demos_out/fault_gallery.csv`` for plotting elsewhere.
"""

# %%
from pathlib import Path

import numpy as np

from wafergpt.data import write_csv
from wafergpt.faults import TraceProfile, default_fault_specs, generate_normal, inject_fault

profile = TraceProfile()
host = generate_normal(profile, 1, seed=42)[0]
print(f"T = {profile.seq_len}, hold region {profile.hold.start}..{profile.hold.stop - 1}, "
      f"noise sigma {profile.noise_sigma}")

# %%
# Default specs: magnitudes stay within 5% of the setpoint, the micro-arcing
# drop is 1.5%, and the single-point outlier is the smallest footprint.
rows = [host]
for spec in default_fault_specs(profile):
    bad = inject_fault(host, spec, profile)
    diff = bad.values - host.values
    touched = np.nonzero(diff)[0]
    print(f"{spec.kind:<22} steps {touched.min():2d}..{touched.max():2d} ({touched.size:2d} touched)  "
          f"max |dev| {np.abs(diff).max():.4f}  mean dev {diff[touched].mean():+.4f}")
    rows.append(bad)

# %%
out = Path("demos_out")
out.mkdir(exist_ok=True)
write_csv(rows, out / "fault_gallery.csv")
print("wrote", out / "fault_gallery.csv")
