"""Accuracy against hardware cost.

Each design point pairs a quantization scheme with a PE type and array
size.  Accuracy is the SNR of the GEMM output, cost is the array's
area times power.  A MixPE point computes exactly what the matching
multiplier PE computes, so it keeps the SNR and moves left on cost.
"""
import math

import numpy as np

from mixpe.dse import default_design_points, frontier, sweep

rng = np.random.default_rng(0)
weights = rng.standard_normal((256, 1024))
acts = rng.standard_normal((64, 1024))

points = sweep(default_design_points(), weights, activations=acts)
print(f"{len(points)} design points, frontier:")
for p in sorted(frontier(points), key=lambda p: p.hw_cost):
    snr = "inf" if math.isinf(p.snr_db) else f"{p.snr_db:6.2f}"
    print(f"  {p.design.label:<28} SNR {snr} dB   cost {p.hw_cost:.3f}")

print("\nsame scheme, different PE:")
for p in points:
    if p.design.scheme.label == "W4A8-g128" and p.design.rows == 4:
        print(f"  {p.design.pe_kind.value:<10} SNR {p.snr_db:6.2f} dB   cost {p.hw_cost:.3f}")
