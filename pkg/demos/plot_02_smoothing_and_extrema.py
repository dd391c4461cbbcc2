"""
Smoothing and prominent extrema
===============================

Averaging the 30 subcarriers and applying a Savitzky-Golay filter removes
most of the noise.  Extrema are then ranked by topographic prominence, and
only the large ones count as activity.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from csisense import ActivityLabel, detect_extrema, make_scenario, mean_amplitude, savgol_smooth, simulate

out = Path("demo_output")
out.mkdir(exist_ok=True)

segment = simulate(make_scenario(ActivityLabel.FALLING, seed=3))
raw = mean_amplitude(segment)
smooth = savgol_smooth(raw, window=31, poly_order=3)

# A single extremum stands far above the rest.
extrema = detect_extrema(smooth, prominence_threshold=0.0)
top = sorted(extrema, key=lambda e: e.prominence, reverse=True)[:3]
for e in top:
    print(f"{e.kind:6s} at t={e.index / smooth.sample_rate:.2f}s prominence={e.prominence:.2f}")

fig, ax = plt.subplots(figsize=(10, 4))
ax.plot(raw.times, raw.values, alpha=0.4, label="mean amplitude")
ax.plot(smooth.times, smooth.values, label="smoothed")
ax.plot([e.index / smooth.sample_rate for e in top], [e.value for e in top], "o")
ax.legend()
fig.savefig(out / "smoothing.png")
