"""
Static and dynamic paths in the IQ plane
========================================

A person moving near a Wi-Fi link adds a reflected vector to the static
channel.  As the reflected path length grows by one wavelength, that vector
turns once, and the amplitude swings between ``|Hs| - |Hd|`` and
``|Hs| + |Hd|``.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from csisense import ActivityLabel, LinearPath, ScenarioParams, make_scenario, simulate
from csisense.core import DEFAULT_WAVELENGTH

out = Path("demo_output")
out.mkdir(exist_ok=True)

# Five wavelengths of path change over five seconds, without noise.
lam = DEFAULT_WAVELENGTH
params = ScenarioParams(LinearPath(3.0, 5 * lam / 5.0), noise_sigma=0.0)
segment = simulate(params)
h = segment.csi[:, 0]
print("amplitude range:", np.abs(h).min().round(3), "to", np.abs(h).max().round(3))
print("bounds:", params.amplitude_bounds())

fig, (iq, amp) = plt.subplots(1, 2, figsize=(10, 4))
iq.plot(h.real, h.imag)
iq.set_aspect("equal")
iq.set_title("IQ plane")
amp.plot(segment.timestamps, np.abs(h))
amp.set_title("amplitude: five cycles")
fig.savefig(out / "channel_model.png")

# The scenario generator draws seeded parameters with each activity's signature.
for label in ActivityLabel:
    p = make_scenario(label, seed=1)
    print(f"{label.value:9s}", type(p.path_trajectory).__name__,
          f"attenuation={p.dynamic_attenuation:.2f}")
