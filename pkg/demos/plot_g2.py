"""
Autocorrelation of an exciton photon stream
===========================================

Integrated g2 peaks from simulated detections, with and without an added
Poisson background.
"""

import numpy as np

from qdcascade import DeviceParams, DriveWaveform, g2_auto, simulate_basis_streams
from qdcascade.timetags import make_tags

dot = DeviceParams()
w = DriveWaveform.pulsed(1.27)
tags = simulate_basis_streams(dot, w, 200_000 * w.period, seed=4, bases=("rect",))["rect"][0]

h = g2_auto(tags, [2, 3], w.period)
print(f"exciton g2(0) = {h.center:.3f} +- {h.center_stderr:.3f}")
print("peaks n=-3..3:", np.round(h.peak_areas[np.abs(h.offsets) <= 3], 3))

# add a background making up 15 % of all exciton counts
x = tags[tags["channel"] >= 2]
rng = np.random.default_rng(0)
n_bg = rng.poisson(x.size * 0.15 / 0.85)
bg = make_tags(np.full(n_bg, 2), np.sort(rng.uniform(0, 200_000 * w.period, n_bg)))
mixed = np.sort(np.concatenate([x, bg]), order="timestamp")
print(f"with background g2(0) = {g2_auto(mixed, [2, 3], w.period).center:.3f}")
