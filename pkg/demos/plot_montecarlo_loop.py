"""
Closed loop: simulate time tags, analyse, compare with the model
=================================================================

Monte Carlo photons for the three analyzer bases go through the same
correlation analysis used on measured data.
"""

import numpy as np

from qdcascade import (
    DeviceParams, DriveWaveform, cycle_fidelity, cumulative_pairs, polarization_maps,
    qber_from_fidelity, simulate_basis_streams,
)
from qdcascade.metrics import model_cycle_fidelity, pairs_per_cycle
from qdcascade.optimize import optimal_clock_rate, optimal_dc_pump

dot = DeviceParams(f0=0.96, t_coh=1500.0)
ar = DriveWaveform.pulsed(optimal_clock_rate(dot)[0])
dc = DriveWaveform.dc(optimal_dc_pump(dot)[0], ar.period)

n_cycles = 300_000
maps = {}
for name, w, seed in (("AR", ar, 1), ("DC", dc, 2)):
    streams = simulate_basis_streams(dot, w, n_cycles * w.period, seed=seed)
    maps[name] = polarization_maps({b: s[0] for b, s in streams.items()}, w.period, 16.0, 5)
    f, err = cycle_fidelity(maps[name], 0)
    print(f"{name}: same-cycle fidelity {f:.4f} +- {err:.4f} (model {model_cycle_fidelity(dot, w):.4f})")
    q, secure = qber_from_fidelity(f)
    print(f"    QBER {q:.4f}, secure: {secure}")
    print("    other cycles: " + " ".join(f"{cycle_fidelity(maps[name], n)[0]:.3f}" for n in (1, 2, 3)))

cp = cumulative_pairs(maps["AR"], maps["DC"])
ref = (pairs_per_cycle(dot, ar, "within", "visibility")
       / pairs_per_cycle(dot, dc, "within", "visibility"))
print(f"entangled pairs per cycle AR/DC: {cp.ratio:.3f} +- {cp.ratio_stderr:.3f}, model {ref:.3f}")
