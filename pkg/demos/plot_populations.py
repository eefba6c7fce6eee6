"""
Populations under slow, fast and continuous driving
===================================================

Three drives of the same dot: slow pulses that let the cascade finish,
pulses at the optimal clock rate, and a constant pump at its best level.
"""

import numpy as np

from qdcascade import DeviceParams, DriveWaveform, Populations, evolve_cycles, periodic_steady_state
from qdcascade.optimize import optimal_clock_rate, optimal_dc_pump

dot = DeviceParams(tau_xx=300.0, tau_x=500.0)

# slow clock: start from the ground state, one pulse, then free decay
slow = DriveWaveform.pulsed(0.25)
tr = evolve_cycles(dot, slow, Populations.ground(), n_cycles=1, samples_per_cycle=400)
print(f"250 MHz: XX after the pulse {tr.xx[np.searchsorted(tr.times, 50.0)]:.3f}, "
      f"G at cycle end {tr.g[-1]:.4f}")

# optimal clock: look at the periodic regime, not the first cycle
f_opt, rate = optimal_clock_rate(dot)
fast = DriveWaveform.pulsed(f_opt)
tr = evolve_cycles(dot, fast, periodic_steady_state(dot, fast), n_cycles=3)
print(f"{f_opt:.3f} GHz: G never exceeds {tr.g.max():.3f}, {rate:.3f} pairs/ns")

# constant pump at its optimum for comparison
p_dc, r_dc = optimal_dc_pump(dot)
pop = periodic_steady_state(dot, DriveWaveform.dc(p_dc))
print(f"DC p = {p_dc:.5f}/ps: G={pop.g:.3f} X={pop.x:.3f} XX={pop.xx:.3f}, {r_dc:.3f} pairs/ns")

# a coarse text trace of one fast cycle
for t, g, x, xx in zip(tr.times[::25], tr.g[::25], tr.x[::25], tr.xx[::25]):
    if t > fast.period:
        break
    print(f"  t={t:7.1f} ps  G {'#' * int(40 * g):<40s} XX {xx:.2f}")
