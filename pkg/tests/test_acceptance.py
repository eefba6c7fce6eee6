"""Acceptance criteria, one test each. A PASS/FAIL line per criterion is
printed in the terminal summary (or directly when run as a script)."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_setup, rk4
from qdcascade.analyzer import (
    cumulative_pairs, cycle_fidelity, g2_auto, polarization_maps, qber_from_fidelity,
)
from qdcascade.dynamics import period_map, periodic_steady_state, populations_at
from qdcascade.metrics import cascade_photon_fraction, cycle_populations, pairs_per_cycle
from qdcascade.model import DeviceParams, DriveWaveform
from qdcascade.montecarlo import simulate_basis_streams, simulate_emissions, werner_pair_stream
from qdcascade.optimize import optimal_dc_pump, superequilibrium_band

CANON = DeviceParams(tau_xx=300.0, tau_x=500.0)
T_FIXED = 1000.0


def report(n, ok, detail, elapsed, budget):
    in_time = elapsed < budget
    status = "PASS" if ok and in_time else "FAIL"
    ACCEPTANCE_LINES[n] = f"{status} criterion {n:2d}: {detail} [{elapsed:.2f} s / {budget:g} s]"
    print(ACCEPTANCE_LINES[n])
    assert ok, detail
    assert in_time, f"took {elapsed:.1f} s, budget {budget} s"


@pytest.fixture(scope="module")
def band():
    t0 = time.perf_counter()
    b = superequilibrium_band(CANON, pulse_width=50.0, pulse_rate=0.2)
    return b, time.perf_counter() - t0


def batch_sigma(values, n_batches=50):
    means = np.array([v.mean() for v in np.array_split(values, n_batches)])
    return means.std(ddof=1) / np.sqrt(n_batches)


def test_criterion_01_cascade_fraction():
    t0 = time.perf_counter()
    p, _ = optimal_dc_pump(CANON)
    frac = cascade_photon_fraction(CANON, p)
    el = time.perf_counter() - t0
    report(1, abs(frac - 0.43) <= 0.02, f"cascade photon fraction {frac:.4f} at p*={p:.5f}/ps "
           "(target 0.43 +- 0.02)", el, 1)


def test_criterion_02_optimal_clock(band):
    b, el = band
    report(2, 1.0 <= b.f_optimal <= 1.7, f"optimal clock {b.f_optimal:.4f} GHz (target [1.0, 1.7])",
           el, 10)


def test_criterion_03_enhancement(band):
    b, el = band
    report(3, 0.30 <= b.enhancement <= 0.60,
           f"enhancement {b.enhancement:.4f} (AR {b.rate_at_optimal:.4f} vs DC "
           f"{b.dc_optimal_rate:.4f} pairs/ns; target [0.30, 0.60])", el, 10)


def test_criterion_04_band_edges(band):
    b, el = band
    ideal = b.metadata["ideal_reset"]
    ok_low = abs(b.f_low - 0.52) <= 0.2 * 0.52
    ok_high = 3.07 / 2 <= b.f_high <= 3.07 * 2
    report(4, ok_low and ok_high and not b.empty,
           f"band [{b.f_low:.4f}, {b.f_high:.4f}] GHz (low 0.52 +- 20%, high within x2 of 3.07); "
           f"ideal reset [{ideal['f_low']:.4f}, {ideal['f_high']:.4f}] GHz", el, 30)


def test_criterion_05_pairs_per_cycle(band):
    b, el0 = band
    t0 = time.perf_counter()
    slow = pairs_per_cycle(CANON, DriveWaveform.pulsed(0.25))
    opt = pairs_per_cycle(CANON, DriveWaveform.pulsed(b.f_optimal))
    el = time.perf_counter() - t0
    report(5, slow >= 0.95 and abs(opt - 0.56) <= 0.08,
           f"pairs/cycle {slow:.4f} at 250 MHz (>= 0.95), {opt:.4f} at optimum (0.56 +- 0.08)",
           el, 5)


def test_criterion_06_ground_population(band):
    b, _ = band
    t0 = time.perf_counter()
    w = DriveWaveform.pulsed(b.f_optimal)
    g_max = cycle_populations(CANON, w, np.linspace(0, w.period, 4001))[:, 0].max()
    el = time.perf_counter() - t0
    report(6, g_max <= 0.60, f"max ground population {g_max:.4f} over the cycle (<= 0.60)", el, 1)


def test_criterion_07_monte_carlo_pair_rate(band):
    b, _ = band
    t0 = time.perf_counter()
    n_cycles = 2_000_000
    lines, ok = [], True
    p_dc, _ = optimal_dc_pump(CANON)
    w_ar = DriveWaveform.pulsed(b.f_optimal)
    for label, w in (("AR", w_ar), ("DC", DriveWaveform.dc(p_dc, w_ar.period))):
        em = simulate_emissions(CANON, w, n_cycles * w.period, seed=2024)
        xx_t, _ = em.linked_pairs()
        per_cycle = np.bincount((xx_t // w.period).astype(np.int64), minlength=n_cycles)[:n_cycles]
        mc = per_cycle.mean()
        sigma = batch_sigma(per_cycle)
        ref = pairs_per_cycle(CANON, w)
        z = (mc - ref) / sigma
        ok &= abs(z) < 3
        lines.append(f"{label} {mc:.5f} vs {ref:.5f} ({z:+.2f} sigma)")
    el = time.perf_counter() - t0
    report(7, ok, f"MC linked pairs/cycle over {n_cycles:.0e} cycles: " + "; ".join(lines), el, 300)


def test_criterion_08_closed_loop_fidelity():
    t0 = time.perf_counter()
    streams = {b: werner_pair_stream(1_000_000, T_FIXED, 0.795, b, seed=77, stream=i)
               for i, b in enumerate(("rect", "diag", "circ"))}
    maps = polarization_maps(streams, T_FIXED, bin_width=50.0, n_cycles_span=1)
    f, err = cycle_fidelity(maps, 0)
    q, secure = qber_from_fidelity(f)
    el = time.perf_counter() - t0
    report(8, abs(f - 0.795) <= 0.01 and abs(q - 0.1367) <= 0.005 and secure,
           f"recovered fidelity {f:.4f} +- {err:.4f} (0.795 +- 0.01), QBER {q:.4f} "
           f"(0.1367 +- 0.005), secure={secure}", el, 300)


def test_criterion_09_cross_cycle_fidelity(band):
    b, _ = band
    t0 = time.perf_counter()
    w = DriveWaveform.pulsed(b.f_optimal)
    streams = simulate_basis_streams(CANON, w, 1_000_000 * w.period, seed=99)
    maps = polarization_maps({k: v[0] for k, v in streams.items()}, w.period, 16.0, 5)
    vals = {n: cycle_fidelity(maps, n) for n in (-5, -4, -3, -2, -1, 1, 2, 3, 4, 5)}
    ok = all(abs(f - 0.25) <= 0.01 for f, _ in vals.values())
    el = time.perf_counter() - t0
    txt = ", ".join(f"{n:+d}:{f:.4f}" for n, (f, _) in vals.items())
    report(9, ok, f"cross-cycle fidelity (0.25 +- 0.01): {txt}", el, 300)


def test_criterion_10_g2_pipeline():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    T = T_FIXED
    # Poisson input, coarse bins
    dur = 4e7
    t_p = np.sort(rng.uniform(0, dur, rng.poisson(0.005 * dur)))
    h = g2_auto(t_p, None, T, bin_width=100.0)
    dev = np.abs(h.g2 - 1).max()
    # ideal pulsed single emitter: at most one photon per cycle, emitted soon after the pulse
    n_cyc = 400_000
    cyc = np.nonzero(rng.random(n_cyc) < 0.5)[0]
    sig = cyc * T + 100.0 + rng.exponential(60.0, cyc.size).clip(max=299.0)
    center_ideal = g2_auto(sig, None, T).center
    # background fraction beta of all counts
    beta = 0.15
    bg = np.sort(rng.uniform(0, n_cyc * T, rng.poisson(sig.size * beta / (1 - beta))))
    mix = np.sort(np.concatenate([sig, bg]))
    center_mix = g2_auto(mix, None, T).center
    b_emp = bg.size / mix.size
    el = time.perf_counter() - t0
    ok = dev <= 0.02 and center_ideal <= 0.01 and abs(center_mix - beta * (2 - beta)) <= 0.02
    report(10, ok, f"Poisson max|g2-1| {dev:.4f} (<= 0.02); single emitter g2(0) {center_ideal:.4f} "
           f"(<= 0.01); mixture g2(0) {center_mix:.4f} vs beta(2-beta) {beta * (2 - beta):.4f} "
           f"(empirical beta {b_emp:.4f}; +- 0.02)", el, 120)


def test_criterion_11_numerical_core(tmp_path):
    from qdcascade.cli import main

    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    drift = rk4_err = resid = 0.0
    for _ in range(100):
        params, w, p0 = random_setup(rng)
        phi = period_map(params, w)
        v = p0.copy()
        for _ in range(50):
            nv = phi @ v
            drift = max(drift, abs(nv.sum() - v.sum()))
            v = nv
        ours = populations_at(params, w, p0, 0.0, [2 * w.period])[0]
        rk4_err = max(rk4_err, np.abs(ours - rk4(params, w, p0, 2 * w.period)).max())
        pss = periodic_steady_state(params, w).as_array()
        resid = max(resid, np.abs(phi @ pss - pss).max())
    cfg = tmp_path / "c.yaml"
    cfg.write_text("simulation: {n_cycles: 20000, seed: 5}\nsweep: {n_points: 20}\n")
    snaps = []
    for _ in range(2):
        for cmd in ("populations", "sweep", "optimize", "montecarlo"):
            assert main([cmd, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        snaps.append({f.name: f.read_bytes() for f in sorted((tmp_path / "o").iterdir())})
    same = snaps[0] == snaps[1]
    el = time.perf_counter() - t0
    ok = drift < 1e-9 and rk4_err < 1e-6 and resid < 1e-10 and same
    report(11, ok, f"drift/cycle {drift:.1e} (< 1e-9), RK4 max diff {rk4_err:.1e} (< 1e-6), "
           f"steady-state residual {resid:.1e} (< 1e-10), byte-identical reruns={same}", el, 120)


def test_criterion_12_cumulative_ratio(band):
    b, _ = band
    t0 = time.perf_counter()
    d = DeviceParams(f0=0.96, t_coh=1500.0)
    w_ar = DriveWaveform.pulsed(b.f_optimal)
    p_dc, _ = optimal_dc_pump(d)
    w_dc = DriveWaveform.dc(p_dc, w_ar.period)
    n = 1_000_000
    maps = {}
    for label, w, seed in (("ar", w_ar, 31), ("dc", w_dc, 32)):
        streams = simulate_basis_streams(d, w, n * w.period, seed=seed)
        maps[label] = polarization_maps({k: v[0] for k, v in streams.items()}, w.period, 16.0, 1)
    cp = cumulative_pairs(maps["ar"], maps["dc"])
    ref = (pairs_per_cycle(d, w_ar, "within", "visibility")
           / pairs_per_cycle(d, w_dc, "within", "visibility"))
    z = (cp.ratio - ref) / cp.ratio_stderr
    el = time.perf_counter() - t0
    report(12, abs(z) < 3, f"AR/DC entangled pairs per cycle {cp.ratio:.4f} +- {cp.ratio_stderr:.4f} "
           f"vs analytic {ref:.4f} ({z:+.2f} sigma); measured-device reference 1.21 +- 0.03 "
           "(not a gate)", el, 300)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
