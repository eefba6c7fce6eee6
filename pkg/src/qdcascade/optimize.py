"""Optimal DC pump, optimal active-reset clock rate and the superequilibrium band."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .metrics import dc_pair_rate, ideal_reset_pairs_per_cycle, pair_rate
from .model import DeviceParams, DriveWaveform

INV_PHI = (math.sqrt(5) - 1) / 2

DC_SCAN = (1e-5, 1.0, 200)  # pump range /ps and number of log-spaced points
CLOCK_SCAN = (0.1, 10.0, 120)  # GHz
BAND_TOL_GHZ = 1e-4


class OptimizationError(RuntimeError):
    pass


def golden_section_max(fun, lo, hi, tol):
    """Maximise a unimodal ``fun`` on ``[lo, hi]`` until the bracket is narrower than ``tol``.

    Returns ``(x_best, f_best)``.
    """
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = fun(c), fun(d)
    while hi - lo > tol:
        if fc > fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = fun(d)
    x = 0.5 * (lo + hi)
    fx = fun(x)
    # the midpoint can lose to an interior probe on flat tops
    return max([(x, fx), (c, fc), (d, fd)], key=lambda t: t[1])


def _bisect(fun, lo, hi, tol):
    """Root of ``fun`` in ``[lo, hi]`` given a sign change."""
    flo = fun(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def _scan_and_refine(fun, lo, hi, n, rel_tol):
    """Log-spaced scan of ``fun`` over [lo, hi] then golden refinement in log space."""
    grid = np.geomspace(lo, hi, n)
    vals = np.array([fun(x) for x in grid])
    i = int(np.argmax(vals))
    if i == 0 or i == n - 1:
        raise OptimizationError(
            f"maximum at scan boundary x={grid[i]:.6g} (range [{lo:.3g}, {hi:.3g}], "
            f"values {vals[0]:.4g} .. {vals[-1]:.4g})"
        )
    u_lo, u_hi = math.log(grid[i - 1]), math.log(grid[i + 1])
    u, val = golden_section_max(lambda u: fun(math.exp(u)), u_lo, u_hi, rel_tol)
    return math.exp(u), val, grid, vals


def optimal_dc_pump(params: DeviceParams) -> tuple[float, float]:
    """Pump rate (1/ps) maximising the DC pair rate, and that rate in pairs/ns."""
    lo, hi, n = DC_SCAN
    p, r, _, _ = _scan_and_refine(lambda p: dc_pair_rate(params, p), lo, hi, n, 1e-6)
    return p, r


def _pulse_train(pulse_width, pulse_rate, dc_rate=0.0):
    def make(f_ghz):
        return DriveWaveform.pulsed(f_ghz, pulse_width=pulse_width, pulse_rate=pulse_rate,
                                    dc_rate=dc_rate)
    return make


def _check_pulse(pulse_width, f_max):
    if pulse_width >= 1000.0 / f_max:
        raise ValueError(
            f"pulse_width {pulse_width} ps does not fit in the shortest scanned period "
            f"{1000.0 / f_max:.4g} ps"
        )


def optimal_clock_rate(params: DeviceParams, pulse_width: float = 50.0, pulse_rate: float = 0.2,
                       dc_rate: float = 0.0) -> tuple[float, float]:
    """Clock rate (GHz) maximising the pulsed pair rate, and that rate in pairs/ns."""
    f_lo, f_hi, n = CLOCK_SCAN
    _check_pulse(pulse_width, f_hi)
    make = _pulse_train(pulse_width, pulse_rate, dc_rate)
    f, r, _, _ = _scan_and_refine(lambda f: pair_rate(params, make(f)), f_lo, f_hi, n, 1e-7)
    return f, r


@dataclass(frozen=True)
class BandResult:
    """Frequencies (GHz) where pulsed driving beats the best DC pair rate (pairs/ns)."""

    f_low: float
    f_high: float
    f_optimal: float
    rate_at_optimal: float
    dc_optimal_rate: float
    enhancement: float
    empty: bool = False
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.empty:
            if not (self.f_low < self.f_optimal < self.f_high):
                raise ValueError("band edges must bracket the optimum")
            if self.enhancement < 0:
                raise ValueError("non-empty band requires a positive enhancement")

    def to_dict(self):
        return asdict(self)


def superequilibrium_band(params: DeviceParams, pulse_width: float = 50.0,
                          pulse_rate: float = 0.2, dc_rate: float = 0.0) -> BandResult:
    """Locate both crossings of the pulsed pair rate with the optimal DC rate.

    Pulsed driving that never beats DC yields ``empty=True`` rather than an error.
    """
    f_lo, f_hi, n = CLOCK_SCAN
    _check_pulse(pulse_width, f_hi)
    p_dc, r_dc = optimal_dc_pump(params)
    make = _pulse_train(pulse_width, pulse_rate, dc_rate)

    def rate(f):
        return pair_rate(params, make(f))

    meta = {
        "clock_scan_ghz": [f_lo, f_hi, n],
        "dc_scan_per_ps": list(DC_SCAN),
        "bisection_tol_ghz": BAND_TOL_GHZ,
        "optimal_dc_pump_per_ps": p_dc,
        "pulse_width_ps": pulse_width,
        "pulse_rate_per_ps": pulse_rate,
        "dc_rate_per_ps": dc_rate,
        "ideal_reset": ideal_reset_band(params, r_dc),
    }
    try:
        f_opt, r_opt, grid, vals = _scan_and_refine(rate, f_lo, f_hi, n, 1e-7)
    except OptimizationError:
        grid = np.geomspace(f_lo, f_hi, n)
        vals = np.array([rate(f) for f in grid])
        i = int(np.argmax(vals))
        f_opt, r_opt = float(grid[i]), float(vals[i])
    if r_opt <= r_dc:
        return BandResult(math.nan, math.nan, f_opt, r_opt, r_dc, r_opt / r_dc - 1,
                          empty=True, metadata=meta)

    excess = lambda f: rate(f) - r_dc  # noqa: E731
    below = np.nonzero((grid < f_opt) & (vals < r_dc))[0]
    above = np.nonzero((grid > f_opt) & (vals < r_dc))[0]
    f_low = _bisect(excess, grid[below[-1]], f_opt, BAND_TOL_GHZ) if below.size else math.nan
    f_high = _bisect(excess, f_opt, grid[above[0]], BAND_TOL_GHZ) if above.size else math.nan
    meta["open_low_edge"] = not below.size
    meta["open_high_edge"] = not above.size
    return BandResult(
        f_low=f_low if below.size else f_lo,
        f_high=f_high if above.size else f_hi,
        f_optimal=f_opt,
        rate_at_optimal=r_opt,
        dc_optimal_rate=r_dc,
        enhancement=r_opt / r_dc - 1,
        metadata=meta,
    )


def ideal_reset_band(params: DeviceParams, dc_rate_ns: float | None = None) -> dict:
    """Band and optimum for an instantaneous, complete reset (upper bound on any pulse shape)."""
    if dc_rate_ns is None:
        dc_rate_ns = optimal_dc_pump(params)[1]
    f_lo, f_hi, n = CLOCK_SCAN
    # the ideal-reset rate keeps rising to f_hi only for pathological params; scan wider
    f_hi = 10 * f_hi

    def rate(f):
        return ideal_reset_pairs_per_cycle(params, 1000.0 / f) * f

    f_opt, r_opt, grid, vals = _scan_and_refine(rate, f_lo, f_hi, 2 * n, 1e-7)
    excess = lambda f: rate(f) - dc_rate_ns  # noqa: E731
    out = {"f_optimal": f_opt, "rate_at_optimal": r_opt,
           "enhancement": r_opt / dc_rate_ns - 1,
           "pairs_per_cycle_at_optimal": ideal_reset_pairs_per_cycle(params, 1000.0 / f_opt)}
    below = np.nonzero((grid < f_opt) & (vals < dc_rate_ns))[0]
    above = np.nonzero((grid > f_opt) & (vals < dc_rate_ns))[0]
    if r_opt > dc_rate_ns and below.size and above.size:
        out["f_low"] = _bisect(excess, grid[below[-1]], f_opt, BAND_TOL_GHZ)
        out["f_high"] = _bisect(excess, f_opt, grid[above[0]], BAND_TOL_GHZ)
    return out
