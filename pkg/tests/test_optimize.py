import math

import numpy as np
import pytest
from scipy import optimize as sopt

from qdcascade.metrics import dc_pair_rate, ideal_reset_pairs_per_cycle, pair_rate
from qdcascade.model import DeviceParams, DriveWaveform
from qdcascade.optimize import (
    OptimizationError, golden_section_max, ideal_reset_band, optimal_clock_rate, optimal_dc_pump,
    superequilibrium_band, _scan_and_refine,
)


def test_golden_section_on_parabola():
    x, fx = golden_section_max(lambda x: -(x - 1.234) ** 2, 0.0, 3.0, 1e-9)
    assert x == pytest.approx(1.234, abs=1e-8)
    assert fx == pytest.approx(0.0, abs=1e-15)


def test_scan_boundary_raises():
    with pytest.raises(OptimizationError):
        _scan_and_refine(lambda x: x, 1.0, 10.0, 20, 1e-6)


def test_optimal_dc_pump_dense_scan(canon):
    grid = np.linspace(1e-3, 1e-2, 90001)
    vals = np.array([dc_pair_rate(canon, p) for p in grid])
    i = int(np.argmax(vals))
    p, r = optimal_dc_pump(canon)
    assert p == pytest.approx(grid[i], abs=2e-7)
    assert r == pytest.approx(vals[i], rel=1e-9)
    assert p == pytest.approx(4.3e-3, abs=2e-4)
    assert r == pytest.approx(0.496, abs=1e-3)


def test_optimal_dc_pump_scales_with_lifetimes(canon):
    p1, r1 = optimal_dc_pump(canon)
    p2, r2 = optimal_dc_pump(canon.scaled(2.0))
    assert p2 == pytest.approx(p1 / 2, rel=1e-5)
    assert r2 == pytest.approx(r1 / 2, rel=1e-9)


def test_optimal_clock_rate_dense_scan(canon):
    make = lambda f: DriveWaveform.pulsed(f, pulse_width=50, pulse_rate=0.2)  # noqa: E731
    grid = np.linspace(1.0, 1.7, 701)
    vals = np.array([pair_rate(canon, make(f)) for f in grid])
    f, r = optimal_clock_rate(canon)
    assert f == pytest.approx(grid[int(np.argmax(vals))], abs=2e-3)
    assert r >= vals.max() - 1e-12


def test_band_edges_are_crossings(canon):
    band = superequilibrium_band(canon)
    assert not band.empty
    make = lambda f: DriveWaveform.pulsed(f, pulse_width=50, pulse_rate=0.2)  # noqa: E731
    for f in (band.f_low, band.f_high):
        slope = (pair_rate(canon, make(f + 1e-3)) - pair_rate(canon, make(f - 1e-3))) / 2e-3
        assert abs(pair_rate(canon, make(f)) - band.dc_optimal_rate) <= abs(slope) * 1e-4
    assert band.f_low < band.f_optimal < band.f_high
    assert band.enhancement == pytest.approx(band.rate_at_optimal / band.dc_optimal_rate - 1)


def test_band_result_serialisable(canon):
    import json
    json.dumps(superequilibrium_band(canon).to_dict())


def test_ideal_reset_band_root_finding(canon):
    _, r_dc = optimal_dc_pump(canon)
    g = lambda f: ideal_reset_pairs_per_cycle(canon, 1000 / f) * f - r_dc  # noqa: E731
    f_low = sopt.brentq(g, 0.2, 1.4)
    f_high = sopt.brentq(g, 1.5, 20.0)
    res = ideal_reset_band(canon, r_dc)
    assert res["f_low"] == pytest.approx(f_low, abs=2e-4)
    assert res["f_high"] == pytest.approx(f_high, abs=2e-4)
    assert res["f_low"] == pytest.approx(0.50, rel=0.1)
    assert res["f_high"] == pytest.approx(4.6, rel=0.05)
    assert res["f_optimal"] == pytest.approx(1.5, rel=0.05)


def test_weak_pulses_give_empty_band(canon):
    band = superequilibrium_band(canon, pulse_width=50, pulse_rate=0.002)
    assert band.empty
    assert math.isnan(band.f_low) and math.isnan(band.f_high)
    assert band.enhancement < 0


def test_pulse_longer_than_period_rejected(canon):
    with pytest.raises(ValueError):
        optimal_clock_rate(canon, pulse_width=200.0)


def test_band_result_validation():
    from qdcascade.optimize import BandResult
    with pytest.raises(ValueError):
        BandResult(2.0, 1.0, 1.5, 1.0, 0.5, 1.0)
