"""Core types for the three-level biexciton/exciton cascade.

State order everywhere is (G, X, XX). Times are in picoseconds and rates
in 1/ps; frequencies are only converted to GHz at reporting boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

G, X, XX = 0, 1, 2
STATE_NAMES = ("G", "X", "XX")

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Populations:
    """Occupation probabilities of the ground, exciton and biexciton states."""

    g: float
    x: float
    xx: float

    def __post_init__(self):
        for name in ("g", "x", "xx"):
            v = getattr(self, name)
            if not (-_SUM_TOL <= v <= 1 + _SUM_TOL):
                raise ValueError(f"population {name}={v!r} outside [0, 1]")
        total = self.g + self.x + self.xx
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"populations sum to {total!r}, expected 1")

    @classmethod
    def from_array(cls, arr) -> "Populations":
        arr = np.asarray(arr, dtype=float)
        # clamp round-off only; anything larger is left to __post_init__ to reject
        arr = np.where(np.abs(arr) < _SUM_TOL, 0.0, arr)
        return cls(float(arr[G]), float(arr[X]), float(arr[XX]))

    def as_array(self) -> np.ndarray:
        return np.array([self.g, self.x, self.xx], dtype=float)

    @classmethod
    def ground(cls) -> "Populations":
        return cls(1.0, 0.0, 0.0)

    @classmethod
    def biexciton(cls) -> "Populations":
        return cls(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class DeviceParams:
    """Quantum-dot parameters.

    ``f0`` and ``t_coh`` set the intrinsic pair fidelity and its decay with
    emission delay. ``fss_omega`` is the exciton fine-structure precession
    (rad/ps). ``tunnel_rate`` is a non-radiative escape applied to both
    X -> G and XX -> X.

    The defaults for ``t_coh`` and ``fss_omega`` are illustrative, not fitted.
    """

    tau_xx: float = 300.0
    tau_x: float = 500.0
    fss_omega: float = 0.0
    f0: float = 1.0
    t_coh: float = 2000.0
    tunnel_rate: float = 0.0

    def __post_init__(self):
        if not (self.tau_xx > 0 and self.tau_x > 0):
            raise ValueError("radiative lifetimes must be positive")
        if not self.t_coh > 0:
            raise ValueError("t_coh must be positive")
        if not (0.25 <= self.f0 <= 1.0):
            raise ValueError("f0 must lie in [0.25, 1]")
        if self.tunnel_rate < 0:
            raise ValueError("tunnel_rate must be non-negative")
        if not math.isfinite(self.fss_omega):
            raise ValueError("fss_omega must be finite")

    @property
    def a(self) -> float:
        """Biexciton radiative rate 1/tau_xx."""
        return 1.0 / self.tau_xx

    @property
    def b(self) -> float:
        """Exciton radiative rate 1/tau_x."""
        return 1.0 / self.tau_x

    def scaled(self, k: float) -> "DeviceParams":
        """Return a copy with every time constant multiplied by ``k``."""
        return DeviceParams(
            tau_xx=self.tau_xx * k,
            tau_x=self.tau_x * k,
            fss_omega=self.fss_omega / k,
            f0=self.f0,
            t_coh=self.t_coh * k,
            tunnel_rate=self.tunnel_rate / k,
        )


@dataclass(frozen=True)
class DriveWaveform:
    """Rectangular pulse train on top of a constant pump floor.

    A pure-DC drive has ``pulse_rate == 0``; its ``period`` then only fixes
    the analysis frame.
    """

    dc_rate: float = 0.0
    pulse_rate: float = 0.0
    pulse_width: float = 0.0
    period: float = 800.0
    phase: float = 0.0

    def __post_init__(self):
        if self.dc_rate < 0 or self.pulse_rate < 0:
            raise ValueError("pump rates must be non-negative")
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError("period must be positive and finite")
        if not (0 <= self.pulse_width <= self.period):
            raise ValueError("pulse_width must lie in [0, period]")
        if not (0 <= self.phase < self.period):
            raise ValueError("phase must lie in [0, period)")

    @classmethod
    def dc(cls, rate: float, period: float = 800.0) -> "DriveWaveform":
        return cls(dc_rate=rate, period=period)

    @classmethod
    def pulsed(cls, frequency_ghz: float, pulse_width: float = 50.0,
               pulse_rate: float = 0.2, dc_rate: float = 0.0,
               phase: float = 0.0) -> "DriveWaveform":
        """Pulse train at ``frequency_ghz`` with the pulse at the cycle start."""
        return cls(dc_rate=dc_rate, pulse_rate=pulse_rate, pulse_width=pulse_width,
                   period=1000.0 / frequency_ghz, phase=phase)

    @property
    def is_dc(self) -> bool:
        return self.pulse_rate == 0 or self.pulse_width == 0

    @property
    def frequency_ghz(self) -> float:
        return 1000.0 / self.period

    @property
    def mean_rate(self) -> float:
        return self.dc_rate + self.pulse_rate * self.pulse_width / self.period

    def segments(self) -> list[tuple[float, float]]:
        """Constant-pump pieces of one period starting at t = 0.

        Returns ``(duration, pump)`` pairs whose durations sum to ``period``.
        """
        if self.is_dc:
            return [(self.period, self.dc_rate)]
        hi = self.dc_rate + self.pulse_rate
        lo = self.dc_rate
        start, end = self.phase, self.phase + self.pulse_width
        out = []
        if end <= self.period:
            pieces = [(0.0, start, lo), (start, end, hi), (end, self.period, lo)]
        else:
            wrap = end - self.period
            pieces = [(0.0, wrap, hi), (wrap, start, lo), (start, self.period, hi)]
        for s, e, p in pieces:
            if e > s:
                out.append((e - s, p))
        return out


def pump_rate_at(w: DriveWaveform, t):
    """Pump rate at time(s) ``t``; pulses occupy ``[phase, phase + width)`` mod period."""
    u = np.mod(np.asarray(t, dtype=float) - w.phase, w.period)
    on = (u < w.pulse_width) & (w.pulse_rate > 0)
    r = np.where(on, w.dc_rate + w.pulse_rate, w.dc_rate)
    return float(r) if np.ndim(r) == 0 else r


def pump_integral(w: DriveWaveform, t):
    """Antiderivative of the pump rate, zero at the first pulse start.

    Only differences are meaningful: ``pump_integral(w, t2) - pump_integral(w, t1)``
    is the integrated pump over ``[t1, t2]``.
    """
    u = np.asarray(t, dtype=float) - w.phase
    k = np.floor(u / w.period)
    r = u - k * w.period
    on_time = k * w.pulse_width + np.minimum(r, w.pulse_width)
    out = w.dc_rate * u + w.pulse_rate * on_time
    return float(out) if np.ndim(out) == 0 else out


def generator(params: DeviceParams, p: float) -> np.ndarray:
    """Rate matrix M with dP/dt = M @ P for pump rate ``p``.

    The pump climbs the ladder G -> X -> XX. Radiative decay runs
    XX -> X (rate 1/tau_xx) and X -> G (rate 1/tau_x). ``tunnel_rate`` adds
    non-radiative X -> G and XX -> X escape. Columns sum to zero.
    """
    if p < 0:
        raise ValueError(f"pump rate must be non-negative, got {p!r}")
    a, b, t = params.a, params.b, params.tunnel_rate
    m = np.zeros((3, 3))
    m[X, G] = p
    m[G, X] = b + t
    m[XX, X] = p
    m[X, XX] = a + t
    # diagonal written as negative column sums keeps the generator property exact
    for j in range(3):
        m[j, j] = -(m[:, j].sum() - m[j, j])
    return m
