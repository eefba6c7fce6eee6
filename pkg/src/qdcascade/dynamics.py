"""Exact propagation of the cascade populations under piecewise-constant pumping."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .model import DeviceParams, DriveWaveform, Populations, generator, pump_rate_at

# relative eigenvalue gap below which the eigendecomposition is not trusted
_DEGENERATE_GAP = 1e-7
_MAX_COND = 1e8


class Propagator:
    """exp(M t) for a fixed generator, evaluated for many t at once."""

    def __init__(self, m: np.ndarray):
        self.m = np.asarray(m, dtype=float)
        self._eig = None
        lam, vec = np.linalg.eig(self.m)
        if np.max(np.abs(lam.imag)) < 1e-14 * max(1.0, np.max(np.abs(lam.real))):
            lam = lam.real
            vec = vec.real
            scale = max(np.max(np.abs(lam)), 1e-300)
            gaps = np.abs(lam[:, None] - lam[None, :]) + np.eye(3) * scale
            if gaps.min() > _DEGENERATE_GAP * scale and np.linalg.cond(vec) < _MAX_COND:
                self._eig = (lam, vec, np.linalg.inv(vec))

    def matrix(self, dt: float) -> np.ndarray:
        if self._eig is None:
            return scipy.linalg.expm(self.m * dt)
        lam, v, vinv = self._eig
        return (v * np.exp(lam * dt)) @ vinv

    def apply(self, p0, dts) -> np.ndarray:
        """Return exp(M dt) @ p0 for every dt, shape ``(len(dts), 3)``."""
        dts = np.atleast_1d(np.asarray(dts, dtype=float))
        p0 = np.asarray(p0, dtype=float)
        if self._eig is None:
            mats = scipy.linalg.expm(self.m[None, :, :] * dts[:, None, None])
            return mats @ p0
        lam, v, vinv = self._eig
        c = vinv @ p0
        return (np.exp(np.outer(dts, lam)) * c) @ v.T


@lru_cache(maxsize=4096)
def _propagator(params: DeviceParams, p: float) -> Propagator:
    return Propagator(generator(params, p))


def _as_array(p0) -> np.ndarray:
    if isinstance(p0, Populations):
        return p0.as_array()
    return np.asarray(p0, dtype=float)


def propagate(p0, m: np.ndarray, dt: float) -> Populations:
    """Advance populations by ``dt`` under the constant generator ``m``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    v = _as_array(p0)
    if dt == 0:
        return Populations.from_array(v)
    return Populations.from_array(Propagator(m).apply(v, [dt])[0])


def segments_between(w: DriveWaveform, t0: float, t1: float) -> list[tuple[float, float, float]]:
    """Constant-pump segments ``(start, end, pump)`` tiling ``[t0, t1]``."""
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    pieces = w.segments()
    k = np.floor(t0 / w.period)
    base = k * w.period
    out = []
    while base < t1:
        s = base
        for dur, p in pieces:
            e = s + dur
            lo, hi = max(s, t0), min(e, t1)
            if hi > lo:
                out.append((lo, hi, p))
            s = e
        k += 1
        base = k * w.period
    if not out:
        out.append((t0, t1, float(pump_rate_at(w, t0))))
    return out


def populations_at(params: DeviceParams, w: DriveWaveform, p0, t0: float, times) -> np.ndarray:
    """Populations at each of ``times`` (all >= t0) evolved from ``p0`` at ``t0``.

    Returns an array of shape ``(len(times), 3)``.
    """
    times = np.asarray(times, dtype=float)
    order = np.argsort(times, kind="stable")
    ts = times[order]
    if ts.size and ts[0] < t0:
        raise ValueError("requested times precede the start time")
    out = np.empty((ts.size, 3))
    state = _as_array(p0).copy()
    t_end = ts[-1] if ts.size else t0
    i = 0
    for s, e, p in segments_between(w, t0, t_end):
        prop = _propagator(params, p)
        j = np.searchsorted(ts, e, side="right")
        if j > i:
            out[i:j] = prop.apply(state, ts[i:j] - s)
            i = j
        state = prop.apply(state, [e - s])[0]
    out[i:] = state
    result = np.empty_like(out)
    result[order] = out
    return result


def period_map(params: DeviceParams, w: DriveWaveform) -> np.ndarray:
    """One-period propagator starting at t = 0 (composition of segment exponentials)."""
    phi = np.eye(3)
    for dur, p in w.segments():
        phi = _propagator(params, p).matrix(dur) @ phi
    return phi


def dc_steady_state(params: DeviceParams, p: float) -> Populations:
    """Equilibrium populations under constant pump ``p`` (closed form)."""
    if p < 0:
        raise ValueError("pump rate must be non-negative")
    a = params.a + params.tunnel_rate
    b = params.b + params.tunnel_rate
    if p == 0:
        return Populations.ground()
    if np.isinf(p):
        return Populations.biexciton()
    px = 1.0 / (b / p + 1.0 + p / a)
    pxx = (p / a) * px
    pg = 1.0 - px - pxx
    return Populations.from_array([max(pg, 0.0), px, pxx])


def periodic_steady_state(params: DeviceParams, w: DriveWaveform) -> Populations:
    """Cycle-stationary populations at t = 0 (fixed point of the period map)."""
    phi = period_map(params, w)
    # (phi - I) v = 0 with sum(v) = 1: replace one row by the normalisation
    a = phi - np.eye(3)
    a[0, :] = 1.0
    rhs = np.array([1.0, 0.0, 0.0])
    try:
        v = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        v = _power_iterate(phi)
    if np.max(np.abs(phi @ v - v)) > 1e-10 or np.any(v < -1e-12):
        v = _power_iterate(phi, v)
    v = np.clip(v, 0.0, None)
    return Populations.from_array(v / v.sum())


def _power_iterate(phi, v=None, tol=1e-14, max_iter=1_000_000):
    v = np.full(3, 1 / 3) if v is None else np.clip(v, 0, None) / np.clip(v, 0, None).sum()
    # squaring accelerates contraction on slowly mixing maps
    mat = phi.copy()
    for _ in range(60):
        nxt = mat @ v
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - v)) < tol:
            return nxt
        v = nxt
        mat = mat @ mat
    for _ in range(max_iter):
        nxt = phi @ v
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - v)) < tol:
            return nxt
        v = nxt
    return v


@dataclass(frozen=True)
class Trajectory:
    """Sampled populations; ``states`` has shape ``(len(times), 3)`` in (G, X, XX) order."""

    times: np.ndarray
    states: np.ndarray
    waveform: DriveWaveform

    def __post_init__(self):
        if self.times.ndim != 1 or self.states.shape != (self.times.size, 3):
            raise ValueError("times/states shape mismatch")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return self.times.size

    @property
    def g(self):
        return self.states[:, 0]

    @property
    def x(self):
        return self.states[:, 1]

    @property
    def xx(self):
        return self.states[:, 2]

    def populations(self) -> list[Populations]:
        return [Populations.from_array(s) for s in self.states]


def evolve_cycles(params: DeviceParams, w: DriveWaveform, p0, n_cycles: int = 1,
                  samples_per_cycle: int = 200) -> Trajectory:
    """Evolve ``p0`` from t = 0 over ``n_cycles`` periods.

    Samples on a uniform grid plus every pulse edge, so the rectangular
    pump shape shows up exactly in the output.
    """
    if n_cycles < 1 or samples_per_cycle < 2:
        raise ValueError("need n_cycles >= 1 and samples_per_cycle >= 2")
    t_end = n_cycles * w.period
    grid = np.linspace(0.0, t_end, n_cycles * samples_per_cycle + 1)
    edges = [s for s, _, _ in segments_between(w, 0.0, t_end)] + [t_end]
    times = np.unique(np.concatenate([grid, edges]))
    return Trajectory(times, populations_at(params, w, p0, 0.0, times), w)
