"""Entangled-pair rates and model fidelity for arbitrary drive waveforms.

All densities assume the drive has reached its periodic steady state. The
clock frame is ``[k*period, (k+1)*period)``; a pair belongs to the cycle of
its biexciton photon unless ``attribution="within"`` is requested, in which
case the exciton photon must also land before that cycle ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dynamics import periodic_steady_state, populations_at, dc_steady_state
from .model import DeviceParams, DriveWaveform, G, X, XX, pump_integral

_GL_ORDER = 24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
# max (rate * length) per quadrature panel
_PANEL_STIFFNESS = 4.0

ATTRIBUTIONS = ("t1", "within")


def _check_attribution(attribution):
    if attribution not in ATTRIBUTIONS:
        raise ValueError(f"attribution must be one of {ATTRIBUTIONS}, got {attribution!r}")


@lru_cache(maxsize=1024)
def _cycle_start_state(params: DeviceParams, w: DriveWaveform) -> np.ndarray:
    return periodic_steady_state(params, w).as_array()


def cycle_populations(params: DeviceParams, w: DriveWaveform, t) -> np.ndarray:
    """Periodic-steady-state populations at times ``t`` (any real values)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tm = np.mod(t, w.period)
    return populations_at(params, w, _cycle_start_state(params, w), 0.0, tm)


def _segments_in_cycle(w: DriveWaveform):
    out, s = [], 0.0
    for dur, p in w.segments():
        out.append((s, s + dur, p))
        s += dur
    return out


def _completion_segments(params: DeviceParams, w: DriveWaveform, attribution: str,
                         extra_decay: float = 0.0):
    """Per-segment ``(start, end, k, C_end)`` for the exciton completion probability.

    An exciton present at t emits its radiative photon before any pump or
    tunnel jump with probability C(t), and within a constant-pump segment
    C(t) = b/k (1 - e^{-k(e-t)}) + e^{-k(e-t)} C(e) with k = b + pump + tunnel.
    ``extra_decay`` discounts photons by exp(-extra_decay * delay).
    """
    b = params.b
    segs = _segments_in_cycle(w)

    def sweep(c_end):
        out = []
        c = c_end
        for s, e, p in reversed(segs):
            k = b + p + params.tunnel_rate + extra_decay
            out.append((s, e, k, c))
            decay = np.exp(-k * (e - s))
            c = b / k * (1 - decay) + decay * c
        return out[::-1], c

    if attribution == "within":
        return sweep(0.0)[0]
    # periodic: C(0) = A + B C(T) with C(T) = C(0)
    _, c0_zero = sweep(0.0)
    _, c0_one = sweep(1.0)
    slope = c0_one - c0_zero
    c_periodic = c0_zero / (1.0 - slope)
    return sweep(c_periodic)[0]


def completion_probability(params: DeviceParams, w: DriveWaveform, t, attribution: str = "t1",
                           extra_decay: float = 0.0):
    """Probability that an exciton created at in-cycle time ``t`` emits its photon.

    With ``attribution="within"`` the photon must also precede the end of the
    clock cycle containing ``t``.
    """
    _check_attribution(attribution)
    t = np.mod(np.atleast_1d(np.asarray(t, dtype=float)), w.period)
    out = np.empty_like(t)
    b = params.b
    for s, e, k, c_end in _completion_segments(params, w, attribution, extra_decay):
        m = (t >= s) & (t < e)
        decay = np.exp(-k * (e - t[m]))
        out[m] = b / k * (1 - decay) + decay * c_end
    return out


def survival(params: DeviceParams, w: DriveWaveform, t1, t2):
    """Probability the exciton created at ``t1`` is still undisturbed at ``t2``."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    dt = t2 - t1
    expo = (params.b + params.tunnel_rate) * dt + pump_integral(w, t2) - pump_integral(w, t1)
    return np.exp(-expo)


def cascade_pair_density(params: DeviceParams, w: DriveWaveform, t1, t2):
    """Joint density (1/ps^2) of a biexciton photon at ``t1`` and its own exciton photon at ``t2``."""
    t1a = np.asarray(t1, dtype=float)
    t2a = np.asarray(t2, dtype=float)
    if np.any(t2a < t1a):
        raise ValueError("cascade density requires t2 >= t1")
    t1b, t2b = np.broadcast_arrays(t1a, t2a)
    pxx = cycle_populations(params, w, t1b.ravel())[:, XX].reshape(t1b.shape)
    out = params.a * pxx * survival(params, w, t1b, t2b) * params.b
    return float(out) if out.ndim == 0 else out


def _panels(s, e, stiffness):
    n = max(1, int(np.ceil(stiffness * (e - s) / _PANEL_STIFFNESS)))
    edges = np.linspace(s, e, n + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)).ravel()
    weights = (0.5 * (hi - lo) * _GL_W).ravel()
    return nodes, weights


def _cycle_quadrature(params: DeviceParams, w: DriveWaveform):
    """Gauss-Legendre nodes/weights over one clock cycle, split at pulse edges."""
    nodes, weights = [], []
    for s, e, p in _segments_in_cycle(w):
        stiff = params.a + params.b + 2 * (p + params.tunnel_rate)
        n, wt = _panels(s, e, stiff)
        nodes.append(n)
        weights.append(wt)
    return np.concatenate(nodes), np.concatenate(weights)


def pairs_per_cycle(params: DeviceParams, w: DriveWaveform, attribution: str = "t1",
                    weight: str = "count") -> float:
    """Mean number of completed cascades per clock cycle in the periodic steady state.

    ``weight="visibility"`` counts each pair by its Werner visibility
    (4 f_int - 1)/3 instead of 1, i.e. the entangled content that a
    polarization-contrast measurement sees.
    """
    _check_attribution(attribution)
    if weight == "count":
        scale, extra = 1.0, 0.0
    elif weight == "visibility":
        scale, extra = (4 * params.f0 - 1) / 3, 1.0 / params.t_coh
    else:
        raise ValueError("weight must be 'count' or 'visibility'")
    nodes, weights = _cycle_quadrature(params, w)
    pxx = cycle_populations(params, w, nodes)[:, XX]
    c = completion_probability(params, w, nodes, attribution, extra)
    return float(scale * np.sum(weights * params.a * pxx * c))


def pair_rate(params: DeviceParams, w: DriveWaveform, attribution: str = "t1") -> float:
    """Time-averaged entangled-pair rate in pairs/ns."""
    return pairs_per_cycle(params, w, attribution) / w.period * 1e3


def dc_pair_rate(params: DeviceParams, p: float) -> float:
    """Closed-form DC pair rate in pairs/ns.

    Without tunnelling this is p^2 a b / ((b + p)(ab + ap + p^2)) per ps.
    """
    if p < 0:
        raise ValueError("pump rate must be non-negative")
    if p == 0 or np.isinf(p):
        return 0.0
    pop = dc_steady_state(params, p)
    r = params.a * pop.xx * params.b / (params.b + p + params.tunnel_rate)
    return r * 1e3


def cascade_photon_fraction(params: DeviceParams, p: float) -> float:
    """Fraction of all emitted photons that belong to a completed cascade under DC pump ``p``."""
    if p <= 0:
        raise ValueError("cascade photon fraction is undefined without pumping")
    pop = dc_steady_state(params, p)
    total = params.a * pop.xx + params.b * pop.x
    return 2 * dc_pair_rate(params, p) * 1e-3 / total


def ideal_reset_pairs_per_cycle(params: DeviceParams, period: float) -> float:
    """Pairs per cycle for an instantaneous, complete reset into XX at each cycle start.

    Only cascades finishing inside the cycle count, since the next reset
    interrupts the rest.
    """
    k_xx = params.a + params.tunnel_rate
    k_x = params.b + params.tunnel_rate
    branching = (params.a / k_xx) * (params.b / k_x)
    if np.isclose(k_xx, k_x, rtol=1e-9):
        done = 1 - np.exp(-k_x * period) * (1 + k_x * period)
    else:
        done = 1 - (k_xx * np.exp(-k_x * period) - k_x * np.exp(-k_xx * period)) / (k_xx - k_x)
    return float(branching * done)


def intrinsic_fidelity(params: DeviceParams, tau):
    """Bell-state fidelity of a cascade pair emitted with delay ``tau``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("delay must be non-negative")
    f = 0.25 + (params.f0 - 0.25) * np.exp(-tau / params.t_coh)
    return float(f) if f.ndim == 0 else f


def _conditional_x(params, w, t1, t2s):
    """P(X at t2 | X at t1) for every t2 in ``t2s`` (>= t1)."""
    e_x = np.zeros(3)
    e_x[X] = 1.0
    return populations_at(params, w, e_x, t1, t2s)[:, X]


def _conditional_xx_from_g(params, w, t2, t1s):
    """P(XX at t1 | G at t2) for every t1 in ``t1s`` (>= t2)."""
    e_g = np.zeros(3)
    e_g[G] = 1.0
    return populations_at(params, w, e_g, t2, t1s)[:, XX]


@dataclass(frozen=True)
class PairDensityMap:
    """Two-photon densities on a (t1, t2) grid of bin centres.

    ``t1`` spans one clock cycle, ``t2`` spans ``horizon`` cycles from the
    start of that cycle. Entry ``[i, j]`` is the density for a biexciton
    photon at ``t1[i]`` and an exciton photon at ``t2[j]``.
    """

    t1: np.ndarray
    t2: np.ndarray
    cascade_density: np.ndarray
    accidental_density: np.ndarray
    waveform: DriveWaveform
    params: DeviceParams
    background: str

    @property
    def total_density(self):
        return self.cascade_density + self.accidental_density

    def fidelity(self) -> np.ndarray:
        """Fidelity per grid point; NaN where no coincidences are expected."""
        tau = np.clip(self.t2[None, :] - self.t1[:, None], 0.0, None)
        fint = intrinsic_fidelity(self.params, tau)
        num = fint * self.cascade_density + 0.25 * self.accidental_density
        den = self.total_density
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(den > 0, num / den, np.nan)
        return f


def pair_density_map(params: DeviceParams, w: DriveWaveform, n_bins: int = 100,
                     horizon: int = 1, background: str = "conditional") -> PairDensityMap:
    """Cascade and accidental two-photon densities over one cycle x ``horizon`` cycles.

    ``background="conditional"`` takes the accidental part as the exact
    joint emission density minus the cascade part, which is what a single
    emitter produces. ``"factorized"`` uses the product of singles rates
    minus the cascade part, floored at zero.
    """
    if background not in ("conditional", "factorized"):
        raise ValueError("background must be 'conditional' or 'factorized'")
    if n_bins < 1 or horizon < 1:
        raise ValueError("n_bins and horizon must be positive")
    T = w.period
    h = T / n_bins
    t1 = (np.arange(n_bins) + 0.5) * h
    t2 = (np.arange(n_bins * horizon) + 0.5) * h
    a, b = params.a, params.b
    pop1 = cycle_populations(params, w, t1)
    pop2 = cycle_populations(params, w, t2)
    upper = t2[None, :] >= t1[:, None]

    tt1, tt2 = np.broadcast_arrays(t1[:, None], t2[None, :])
    surv = np.where(upper, survival(params, w, tt1, np.maximum(tt2, tt1)), 0.0)
    casc = a * pop1[:, XX][:, None] * surv * b

    if background == "factorized":
        joint = a * pop1[:, XX][:, None] * b * pop2[:, X][None, :]
    else:
        joint = np.zeros_like(casc)
        for i, s in enumerate(t1):
            js = np.nonzero(upper[i])[0]
            joint[i, js] = a * pop1[i, XX] * b * _conditional_x(params, w, s, t2[js])
        for j, s in enumerate(t2):
            ii = np.nonzero(~upper[:, j])[0]
            if ii.size:
                joint[ii, j] = b * pop2[j, X] * a * _conditional_xx_from_g(params, w, s, t1[ii])
    acc = np.clip(joint - casc, 0.0, None)
    return PairDensityMap(t1, t2, casc, acc, w, params, background)


def model_fidelity_map(params: DeviceParams, w: DriveWaveform, n_bins: int = 100,
                       horizon: int = 1, background: str = "conditional") -> PairDensityMap:
    """Fidelity map over (t1, t2); call ``.fidelity()`` on the result for the values."""
    return pair_density_map(params, w, n_bins, horizon, background)


def model_fidelity_vs_delay(params: DeviceParams, w: DriveWaveform, delays,
                            n_t1: int = 200, same_cycle: bool = False,
                            background: str = "conditional") -> np.ndarray:
    """Coincidence-weighted fidelity as a function of delay t2 - t1 >= 0.

    ``same_cycle=True`` keeps only pairs whose exciton photon lands in the
    biexciton photon's clock cycle.
    """
    delays = np.asarray(delays, dtype=float)
    T = w.period
    t1 = (np.arange(n_t1) + 0.5) * T / n_t1
    a, b = params.a, params.b
    pop1 = cycle_populations(params, w, t1)
    fint = intrinsic_fidelity(params, delays)
    num = np.zeros(delays.size)
    den = np.zeros(delays.size)
    for i, s in enumerate(t1):
        t2 = s + delays
        surv = survival(params, w, s, t2)
        casc = a * pop1[i, XX] * surv * b
        if background == "factorized":
            joint = a * pop1[i, XX] * b * cycle_populations(params, w, t2)[:, X]
        else:
            joint = a * pop1[i, XX] * b * _conditional_x(params, w, s, t2)
        acc = np.clip(joint - casc, 0.0, None)
        keep = (t2 < T) if same_cycle else np.ones(delays.size, bool)
        num += np.where(keep, fint * casc + 0.25 * acc, 0.0)
        den += np.where(keep, casc + acc, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, np.nan)


def _panels_between(params, w, lo, hi):
    """Quadrature over ``[lo, hi]`` (absolute times) split at pulse edges."""
    from .dynamics import segments_between
    stiff_base = params.a + params.b + params.tunnel_rate
    nodes, weights = [], []
    for s, e, p in segments_between(w, lo, hi):
        n, wt = _panels(s, e, stiff_base + 2 * p)
        nodes.append(n)
        weights.append(wt)
    return np.concatenate(nodes), np.concatenate(weights)


def cycle_pair_integrals(params: DeviceParams, w: DriveWaveform, cycle_offset: int = 0) -> dict:
    """Integrated two-photon densities over the square at ``cycle_offset``.

    Returns the expected numbers of cascade and accidental coincidences per
    cycle and the fidelity-weighted cascade sum. The offset-0 square includes
    the lower triangle, where only accidental pairs occur.
    """
    if cycle_offset < 0:
        raise ValueError("negative cycle offsets are not modelled")
    T = w.period
    a, b = params.a, params.b
    n1, w1 = _cycle_quadrature(params, w)
    pop1 = cycle_populations(params, w, n1)
    lo2, hi2 = cycle_offset * T, (cycle_offset + 1) * T
    casc = acc = casc_f = 0.0
    for t1, wt1, p1 in zip(n1, w1, pop1):
        start = max(t1, lo2)
        if hi2 > start:
            t2, wt2 = _panels_between(params, w, start, hi2)
            c = a * p1[XX] * survival(params, w, t1, t2) * b
            j = a * p1[XX] * b * _conditional_x(params, w, t1, t2)
            casc += wt1 * np.sum(wt2 * c)
            casc_f += wt1 * np.sum(wt2 * c * intrinsic_fidelity(params, t2 - t1))
            acc += wt1 * np.sum(wt2 * np.clip(j - c, 0.0, None))
    if cycle_offset == 0:
        # exciton photon first: X emission at t2 leaves G, then XX photon at t1 > t2
        n2, w2 = _cycle_quadrature(params, w)
        pop2 = cycle_populations(params, w, n2)
        for t2, wt2, p2 in zip(n2, w2, pop2):
            t1, wt1 = _panels_between(params, w, t2, T)
            j = b * p2[X] * a * _conditional_xx_from_g(params, w, t2, t1)
            acc += wt2 * np.sum(wt1 * j)
    return {"cascade": float(casc), "accidental": float(acc), "cascade_fidelity": float(casc_f)}


def model_cycle_fidelity(params: DeviceParams, w: DriveWaveform, cycle_offset: int = 0) -> float:
    """Integrated fidelity of all pairs with the exciton photon ``cycle_offset`` cycles later.

    For offset 0 this includes the lower triangle (exciton photon first).
    """
    r = cycle_pair_integrals(params, w, cycle_offset)
    return (r["cascade_fidelity"] + 0.25 * r["accidental"]) / (r["cascade"] + r["accidental"])


def cumulative_pairs_model(params: DeviceParams, w: DriveWaveform, n_points: int = 200,
                           attribution: str = "t1"):
    """Cumulative mean pairs emitted versus biexciton-photon time within one cycle.

    Returns ``(times, cumulative)`` with ``cumulative[-1] == pairs_per_cycle``
    up to quadrature error.
    """
    _check_attribution(attribution)
    edges = np.linspace(0.0, w.period, n_points + 1)
    out = np.zeros(n_points + 1)
    cuts_all = [s for s, _, _ in _segments_in_cycle(w)]
    stiff = params.a + params.b + w.dc_rate + w.pulse_rate + params.tunnel_rate
    for i in range(n_points):
        # pulse edges must not fall inside a quadrature panel
        cuts = [c for c in cuts_all if edges[i] < c < edges[i + 1]]
        pieces = np.concatenate([[edges[i]], cuts, [edges[i + 1]]])
        nw = [_panels(lo, hi, stiff) for lo, hi in zip(pieces[:-1], pieces[1:])]
        n = np.concatenate([x[0] for x in nw])
        wt = np.concatenate([x[1] for x in nw])
        pxx = cycle_populations(params, w, n)[:, XX]
        c = completion_probability(params, w, n, attribution)
        out[i + 1] = out[i] + np.sum(wt * params.a * pxx * c)
    return edges, out
