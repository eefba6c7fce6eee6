"""Kinetic Monte Carlo photon streams with polarization and detector models.

Randomness comes from counter-based Philox substreams keyed on
``(seed, stream, block)``, so every block of cycles draws the same numbers
no matter how the work is split up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from . import _kernels
from .dynamics import periodic_steady_state
from .metrics import intrinsic_fidelity
from .model import DeviceParams, DriveWaveform, Populations
from .timetags import TIMETAG_DTYPE

KIND_XX = _kernels.KIND_XX
KIND_X = _kernels.KIND_X

BASES = ("rect", "diag", "circ")
_BASIS_ALIASES = {
    "rect": "rect", "rectilinear": "rect", "hv": "rect", "z": "rect",
    "diag": "diag", "diagonal": "diag", "da": "diag", "x": "diag",
    "circ": "circ", "circular": "circ", "rl": "circ", "y": "circ",
}
_BASIS_INDEX = {"rect": 0, "diag": 1, "circ": 2}

# channel = 2 * kind + outcome
CHANNELS = {
    0: "XX co-polarized detector",
    1: "XX cross-polarized detector",
    2: "X co-polarized detector",
    3: "X cross-polarized detector",
}
N_CHANNELS = 4

_BLOCK_UNIFORMS = 1 << 20
_INIT_STREAM = 0xFFFF


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent counter-based generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


def canonical_basis(label: str) -> str:
    try:
        return _BASIS_ALIASES[str(label).lower()]
    except KeyError:
        raise ValueError(f"unknown analyzer basis {label!r}; expected one of {BASES}") from None


class EmissionEvent(NamedTuple):
    kind: int
    time: float
    cascade_id: int
    cycle_index: int


@dataclass
class Emissions:
    """Photons emitted by one trajectory, in time order.

    ``cascade_id`` is the index of the biexciton photon for both photons of
    a completed cascade and -1 otherwise.
    """

    time: np.ndarray
    kind: np.ndarray
    cascade_id: np.ndarray
    period: float
    duration: float
    occupancy: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __len__(self):
        return self.time.size

    @property
    def cycle_index(self) -> np.ndarray:
        return np.floor(self.time / self.period).astype(np.int64)

    @property
    def partner(self) -> np.ndarray:
        """Index of the other photon of the cascade, -1 if unlinked."""
        out = np.full(self.time.size, -1, dtype=np.int64)
        xs = np.nonzero((self.kind == KIND_X) & (self.cascade_id >= 0))[0]
        out[xs] = self.cascade_id[xs]
        out[self.cascade_id[xs]] = xs
        return out

    def linked_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Times of ``(xx, x)`` photons of every completed cascade."""
        xs = np.nonzero((self.kind == KIND_X) & (self.cascade_id >= 0))[0]
        return self.time[self.cascade_id[xs]], self.time[xs]

    def events(self) -> Iterator[EmissionEvent]:
        cyc = self.cycle_index
        for i in range(self.time.size):
            yield EmissionEvent(int(self.kind[i]), float(self.time[i]),
                                int(self.cascade_id[i]), int(cyc[i]))

    def occupation_fractions(self) -> np.ndarray:
        return self.occupancy / self.duration if self.duration > 0 else self.occupancy


def _initial_state(params, w, initial, rng):
    if initial is None:
        probs = periodic_steady_state(params, w).as_array()
    elif isinstance(initial, Populations):
        probs = initial.as_array()
    elif isinstance(initial, (int, np.integer)):
        return int(initial)
    else:
        probs = np.asarray(initial, dtype=float)
    return int(rng.choice(3, p=probs / probs.sum()))


def simulate_emissions(params: DeviceParams, w: DriveWaveform, duration: float, seed: int,
                       initial=None, block_cycles: int = 65536, stream: int = 0) -> Emissions:
    """Exact-jump simulation of the cascade over ``[0, duration)`` ps.

    ``initial`` may be a state index (0=G, 1=X, 2=XX), a Populations or
    probability vector to sample from, or ``None`` for the periodic steady
    state at t = 0. ``stream`` separates independent runs sharing a seed.
    """
    if duration < 0:
        raise ValueError("duration must be non-negative")
    a, b, tun = params.a, params.b, params.tunnel_rate
    has_pulse = w.pulse_rate > 0 and w.pulse_width > 0
    k_cycle = int(np.floor((0.0 - w.phase) / w.period))
    in_pulse = has_pulse and (0.0 - w.phase - k_cycle * w.period) < w.pulse_width
    state = _initial_state(params, w, initial, substream(seed, stream, _INIT_STREAM))

    t = 0.0
    last_xx, alive = -1, False
    occupancy = np.zeros(3)
    times, kinds, partners = [], [], []
    n_total = 0
    block_len = block_cycles * w.period
    n_blocks = int(np.ceil(duration / block_len)) if duration > 0 else 0
    for blk in range(n_blocks):
        rng = substream(seed, stream, blk)
        t_stop = min((blk + 1) * block_len, duration)
        while t < t_stop:
            u = rng.random(_BLOCK_UNIFORMS)
            out_t = np.empty(_BLOCK_UNIFORMS // 2)
            out_k = np.empty(_BLOCK_UNIFORMS // 2, dtype=np.int8)
            out_p = np.empty(_BLOCK_UNIFORMS // 2, dtype=np.int64)
            t, state, k_cycle, in_pulse, last_xx, alive, _, n_out = _kernels.kmc_advance(
                t, t_stop, state, k_cycle, in_pulse, last_xx, alive,
                a, b, tun, w.dc_rate, w.pulse_rate, w.pulse_width, w.period, w.phase,
                u, 0, out_t, out_k, out_p, 0, n_total, occupancy)
            times.append(out_t[:n_out])
            kinds.append(out_k[:n_out])
            partners.append(out_p[:n_out])
            n_total += n_out

    time = np.concatenate(times) if times else np.zeros(0)
    kind = np.concatenate(kinds) if kinds else np.zeros(0, dtype=np.int8)
    partner = np.concatenate(partners) if partners else np.zeros(0, dtype=np.int64)
    cascade_id = partner.copy()
    linked = partner >= 0
    cascade_id[partner[linked]] = partner[linked]
    return Emissions(time, kind, cascade_id, w.period, float(duration), occupancy)


def correlation_matrix(phase):
    """Pauli correlations <A x B> of the evolving Bell state, bases ordered (rect, diag, circ)."""
    c, s = np.cos(phase), np.sin(phase)
    one = np.ones_like(c)
    zero = np.zeros_like(c)
    return np.array([[one, zero, zero], [zero, c, s], [zero, s, -c]])


def _basis_array(bases, n):
    if isinstance(bases, str):
        return np.full(n, _BASIS_INDEX[canonical_basis(bases)], dtype=np.int8)
    labels = np.asarray(bases)
    if labels.shape != (n,):
        raise ValueError("need one basis label per photon")
    return np.array([_BASIS_INDEX[canonical_basis(x)] for x in labels], dtype=np.int8)


def assign_polarizations(em: Emissions, params: DeviceParams, bases, seed: int,
                         frame: str = "rotating", stream: int = 0) -> np.ndarray:
    """Analyzer outcome per photon: 0 = co-axis (H, D, R), 1 = cross-axis (V, A, L).

    A completed cascade with delay tau is sampled from the Werner state
    V |Phi(phi)><Phi(phi)| + (1 - V) I / 4 with V = (4 f_int(tau) - 1) / 3
    and phi = fss_omega * tau. In the ``"rotating"`` frame the exciton
    analyzer co-rotates with the fine-structure precession, so phi drops
    out; ``"lab"`` keeps it. Unlinked photons get unbiased random outcomes.
    """
    if frame not in ("rotating", "lab"):
        raise ValueError("frame must be 'rotating' or 'lab'")
    n = len(em)
    basis = _basis_array(bases, n)
    rng = substream(seed, stream, 0x9A1A)
    out = (rng.random(n) < 0.5).astype(np.int8)
    u = rng.random(n)
    xs = np.nonzero((em.kind == KIND_X) & (em.cascade_id >= 0))[0]
    if xs.size:
        xxs = em.cascade_id[xs]
        tau = em.time[xs] - em.time[xxs]
        vis = (4 * intrinsic_fidelity(params, tau) - 1) / 3
        phi = params.fss_omega * tau if frame == "lab" else np.zeros_like(tau)
        corr = correlation_matrix(phi)[basis[xxs], basis[xs], np.arange(xs.size)]
        p_same = 0.5 * (1 + vis * corr)
        same = u[xs] < p_same
        out[xs] = np.where(same, out[xxs], 1 - out[xxs])
    return out


@dataclass(frozen=True)
class DetectorModel:
    """Per-channel efficiency and dark rate (1/ps), plus Gaussian timing jitter (ps)."""

    jitter_sigma: float = 0.0
    efficiency: tuple = (1.0, 1.0, 1.0, 1.0)
    dark_rate: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        eff = np.broadcast_to(np.asarray(self.efficiency, float), (N_CHANNELS,))
        dark = np.broadcast_to(np.asarray(self.dark_rate, float), (N_CHANNELS,))
        object.__setattr__(self, "efficiency", tuple(float(e) for e in eff))
        object.__setattr__(self, "dark_rate", tuple(float(d) for d in dark))
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")
        if np.any((eff < 0) | (eff > 1)):
            raise ValueError("efficiencies must lie in [0, 1]")
        if np.any(dark < 0):
            raise ValueError("dark rates must be non-negative")


def detect(em: Emissions, outcomes: np.ndarray, detector: DetectorModel, seed: int,
           duration: float | None = None, stream: int = 0) -> np.ndarray:
    """Turn emitted photons into a sorted time-tag array.

    Each photon survives with its channel's efficiency and is jittered;
    dark counts are added as independent Poisson processes over
    ``[0, duration)``. Timestamps are rounded to whole picoseconds.
    """
    duration = em.duration if duration is None else duration
    rng = substream(seed, stream, 0xDE7E)
    channel = (2 * em.kind.astype(np.int64) + np.asarray(outcomes, dtype=np.int64)).astype(np.uint8)
    eff = np.asarray(detector.efficiency)[channel]
    keep = rng.random(channel.size) < eff
    t = em.time[keep]
    ch = channel[keep]
    if detector.jitter_sigma > 0:
        t = t + rng.normal(0.0, detector.jitter_sigma, t.size)
    dark_t, dark_ch = [t], [ch]
    for c, rate in enumerate(detector.dark_rate):
        if rate > 0 and duration > 0:
            k = rng.poisson(rate * duration)
            dark_t.append(rng.uniform(0.0, duration, k))
            dark_ch.append(np.full(k, c, dtype=np.uint8))
    t = np.concatenate(dark_t)
    ch = np.concatenate(dark_ch)
    stamps = np.rint(np.clip(t, 0.0, None)).astype(np.uint64)
    order = np.lexsort((ch, stamps))
    tags = np.empty(order.size, dtype=TIMETAG_DTYPE)
    tags["channel"] = ch[order]
    tags["timestamp"] = stamps[order]
    return tags


def simulate_basis_streams(params: DeviceParams, w: DriveWaveform, duration: float, seed: int,
                           detector: DetectorModel | None = None, frame: str = "rotating",
                           bases=BASES, stream_offset: int = 0) -> dict:
    """One independent acquisition per analyzer basis, as done for fidelity measurements.

    Returns ``{basis: (tags, emissions)}``.
    """
    detector = detector or DetectorModel()
    out = {}
    for i, basis in enumerate(bases):
        basis = canonical_basis(basis)
        s = stream_offset + i
        em = simulate_emissions(params, w, duration, seed, stream=s)
        pol = assign_polarizations(em, params, basis, seed, frame=frame, stream=s)
        out[basis] = (detect(em, pol, detector, seed, duration, stream=s), em)
    return out


def werner_pair_stream(n_cycles: int, period: float, fidelity, basis: str, seed: int,
                       pair_probability: float = 0.8, mean_delay: float = 200.0,
                       same_cycle: bool = True, stream: int = 0) -> np.ndarray:
    """Synthetic time tags of photon pairs with a prescribed Bell-state fidelity.

    At most one pair per cycle; the biexciton photon time is uniform in the
    cycle and the exciton photon follows after an exponential delay.
    ``fidelity`` is a constant or a callable of the delay. With
    ``same_cycle`` the delay is drawn from the exponential truncated so the
    exciton photon lands in the same cycle. Useful as a ground-truth input for the analyzer.
    """
    rng = substream(seed, stream, 0x5717)
    b_idx = _BASIS_INDEX[canonical_basis(basis)]
    has = rng.random(n_cycles) < pair_probability
    cyc = np.nonzero(has)[0].astype(float)
    if same_cycle:
        # keep a 1 ps margin so rounding to whole ps cannot cross the cycle boundary
        t1 = rng.random(cyc.size) * (period - 1.0)
        room = np.maximum(period - 1.0 - t1, 0.0)
        # exponential truncated to [0, room) by inverse CDF
        u = rng.random(cyc.size)
        delay = -mean_delay * np.log1p(-u * -np.expm1(-room / mean_delay))
    else:
        t1 = rng.random(cyc.size) * period
        delay = rng.exponential(mean_delay, cyc.size)
    f = fidelity(delay) if callable(fidelity) else np.full(cyc.size, float(fidelity))
    vis = (4 * f - 1) / 3
    corr = 1.0 if b_idx < 2 else -1.0
    o1 = (rng.random(cyc.size) < 0.5).astype(np.int64)
    same = rng.random(cyc.size) < 0.5 * (1 + vis * corr)
    o2 = np.where(same, o1, 1 - o1)
    ta = cyc * period + t1
    tb = ta + delay
    t = np.concatenate([ta, tb])
    ch = np.concatenate([o1, 2 + o2]).astype(np.uint8)
    stamps = np.rint(t).astype(np.uint64)
    order = np.lexsort((ch, stamps))
    tags = np.empty(order.size, dtype=TIMETAG_DTYPE)
    tags["channel"] = ch[order]
    tags["timestamp"] = stamps[order]
    return tags
