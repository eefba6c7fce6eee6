"""Correlation analysis of time-tag streams.

Covers the pulsed autocorrelation g2(t), biexciton-exciton coincidence maps
per cycle offset, polarization-contrast fidelity maps, cross-cycle fidelity,
fidelity versus delay, cumulative entangled pairs and the QBER.

Channel convention follows :mod:`qdcascade.montecarlo`: 0/1 are the
biexciton co/cross detectors, 2/3 the exciton co/cross detectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .montecarlo import BASES, canonical_basis

NORM_WINDOW = (5, 20)
MIN_COUNTS = 25
QBER_LIMIT = 0.276


def _times(tags, channels=None) -> np.ndarray:
    """Float timestamps (ps) of the selected channels, sorted."""
    if tags.dtype.names and "timestamp" in tags.dtype.names:
        sel = tags
        if channels is not None:
            sel = tags[np.isin(tags["channel"], np.atleast_1d(channels))]
        t = sel["timestamp"].astype(np.float64)
    else:
        t = np.asarray(tags, dtype=np.float64)
    return np.sort(t, kind="stable")


def _bins_per_period(period, bin_width):
    return max(1, int(round(period / bin_width)))


@dataclass
class G2Histogram:
    """Normalized g2(t) plus integrated peak areas per cycle offset."""

    delays: np.ndarray
    g2: np.ndarray
    offsets: np.ndarray
    peak_areas: np.ndarray
    peak_counts: np.ndarray
    norm_counts: float
    period: float

    @property
    def center(self) -> float:
        return float(self.peak_areas[self.offsets == 0][0])

    @property
    def center_stderr(self) -> float:
        c = self.peak_counts[self.offsets == 0][0]
        # relative Poisson error of the centre and of the normalisation add in quadrature
        n_norm = self.norm_counts * np.count_nonzero(self._far())
        rel = np.sqrt(1 / max(c, 1) + 1 / max(n_norm, 1))
        return float(self.center * rel) if c else float(1 / self.norm_counts)

    def _far(self):
        lo, hi = NORM_WINDOW
        a = np.abs(self.offsets)
        return (a >= lo) & (a <= hi)


def g2_auto(tags, channel, period: float, bin_width: float = 16.0,
            n_max: int = NORM_WINDOW[1], norm_window=NORM_WINDOW) -> G2Histogram:
    """Full (start-stop free) autocorrelation of one or more channels.

    Every ordered photon pair with |delay| < (n_max + 1/2) periods is
    histogrammed. Peak n integrates delays in [(n - 1/2) T, (n + 1/2) T);
    everything is normalized so far peaks (``norm_window`` in |n|) average 1.
    """
    t = _times(tags, channel)
    if t.size == 0:
        raise ValueError("empty photon stream")
    lo, hi = norm_window
    if n_max < hi:
        raise ValueError("n_max must reach the normalisation window")
    nb = _bins_per_period(period, bin_width)
    counts = _kernels.auto_histogram(t, float(period), nb, int(n_max))
    offsets = np.arange(-n_max, n_max + 1)
    peaks = counts.reshape(offsets.size, nb).sum(axis=1)
    far = (np.abs(offsets) >= lo) & (np.abs(offsets) <= hi)
    norm = peaks[far].mean()
    if norm <= 0:
        raise ValueError("no coincidences in the normalisation window")
    h = period / nb
    delays = -(n_max + 0.5) * period + (np.arange(counts.size) + 0.5) * h
    return G2Histogram(delays, counts * nb / norm, offsets, peaks / norm, peaks, float(norm), period)


@dataclass
class CoincidenceMap:
    """Coincidence counts over (t_XX mod T, t_X mod T) for each cycle offset.

    ``counts[k]`` holds pairs with the exciton photon ``offsets[k]`` cycles
    after the biexciton photon. Maps add elementwise, so time shards can be
    histogrammed separately and merged.
    """

    counts: np.ndarray
    period: float
    n_sync: int
    setting: str = ""
    singles_xx: np.ndarray = field(default=None)
    singles_x: np.ndarray = field(default=None)

    def __post_init__(self):
        if np.any(self.counts < 0):
            raise ValueError("negative counts")

    @property
    def n_span(self) -> int:
        return (self.counts.shape[0] - 1) // 2

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    @property
    def bin_width(self) -> float:
        return self.period / self.n_bins

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.n_span, self.n_span + 1)

    @property
    def bin_centers(self) -> np.ndarray:
        return (np.arange(self.n_bins) + 0.5) * self.bin_width

    def at(self, n: int) -> np.ndarray:
        if abs(n) > self.n_span:
            raise ValueError(f"offset {n} outside the histogrammed span {self.n_span}")
        return self.counts[n + self.n_span]

    @property
    def same_cycle(self) -> np.ndarray:
        """The square of pairs emitted within one driving cycle."""
        return self.at(0)

    def g2(self, norm_window=NORM_WINDOW) -> np.ndarray:
        """Counts normalized bin-by-bin to the mean of far-offset maps (uncorrelated level 1)."""
        lo, hi = norm_window
        if self.n_span < hi:
            raise ValueError(f"map span {self.n_span} does not reach the normalisation window")
        a = np.abs(self.offsets)
        ref = self.counts[(a >= lo) & (a <= hi)].mean(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(ref > 0, self.counts / ref, np.nan)

    def __add__(self, other: "CoincidenceMap") -> "CoincidenceMap":
        if self.counts.shape != other.counts.shape or self.period != other.period:
            raise ValueError("maps are not congruent")
        sxx = None if self.singles_xx is None else self.singles_xx + other.singles_xx
        sx = None if self.singles_x is None else self.singles_x + other.singles_x
        return CoincidenceMap(self.counts + other.counts, self.period,
                              self.n_sync + other.n_sync, self.setting, sxx, sx)


def _n_sync(times_list, period):
    tmax = max((t[-1] for t in times_list if t.size), default=0.0)
    return int(np.floor(tmax / period)) + 1


def _singles(t, period, nb):
    idx = np.minimum(((t % period) / (period / nb)).astype(np.int64), nb - 1)
    return np.bincount(idx, minlength=nb)


def _histogram_pair(t1, o1, t2, o2, period, nb, n_span):
    shape = (2 * n_span + 1, nb, nb)
    co = np.zeros(shape, dtype=np.int64)
    cross = np.zeros(shape, dtype=np.int64)
    _kernels.cross_histogram(t1, o1, t2, o2, float(period), nb, int(n_span), co, cross)
    return co, cross


def g2_cross_2d(xx_tags, x_tags, period: float, bin_width: float = 16.0,
                n_cycles_span: int = NORM_WINDOW[1], n_sync: int | None = None,
                setting: str = "unpolarized") -> CoincidenceMap:
    """Biexciton-exciton coincidence map; call ``.g2()`` for the normalized correlation.

    ``xx_tags``/``x_tags`` may be time-tag arrays (all channels used) or
    plain timestamp arrays.
    """
    t1, t2 = _times(xx_tags), _times(x_tags)
    nb = _bins_per_period(period, bin_width)
    zeros1 = np.zeros(t1.size, dtype=np.int8)
    zeros2 = np.zeros(t2.size, dtype=np.int8)
    co, _ = _histogram_pair(t1, zeros1, t2, zeros2, period, nb, n_cycles_span)
    n_sync = _n_sync([t1, t2], period) if n_sync is None else n_sync
    return CoincidenceMap(co, period, n_sync, setting, _singles(t1, period, nb),
                          _singles(t2, period, nb))


@dataclass
class PolarizationMaps:
    """Co- and cross-polarized coincidence maps for the three analyzer bases."""

    co: dict
    cross: dict

    def __post_init__(self):
        missing = set(BASES) - set(self.co) | set(BASES) - set(self.cross)
        if missing:
            raise ValueError(f"missing bases: {sorted(missing)}")
        shapes = {m.counts.shape for m in list(self.co.values()) + list(self.cross.values())}
        if len(shapes) != 1:
            raise ValueError("maps are not congruent")

    @property
    def reference(self) -> CoincidenceMap:
        return self.co["rect"]

    @property
    def period(self) -> float:
        return self.reference.period

    def __add__(self, other: "PolarizationMaps") -> "PolarizationMaps":
        return PolarizationMaps({b: self.co[b] + other.co[b] for b in BASES},
                                {b: self.cross[b] + other.cross[b] for b in BASES})

    def counts(self, basis: str, offset: int = 0):
        b = canonical_basis(basis)
        return self.co[b].at(offset), self.cross[b].at(offset)

    def total(self, offsets=None) -> int:
        """All coincidences across bases, optionally restricted to some offsets."""
        out = 0
        for b in BASES:
            for m in (self.co[b], self.cross[b]):
                if offsets is None:
                    out += int(m.counts.sum())
                else:
                    out += int(sum(m.at(n).sum() for n in offsets))
        return out


def basis_maps(tags, period: float, bin_width: float = 16.0, n_cycles_span: int = 5,
               n_sync: int | None = None, basis: str = "") -> tuple[CoincidenceMap, CoincidenceMap]:
    """Co/cross coincidence maps from one four-channel acquisition."""
    tags = np.asarray(tags)
    sel1 = np.isin(tags["channel"], (0, 1))
    sel2 = np.isin(tags["channel"], (2, 3))
    a, b = tags[sel1], tags[sel2]
    ia = np.argsort(a["timestamp"], kind="stable")
    ib = np.argsort(b["timestamp"], kind="stable")
    t1 = a["timestamp"][ia].astype(np.float64)
    o1 = (a["channel"][ia] - 0).astype(np.int8)
    t2 = b["timestamp"][ib].astype(np.float64)
    o2 = (b["channel"][ib] - 2).astype(np.int8)
    nb = _bins_per_period(period, bin_width)
    co, cross = _histogram_pair(t1, o1, t2, o2, period, nb, n_cycles_span)
    n_sync = _n_sync([t1, t2], period) if n_sync is None else n_sync
    s1, s2 = _singles(t1, period, nb), _singles(t2, period, nb)
    return (CoincidenceMap(co, period, n_sync, f"{basis}-co", s1, s2),
            CoincidenceMap(cross, period, n_sync, f"{basis}-cross", s1, s2))


def polarization_maps(streams: dict, period: float, bin_width: float = 16.0,
                      n_cycles_span: int = 5, n_sync: int | None = None) -> PolarizationMaps:
    """Build the six maps from ``{basis: tags}`` acquisitions."""
    co, cross = {}, {}
    for basis, tags in streams.items():
        b = canonical_basis(basis)
        co[b], cross[b] = basis_maps(tags, period, bin_width, n_cycles_span, n_sync, b)
    return PolarizationMaps(co, cross)


def contrast(co, cross):
    """(co - cross) / (co + cross); NaN where there are no counts."""
    co = np.asarray(co, dtype=float)
    cross = np.asarray(cross, dtype=float)
    tot = co + cross
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.where(tot > 0, (co - cross) / tot, np.nan)
    return float(c) if c.ndim == 0 else c


def _contrast_var(co, cross):
    co = np.asarray(co, dtype=float)
    cross = np.asarray(cross, dtype=float)
    tot = co + cross
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, 4 * co * cross / tot**3, np.nan)


def _fidelity_from_counts(counts: dict, weights=None):
    """Fidelity and stderr from ``{basis: (co, cross)}`` count arrays.

    ``weights`` is the demodulation factor cos(phi): lab-frame diagonal and
    circular contrasts oscillate as V cos(phi), so they are divided by it.
    Bins with |cos(phi)| < 0.05 carry no usable amplitude and give NaN.
    """
    c = {b: contrast(*counts[b]) for b in BASES}
    v = {b: _contrast_var(*counts[b]) for b in BASES}
    if weights is None:
        wgt = 1.0
    else:
        wgt = np.where(np.abs(weights) < 0.05, np.nan, weights)
    f = 0.25 * (1 + c["rect"] + (c["diag"] - c["circ"]) / wgt)
    var = v["rect"] + (v["diag"] + v["circ"]) / wgt**2
    return f, 0.25 * np.sqrt(var)


def _phase_weights(maps: PolarizationMaps, fss_omega, mode, offset):
    if mode == "rotating":
        return None
    if mode != "demodulate":
        raise ValueError("mode must be 'rotating' or 'demodulate'")
    tc = maps.reference.bin_centers
    tau = tc[None, :] + offset * maps.period - tc[:, None]
    return np.cos(fss_omega * tau)


@dataclass
class FidelityMap:
    """Bell-state fidelity per (t_XX, t_X) bin; NaN marks bins below the count threshold."""

    t_xx: np.ndarray
    t_x: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    offset: int = 0


def fidelity_map(maps: PolarizationMaps, fss_omega: float = 0.0, mode: str = "rotating",
                 offset: int = 0, threshold: int = MIN_COUNTS) -> FidelityMap:
    """Per-bin fidelity 1/4 (1 + C_rect + C_diag - C_circ).

    ``mode="rotating"`` expects data taken with the exciton analyzer
    co-rotating with the fine-structure precession. ``"demodulate"`` takes
    lab-frame data and divides the diagonal/circular contrasts by
    cos(fss_omega * tau), recovering the precession amplitude. Bins near
    cos(phi) = 0 have no usable amplitude and are NaN.
    """
    counts = {b: maps.counts(b, offset) for b in BASES}
    wgt = _phase_weights(maps, fss_omega, mode, offset)
    f, err = _fidelity_from_counts(counts, wgt)
    ok = np.ones(f.shape, bool)
    for b in BASES:
        co, cr = counts[b]
        ok &= (co + cr) >= threshold
    f = np.where(ok, f, np.nan)
    err = np.where(ok, err, np.nan)
    tc = maps.reference.bin_centers
    return FidelityMap(tc, tc + offset * maps.period, f, err, offset)


def cycle_fidelity(maps: PolarizationMaps, n: int = 0, fss_omega: float = 0.0,
                   mode: str = "rotating") -> tuple[float, float]:
    """Coincidence-weighted fidelity over the whole square at cycle offset ``n``.

    Counts are pooled per basis before forming contrasts, which weights
    every bin by its coincidences; for n = 0 both triangles are included.
    """
    wgt = _phase_weights(maps, fss_omega, mode, n)
    pooled = {}
    for b in BASES:
        co, cr = maps.counts(b, n)
        if b == "rect" or wgt is None:
            pooled[b] = (co.sum(), cr.sum())
        else:
            # demodulate bin by bin, then pool by coincidences; skip bins near cos(phi) = 0
            ok = np.abs(wgt) >= 0.05
            tot = (co + cr)[ok].sum()
            d = ((co - cr)[ok] / wgt[ok]).sum()
            pooled[b] = ((tot + d) / 2, (tot - d) / 2)
    f, err = _fidelity_from_counts(pooled)
    return float(f), float(err)


@dataclass
class DelayFidelity:
    delays: np.ndarray
    fidelity: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray


def _delay_project(a: np.ndarray) -> np.ndarray:
    """Sum an (nb, nb) map along diagonals; index k is delay (k - nb + 1) bins."""
    nb = a.shape[0]
    return np.array([np.trace(a, offset=k) for k in range(-(nb - 1), nb)])


def fidelity_vs_delay(maps: PolarizationMaps, offset: int = 0, threshold: int = MIN_COUNTS,
                      fss_omega: float = 0.0, mode: str = "rotating") -> DelayFidelity:
    """Fidelity against t_X - t_XX, pooling coincidences along each diagonal of the map."""
    nb = maps.reference.n_bins
    h = maps.reference.bin_width
    k = np.arange(-(nb - 1), nb)
    delays = k * h + offset * maps.period
    counts = {b: tuple(_delay_project(c) for c in maps.counts(b, offset)) for b in BASES}
    wgt = None if mode == "rotating" else np.cos(fss_omega * delays)
    if mode not in ("rotating", "demodulate"):
        raise ValueError("mode must be 'rotating' or 'demodulate'")
    f, err = _fidelity_from_counts(counts, wgt)
    ok = np.ones(f.shape, bool)
    tot = np.zeros(f.shape)
    for b in BASES:
        co, cr = counts[b]
        ok &= (co + cr) >= threshold
        tot += co + cr
    return DelayFidelity(delays, np.where(ok, f, np.nan), np.where(ok, err, np.nan), tot)


def entangled_pairs(maps: PolarizationMaps, offsets=(0,)):
    """Entangled-pair count per t_XX bin, with its Poisson variance.

    For equal-length acquisitions per basis, the Werner weight of the
    coincidences is (C_rect + C_diag - C_circ)/3, so the entangled count is
    (1/3)[(co-cross)_rect + (co-cross)_diag - (co-cross)_circ], which is
    linear in the counts and can be accumulated bin by bin.
    """
    sign = {"rect": 1, "diag": 1, "circ": -1}
    nb = maps.reference.n_bins
    ent = np.zeros(nb)
    var = np.zeros(nb)
    for b in BASES:
        for n in offsets:
            co, cr = maps.counts(b, n)
            ent += sign[b] * (co - cr).sum(axis=1) / 3
            var += (co + cr).sum(axis=1) / 9
    return ent, var


@dataclass
class CumulativeResult:
    """Cumulative entangled pairs versus biexciton-photon time within the cycle."""

    times: np.ndarray
    ar_pairs: np.ndarray
    dc_pairs: np.ndarray
    ar_norm_total: np.ndarray
    dc_norm_total: np.ndarray
    ar_norm_same_cycle: np.ndarray
    dc_norm_same_cycle: np.ndarray
    ratio: float
    ratio_stderr: float
    ar_pairs_per_cycle: float
    dc_pairs_per_cycle: float

    @property
    def enhancement(self) -> float:
        return self.ratio - 1


def cumulative_pairs(ar: PolarizationMaps, dc: PolarizationMaps, offsets=(0,)) -> CumulativeResult:
    """Cumulative entangled-pair curves for AR and DC runs and their per-cycle ratio.

    Curves are emitted both per total coincidences of the run and per
    same-cycle coincidences; the ratio compares pairs per sync cycle.
    """
    if ar.reference.n_bins != dc.reference.n_bins:
        raise ValueError("AR and DC maps need the same binning")
    e_ar, v_ar = entangled_pairs(ar, offsets)
    e_dc, v_dc = entangled_pairs(dc, offsets)
    n_ar, n_dc = ar.reference.n_sync, dc.reference.n_sync
    s_ar, s_dc = e_ar.sum(), e_dc.sum()
    ppc_ar, ppc_dc = s_ar / n_ar, s_dc / n_dc
    ratio = ppc_ar / ppc_dc
    rel = np.sqrt(v_ar.sum() / s_ar**2 + v_dc.sum() / s_dc**2)
    nb = ar.reference.n_bins
    times = np.arange(nb + 1) * ar.reference.bin_width
    cum_ar = np.concatenate([[0.0], np.cumsum(e_ar)])
    cum_dc = np.concatenate([[0.0], np.cumsum(e_dc)])
    return CumulativeResult(
        times=times,
        ar_pairs=cum_ar,
        dc_pairs=cum_dc,
        ar_norm_total=cum_ar / ar.total(),
        dc_norm_total=cum_dc / dc.total(),
        ar_norm_same_cycle=cum_ar / ar.total((0,)),
        dc_norm_same_cycle=cum_dc / dc.total((0,)),
        ratio=float(ratio),
        ratio_stderr=float(abs(ratio) * rel),
        ar_pairs_per_cycle=float(ppc_ar),
        dc_pairs_per_cycle=float(ppc_dc),
    )


def qber_from_fidelity(f: float) -> tuple[float, bool]:
    """Quantum bit error rate 2(1 - f)/3 and whether it clears the 27.6 % limit."""
    q = 2 * (1 - f) / 3
    return q, bool(q < QBER_LIMIT)
