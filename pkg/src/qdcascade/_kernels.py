"""Numba kernels: exact-jump cascade simulation and correlation histograms."""

import math

import numpy as np
from numba import njit

KIND_XX = 0
KIND_X = 1


@njit(cache=True)
def kmc_advance(t, t_end, state, k_cycle, in_pulse, last_xx, alive,
                a, b, tun, dc, pulse, width, period, phase,
                u, u_pos, out_time, out_kind, out_partner, n_out, index_base,
                occupancy):
    """Advance one trajectory from ``t`` towards ``t_end``.

    Stops early when fewer than two uniforms remain or the output buffer is
    full; the caller refills and calls again. ``k_cycle``/``in_pulse`` track
    the current constant-pump segment so pulse edges are hit exactly.
    Returns the updated scalar state.
    """
    has_pulse = pulse > 0.0 and width > 0.0
    n_u = u.shape[0]
    cap = out_time.shape[0]
    while t < t_end:
        if u_pos + 2 > n_u or n_out >= cap:
            break
        if in_pulse:
            seg_end = phase + k_cycle * period + width
            pump = dc + pulse
        else:
            seg_end = phase + (k_cycle + 1) * period
            pump = dc
        limit = seg_end if seg_end < t_end else t_end
        if state == 0:
            ktot = pump
        elif state == 1:
            ktot = b + pump + tun
        else:
            ktot = a + tun
        if ktot > 0.0:
            dt = -math.log(1.0 - u[u_pos]) / ktot
            u_pos += 1
        else:
            dt = math.inf
        if t + dt >= limit:
            occupancy[state] += limit - t
            t = limit
            if limit == seg_end:
                if in_pulse:
                    in_pulse = False
                else:
                    k_cycle += 1
                    in_pulse = has_pulse
            continue
        occupancy[state] += dt
        t += dt
        r = u[u_pos] * ktot
        u_pos += 1
        if state == 0:
            state = 1
            alive = False
        elif state == 1:
            if r < b:
                out_time[n_out] = t
                out_kind[n_out] = KIND_X
                out_partner[n_out] = last_xx if alive else -1
                n_out += 1
                state = 0
            elif r < b + pump:
                state = 2
            else:
                state = 0
            alive = False
        else:
            if r < a:
                out_time[n_out] = t
                out_kind[n_out] = KIND_XX
                out_partner[n_out] = -1
                last_xx = index_base + n_out
                n_out += 1
                alive = True
            else:
                alive = False
            state = 1
    return t, state, k_cycle, in_pulse, last_xx, alive, u_pos, n_out


@njit(cache=True)
def auto_histogram(times, period, n_bins_per_period, n_max):
    """Signed-delay histogram of all ordered photon pairs within ``n_max + 1/2`` periods.

    Bin ``k`` covers delays ``[-(n_max + 1/2) T + k h, ... + h)`` with
    ``h = T / n_bins_per_period``.
    """
    h = period / n_bins_per_period
    half = (n_max + 0.5) * period
    n_total = (2 * n_max + 1) * n_bins_per_period
    counts = np.zeros(n_total, dtype=np.int64)
    n = times.shape[0]
    for i in range(n):
        ti = times[i]
        j = i + 1
        while j < n:
            d = times[j] - ti
            if d >= half:
                break
            k = int(math.floor((d + half) / h))
            if k < n_total:
                counts[k] += 1
            k = int(math.floor((half - d) / h))
            if d > 0.0 and k < n_total:
                counts[k] += 1
            elif d == 0.0:
                # zero delay lands in the same central bin for both orderings
                counts[int(math.floor(half / h))] += 1
            j += 1
    return counts


@njit(cache=True)
def cross_histogram(t1, o1, t2, o2, period, n_bins, n_span, co, cross):
    """Accumulate (t1 mod T, t2 mod T) coincidences per cycle offset.

    ``co``/``cross`` have shape ``(2 n_span + 1, n_bins, n_bins)``; a pair
    goes to ``co`` when the two analyzer outcomes agree. Pass equal outcome
    arrays to collect unpolarized coincidences in ``co``.
    """
    h = period / n_bins
    n2 = t2.shape[0]
    j0 = 0
    for i in range(t1.shape[0]):
        c1 = math.floor(t1[i] / period)
        b1 = int((t1[i] - c1 * period) / h)
        if b1 >= n_bins:
            b1 = n_bins - 1
        lo = (c1 - n_span) * period
        hi = (c1 + n_span + 1) * period
        while j0 < n2 and t2[j0] < lo:
            j0 += 1
        j = j0
        while j < n2 and t2[j] < hi:
            c2 = math.floor(t2[j] / period)
            off = int(c2 - c1) + n_span
            if 0 <= off <= 2 * n_span:
                b2 = int((t2[j] - c2 * period) / h)
                if b2 >= n_bins:
                    b2 = n_bins - 1
                if o1[i] == o2[j]:
                    co[off, b1, b2] += 1
                else:
                    cross[off, b1, b2] += 1
            j += 1
