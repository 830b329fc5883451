"""Compiled history-tracking loops.

Only hot paths live here; the public API is in :mod:`hmlmc.transport`.
Randomness is splitmix64 on explicit uint64 state, so every history owns a
reproducible substream regardless of thread count or chunking. The Python
mirror of the stream derivation lives in transport.py and is pinned to this
one by the manual-vs-kernel equality test.
"""
import numpy as np
from numba import njit

U64 = np.uint64
GAMMA = U64(0x9E3779B97F4A7C15)
_MULT1 = U64(0xBF58476D1CE4E5B9)
_MULT2 = U64(0x94D049BB133111EB)
_TWO_NEG_53 = 2.0**-53

LEAK_LEFT = 0
LEAK_RIGHT = 1
KILLED = 2


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> U64(30))) * _MULT1
    z = (z ^ (z >> U64(27))) * _MULT2
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _uniform(state):
    """Advance and map to (0, 1]; never returns 0 so log() is safe."""
    state = state + GAMMA
    z = _mix(state)
    return state, ((z >> U64(11)) + U64(1)) * _TWO_NEG_53


@njit(cache=True, nogil=True)
def stream_state(master, level, replicate, history):
    s = _mix(master + GAMMA + level)
    s = _mix(s + GAMMA + replicate)
    s = _mix(s + GAMMA + history)
    return s


@njit(cache=True, nogil=True)
def _birth(u, q_cum, region_lower, region_upper, q_density, total_source):
    """Inverse-CDF position sample for the piecewise-constant source."""
    k = np.searchsorted(q_cum, u)
    prev = q_cum[k - 1] if k > 0 else 0.0
    if q_density[k] <= 0.0:
        return region_lower[k]
    x = region_lower[k] + (u - prev) * total_source / q_density[k]
    if x > region_upper[k]:
        x = region_upper[k]
    return x


@njit(cache=True, inline="always")
def _deposit(x0, x1, mu, w, num, den, dx, cells, length):
    """Split the flight [x0, x1] over grid cells; track length is dx/|mu|."""
    if x1 == x0:
        return 0
    if mu > 0.0:
        xa, xb = x0, x1
    else:
        xa, xb = x1, x0
    per_x = w / abs(mu)
    mu2_per_x = mu * mu * per_x
    i = int(xa / dx)
    if i < 0:
        i = 0
    if i >= cells:
        i = cells - 1
    segments = 0
    cursor = xa
    while cursor < xb:
        hi = (i + 1) * dx if i < cells - 1 else length
        end = xb if xb < hi else hi
        seg = end - cursor
        if seg > 0.0:
            den[i] += per_x * seg
            num[i] += mu2_per_x * seg
            segments += 1
        cursor = end
        if i < cells - 1:
            i += 1
    return segments


@njit(cache=True, nogil=True)
def _track_one(
    x,
    mu,
    w,
    state,
    region_lower,
    region_upper,
    sigma_t,
    ratio,
    dx,
    cells,
    length,
    cutoff,
    survival,
    num,
    den,
    bnd,
):
    """Advance one history to termination.

    Returns (state, segments, code, final weight). bnd collects outgoing
    boundary sums as (current_0, flux_0, current_X, flux_X).
    """
    n_regions = region_upper.shape[0]
    r = np.searchsorted(region_upper, x)
    if r >= n_regions:
        r = n_regions - 1
    segments = 0
    while True:
        state, u = _uniform(state)
        s_collision = -np.log(u) / sigma_t[r]
        if mu > 0.0:
            s_boundary = (region_upper[r] - x) / mu
        else:
            s_boundary = (region_lower[r] - x) / mu
        if s_collision < s_boundary:
            x_next = x + mu * s_collision
            segments += _deposit(x, x_next, mu, w, num, den, dx, cells, length)
            x = x_next
            w *= ratio[r]
            if w <= 0.0:
                return state, segments, KILLED, 0.0
            if w < cutoff:
                state, u = _uniform(state)
                if u <= survival:
                    w /= survival
                else:
                    return state, segments, KILLED, w
            state, u = _uniform(state)
            mu = 2.0 * u - 1.0
            while mu == 0.0:
                state, u = _uniform(state)
                mu = 2.0 * u - 1.0
        elif mu > 0.0:
            x_next = region_upper[r]
            segments += _deposit(x, x_next, mu, w, num, den, dx, cells, length)
            x = x_next
            if r == n_regions - 1:
                bnd[2] += w
                bnd[3] += w / mu
                return state, segments, LEAK_RIGHT, w
            r += 1
        else:
            x_next = region_lower[r]
            segments += _deposit(x, x_next, mu, w, num, den, dx, cells, length)
            x = x_next
            if r == 0:
                bnd[0] += w
                bnd[1] += w / (-mu)
                return state, segments, LEAK_LEFT, w
            r -= 1


@njit(cache=True, nogil=True)
def _run_chunk(
    master,
    level,
    replicate,
    h_start,
    h_end,
    region_lower,
    region_upper,
    sigma_t,
    ratio,
    q_cum,
    q_density,
    total_source,
    dx,
    cells,
    length,
    cutoff,
    survival,
    num,
    den,
    bnd,
):
    """Histories [h_start, h_end) accumulated into chunk-private tallies."""
    segments = 0
    for h in range(h_start, h_end):
        state = stream_state(master, level, replicate, U64(h))
        state, ux = _uniform(state)
        x = _birth(ux, q_cum, region_lower, region_upper, q_density, total_source)
        state, um = _uniform(state)
        mu = 2.0 * um - 1.0
        while mu == 0.0:
            state, um = _uniform(state)
            mu = 2.0 * um - 1.0
        state, segs, _, _ = _track_one(
            x,
            mu,
            1.0,
            state,
            region_lower,
            region_upper,
            sigma_t,
            ratio,
            dx,
            cells,
            length,
            cutoff,
            survival,
            num,
            den,
            bnd,
        )
        segments += segs
    return segments
