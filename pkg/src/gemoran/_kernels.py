"""numba kernels for the event loops.

All simulators share :func:`run_loop`; the per-event functions are also
called directly (from Python) by the single-step API so both paths consume
the random stream identically.
"""

import math

import numpy as np
from numba import njit

MODEL_JUMP = 0
MODEL_GRAPH = 1
MODEL_EXTENDED = 2
# graph with every ordered triple at rate 1/N (total N^2), twice the jump clock
MODEL_GRAPH_UNIT = 3

KIND_REPRODUCTION = 0
KIND_ACQUISITION = 1
KIND_LOSS = 2

# accumulator slots
ACC_ONE = 0
ACC_RHO1 = 1
ACC_RHO2 = 2
ACC_RHO3 = 3
ACC_GAP2 = 4
ACC_INT_RHO1 = 5
ACC_INT_EXCESS = 6
ACC_JUMP_SQ = 7
N_ACC = 8

# snapshot columns
SNAP_Z = 0
SNAP_RHO2 = 1
SNAP_RHO3 = 2
SNAP_GAP2 = 3
SNAP_EVENTS = 4
N_SNAP = 5

# trace columns (int part): kind, target, parent_a, parent_b, new, old, S1, S2, S3
N_TRACE = 9

STATUS_DONE = 0
STATUS_TRACE_FULL = 1
STATUS_OVERFLOW = 2


@njit(cache=True)
def popcount(w):
    c = 0
    while w:
        w &= w - 1
        c += 1
    return c


TWO53 = 9007199254740992.0
LIM53 = np.int64(1) << 53


@njit(cache=True)
def random_bits53(rng):
    """53 fair bits: ``Generator.random`` is ``(raw >> 11) * 2**-53``."""
    return np.int64(rng.random() * TWO53)


MASK53 = np.uint64((1 << 53) - 1)
LEMIRE_MAX = 1 << 11


@njit(cache=True)
def uniform_index(rng, n):
    """Exactly uniform integer in ``[0, n)``.

    Lemire's multiply-shift on 53 fair bits (the product fits in uint64
    for n <= 2**11), with the usual rejection of the biased low slice.
    """
    if n > LEMIRE_MAX:
        if n > LIM53:
            return rng.integers(0, n)
        lim = LIM53 - LIM53 % n
        while True:
            x = random_bits53(rng)
            if x < lim:
                return x % n
    un = np.uint64(n)
    m = np.uint64(random_bits53(rng)) * un
    low = m & MASK53
    if low < un:
        thresh = np.uint64(LIM53 % n)
        while low < thresh:
            m = np.uint64(random_bits53(rng)) * un
            low = m & MASK53
    return np.int64(m >> np.uint64(53))


@njit(cache=True)
def binomial_half(rng, n):
    """Exact Binomial(n, 1/2): count the set bits of n fair random bits."""
    total = 0
    while n > 0:
        w = random_bits53(rng)
        if n < 53:
            w &= (np.int64(1) << n) - 1
            n = 0
        else:
            n -= 53
        total += popcount(w)
    return total


@njit(cache=True)
def set_count(counts, sums, i, new):
    old = counts[i]
    counts[i] = new
    o2 = old * old
    n2 = new * new
    sums[0] += new - old
    sums[1] += n2 - o2
    sums[2] += n2 * new - o2 * old
    sums[3] += n2 * n2 - o2 * o2


@njit(cache=True)
def jump_event(counts, rng, distinct):
    """Dying individual and both parents uniform, offspring Bin(k+l, 1/2)."""
    N = counts.shape[0]
    n = uniform_index(rng, N)
    a = uniform_index(rng, N)
    if distinct:
        b = uniform_index(rng, N - 1)
        if b >= a:
            b += 1
    else:
        b = uniform_index(rng, N)
    m = binomial_half(rng, counts[a] + counts[b])
    return n, a, b, m


@njit(cache=True)
def graph_event(counts, rng):
    """Uniform triple (h, i, j); h gets Bin(z_i, 1/2) + Bin(z_j, 1/2)."""
    N = counts.shape[0]
    h = uniform_index(rng, N)
    i = uniform_index(rng, N)
    j = uniform_index(rng, N)
    new = binomial_half(rng, counts[i]) + binomial_half(rng, counts[j])
    return h, i, j, new


@njit(cache=True)
def _pick_parent(counts, rng, alpha, exclude):
    N = counts.shape[0]
    if alpha == 0.0:
        while True:
            a = uniform_index(rng, N)
            if a != exclude:
                return a
    logq = math.log1p(-alpha / N)
    # reference exponent maximising q**k over the current counts
    ref = counts[0]
    for c in counts:
        if alpha > 0.0:
            if c < ref:
                ref = c
        elif c > ref:
            ref = c
    while True:
        a = uniform_index(rng, N)
        if a == exclude:
            continue
        if rng.random() < math.exp((counts[a] - ref) * logq):
            return a


@njit(cache=True)
def _pick_by_count(counts, rng, s1):
    r = uniform_index(rng, s1)
    acc = 0
    for i in range(counts.shape[0]):
        acc += counts[i]
        if r < acc:
            return i
    return counts.shape[0] - 1


@njit(cache=True)
def extended_event(counts, s1, rng, mu, nu, beta, alpha, distinct):
    """Competing reproduction / acquisition / loss clocks.

    Returns (kind, target, parent_a, parent_b, new_count).
    """
    N = counts.shape[0]
    rep = 0.5 * N * N
    acq = N * mu + nu * s1
    loss = beta * s1
    u = rng.random() * (rep + acq + loss)
    if u < rep:
        n = uniform_index(rng, N)
        a = _pick_parent(counts, rng, alpha, -1)
        b = _pick_parent(counts, rng, alpha, a if distinct else -1)
        m = binomial_half(rng, counts[a] + counts[b])
        return KIND_REPRODUCTION, n, a, b, m
    if u < rep + acq or loss == 0.0:
        if nu * s1 == 0.0 or rng.random() * acq < N * mu:
            i = uniform_index(rng, N)
        else:
            i = _pick_by_count(counts, rng, s1)
        return KIND_ACQUISITION, i, -1, -1, counts[i] + 1
    i = _pick_by_count(counts, rng, s1)
    return KIND_LOSS, i, -1, -1, counts[i] - 1


@njit(cache=True)
def total_rate(model, N, s1, mu, nu, beta):
    if model == MODEL_GRAPH_UNIT:
        return float(N) * N
    if model == MODEL_JUMP or model == MODEL_GRAPH:
        return 0.5 * N * N
    return 0.5 * N * N + N * mu + (nu + beta) * s1


@njit(cache=True)
def run_loop(model, counts, sums, rng, t, t_end, limit, rates, distinct,
             record_t, rec_i, snaps, acc, events, trace_t, trace_i):
    """Advance from time ``t`` to ``t_end`` (or until the trace buffer fills).

    ``rates`` holds (mu, nu, beta, alpha).  Snapshots are written for every
    ``record_t[rec_i:] < next event time``; ``acc`` receives exact integrals
    of the piecewise-constant statistics.  Returns (t, rec_i, events,
    n_trace, status).
    """
    N = counts.shape[0]
    inv_n = 1.0 / N
    mu = rates[0]
    nu = rates[1]
    beta = rates[2]
    alpha = rates[3]
    cap = trace_t.shape[0]
    n_rec = record_t.shape[0]
    n_trace = 0
    while True:
        s1 = sums[0]
        s2 = sums[1]
        s3 = sums[2]
        rho1 = s1 * inv_n
        rho2 = (s2 - s1) * inv_n
        rho3 = (s3 - 3 * s2 + 2 * s1) * inv_n
        excess = rho2 - rho1 * rho1
        gap = abs(excess)
        rate = total_rate(model, N, s1, mu, nu, beta)
        t_next = t + rng.exponential(1.0 / rate)
        while rec_i < n_rec and record_t[rec_i] < t_next:
            snaps[rec_i, SNAP_Z] = rho1
            snaps[rec_i, SNAP_RHO2] = rho2
            snaps[rec_i, SNAP_RHO3] = rho3
            snaps[rec_i, SNAP_GAP2] = gap
            snaps[rec_i, SNAP_EVENTS] = events
            rec_i += 1
        seg_end = t_next if t_next < t_end else t_end
        length = seg_end - t
        w = math.exp(-t) * -math.expm1(-length)
        acc[ACC_ONE] += w
        acc[ACC_RHO1] += w * rho1
        acc[ACC_RHO2] += w * rho2
        acc[ACC_RHO3] += w * rho3
        acc[ACC_GAP2] += w * gap
        acc[ACC_INT_RHO1] += length * rho1
        acc[ACC_INT_EXCESS] += length * excess
        if t_next > t_end:
            return t_end, rec_i, events, n_trace, STATUS_DONE

        kind = KIND_REPRODUCTION
        if model == MODEL_JUMP:
            target, pa, pb, new = jump_event(counts, rng, distinct)
        elif model == MODEL_GRAPH or model == MODEL_GRAPH_UNIT:
            target, pa, pb, new = graph_event(counts, rng)
        else:
            kind, target, pa, pb, new = extended_event(counts, s1, rng, mu, nu, beta, alpha, distinct)
        if new > limit:
            return t_next, rec_i, events, n_trace, STATUS_OVERFLOW
        old = counts[target]
        set_count(counts, sums, target, new)
        d = (new - old) * inv_n
        acc[ACC_JUMP_SQ] += d * d
        events += 1
        t = t_next
        if cap > 0:
            trace_t[n_trace] = t
            trace_i[n_trace, 0] = kind
            trace_i[n_trace, 1] = target
            trace_i[n_trace, 2] = pa
            trace_i[n_trace, 3] = pb
            trace_i[n_trace, 4] = new
            trace_i[n_trace, 5] = old
            trace_i[n_trace, 6] = sums[0]
            trace_i[n_trace, 7] = sums[1]
            trace_i[n_trace, 8] = sums[2]
            n_trace += 1
            if n_trace == cap:
                return t, rec_i, events, n_trace, STATUS_TRACE_FULL

