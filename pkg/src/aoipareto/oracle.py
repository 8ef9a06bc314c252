"""Exhaustive reference solvers for tiny instances.

These enumerate every assignment table (and every sampling sequence) and
solve the power-only problem for each by plain geometric bisection.  They
share nothing with the interval solver beyond the per-link power kernel and
exist to check it.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .allocator import IntervalPlan
from .errors import Infeasible, InstanceTooLarge
from .channel import ChannelStats, power_at_price, rate_from_nodes

__all__ = [
    "InstanceTooLarge",
    "brute_force_interval",
    "brute_force_schedule",
    "slot_tables",
    "sampling_sequences",
]

MAX_LEN, MAX_N, MAX_K = 3, 2, 3
_BISECT_STEPS = 64


@lru_cache(maxsize=64)
def slot_tables(N: int, K: int, theta: int) -> np.ndarray:
    """All maximal per-slot assignment tables, shape (S, N, K).

    A table is maximal when no further link can be switched on without
    breaking exclusivity or the cap.  Adding a link never raises the minimum
    energy (it may carry zero power), so non-maximal tables are dominated.
    """
    out = []
    for choice in itertools.product(range(N + 1), repeat=K):
        a = np.zeros((N, K), dtype=bool)
        for k, c in enumerate(choice):
            if c < N:
                a[c, k] = True
        load = a.sum(axis=1)
        if np.any(load > theta):
            continue
        free_rb = ~a.any(axis=0)
        if free_rb.any() and np.any(load < theta):
            continue
        out.append(a)
    arr = np.array(out, dtype=bool).reshape(-1, N, K)
    arr.setflags(write=False)
    return arr


def _geo_bisect(f, lo, hi):
    """Elementwise root of a function that is True below and False above."""
    for _ in range(_BISECT_STEPS):
        mid = np.sqrt(lo * hi)
        below = f(mid)
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return lo, hi


def brute_force_interval(stats: ChannelStats, t_start: int, t_end: int, theta: int, p_bar: float, v_bar: float) -> IntervalPlan:
    """Global minimum-energy plan for 1-based slots ``t_start .. t_end - 1``."""
    L = t_end - t_start
    if L > MAX_LEN or stats.N > MAX_N or stats.K > MAX_K:
        raise InstanceTooLarge(f"oracle limited to length {MAX_LEN}, N {MAX_N}, K {MAX_K}")
    if not (1 <= t_start < t_end <= stats.T + 1):
        raise ValueError("invalid interval")
    N, K, B = stats.N, stats.K, stats.bandwidth
    if theta <= 0:
        raise Infeasible("no RB may be assigned", max_bits=0.0, v_bar=v_bar)

    per_slot = slot_tables(N, K, int(min(theta, K)))
    tables = np.array(list(itertools.product(per_slot, repeat=L)), dtype=bool)  # (S, L, N, K)
    S = len(tables)

    nodes = [stats.slot_nodes(t) for t in range(t_start - 1, t_end - 1)]
    M = max(q.shape[-1] for q, _ in nodes)
    Q = np.ones((L, N, K, M))
    W = np.zeros((L, N, K, M))
    for i, (q, w) in enumerate(nodes):
        Q[i, ..., : q.shape[-1]] = q
        W[i, ..., : q.shape[-1]] = w
    Qb = np.broadcast_to(Q, (S, L, N, K, M))
    Wb = np.broadcast_to(W, (S, L, N, K, M))
    r_top = float((B / np.log(2.0)) * np.einsum("lnkm,lnkm->lnk", W, Q).max()) * 2.0

    def slot_power(r):  # r: (S, L)
        p = power_at_price(np.broadcast_to(r[..., None, None], tables.shape), Qb, Wb, B)
        return np.where(tables, p, 0.0)

    # the price at which a slot spends exactly p_bar depends only on the slot
    # and its own table, so it is found once per (slot, slot table) pair
    n1 = len(per_slot)
    pairs = np.broadcast_to(per_slot[None], (L, n1, N, K))
    Qs = np.broadcast_to(Q[:, None], (L, n1, N, K, M))
    Ws = np.broadcast_to(W[:, None], (L, n1, N, K, M))

    def pair_power(r):  # r: (L, n1)
        p = power_at_price(np.broadcast_to(r[..., None, None], pairs.shape), Qs, Ws, B)
        return np.where(pairs, p, 0.0).sum(axis=(2, 3))

    _, rb_pair = _geo_bisect(lambda r: pair_power(r) > p_bar, np.full((L, n1), r_top * 1e-30), np.full((L, n1), r_top))
    rb_pair = np.where(pairs.any(axis=(2, 3)), rb_pair, 0.0)
    idx = np.array(list(itertools.product(range(n1), repeat=L)), dtype=int).reshape(S, L)
    r_budget = rb_pair[np.arange(L)[None, :], idx]

    def bits_at(r):  # r: (S,)
        eff = np.maximum(r[:, None], r_budget)
        p = slot_power(eff)
        rate = rate_from_nodes(p, Qb, Wb, B)
        return p, np.where(tables, rate, 0.0).sum(axis=(1, 2, 3))

    _, max_bits = bits_at(np.full(S, r_top * 1e-30))
    ok = max_bits >= v_bar
    if not ok.any():
        raise Infeasible(max_bits=float(max_bits.max()), v_bar=v_bar, interval=(t_start, t_end))
    # the oracle keeps the feasible side of the throughput crossing
    r_lo, _ = _geo_bisect(lambda r: bits_at(r)[1] >= v_bar, np.full(S, r_top * 1e-30), np.full(S, r_top))
    p, bits = bits_at(r_lo)
    energy = np.where(ok, p.sum(axis=(1, 2, 3)), np.inf)
    best = int(np.argmin(energy))
    return IntervalPlan(
        t_start=t_start,
        t_end=t_end,
        assign=np.moveaxis(tables[best], 0, -1).copy(),
        power=np.moveaxis(p[best], 0, -1).copy(),
        energy=float(energy[best]),
        expected_bits=float(bits[best]),
    )


def sampling_sequences(T: int, tau_bar: int):
    """Every instants list ``1 = t_0 < ... < t_{I+1} = T + 1`` with gaps in ``1..tau_bar``."""

    def rec(t):
        if t == T + 1:
            yield (T + 1,)
            return
        for c in range(1, tau_bar + 1):
            if t + c <= T + 1:
                for rest in rec(t + c):
                    yield (t,) + rest

    yield from rec(1)


def brute_force_schedule(stats: ChannelStats, theta: int, tau_bar: int, p_bar: float, v_bar: float):
    """Minimum total energy over all sampling sequences and assignments.

    Returns ``(energy, instants)`` or ``(inf, None)`` when nothing is feasible.
    Interval energies are independent given the sequence, so each interval's
    exhaustive minimum is computed once and summed per sequence.
    """
    memo = {}

    def cost(i, j):
        if (i, j) not in memo:
            try:
                memo[i, j] = brute_force_interval(stats, i, j, theta, p_bar, v_bar).energy
            except Infeasible:
                memo[i, j] = np.inf
        return memo[i, j]

    best = (np.inf, None)
    for seq in sampling_sequences(stats.T, tau_bar):
        e = sum(cost(a, b) for a, b in zip(seq[:-1], seq[1:]))
        if e < best[0]:
            best = (e, list(seq))
    return best
