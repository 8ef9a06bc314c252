"""Minimum expected energy to deliver a payload within one sampling interval.

For an interval of slots the problem is

    minimize    sum a_n[k,t] p_n[k,t]
    subject to  sum a_n[k,t] E[c_n[k,t](p)] >= v_bar
                sum_n a_n[k,t] <= 1            (RB exclusivity)
                sum_k a_n[k,t] <= theta        (per-BS load cap)
                sum_{n,k} a_n[k,t] p_n[k,t] <= p_bar

Everything is expressed through a common *price* ``r`` (watts per bit, the
inverse of the throughput multiplier).  At a price, every link's best power
solves ``dE[c]/dp = r`` and earns the score ``E[c(p)] - r p``; each slot then
picks the capped RB-to-BS matching of maximum score.  A slot whose power
budget binds simply sees a higher price.  The outer search moves ``r`` until
the delivered expected bits cross ``v_bar``; the assignments found on both
sides of the crossing are then re-solved power-only, which is a smooth convex
water-filling problem.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .channel import ChannelStats, LN2, marginal_from_nodes, power_at_price, rate_from_nodes
from .errors import Infeasible, IterationLimit

__all__ = [
    "Infeasible",
    "IterationLimit",
    "IntervalPlan",
    "IntervalSolver",
    "assign_links",
    "max_expected_throughput",
    "solve_interval",
    "power_only",
]

REL_BISECT = 1e-9
MAX_ITER = 200


@dataclass
class IntervalPlan:
    """Allocation for slots ``t_start .. t_end - 1`` (1-based).

    ``assign`` and ``power`` have shape (N, K, t_end - t_start).
    """

    t_start: int
    t_end: int
    assign: np.ndarray
    power: np.ndarray
    energy: float
    expected_bits: float

    @property
    def length(self) -> int:
        return self.t_end - self.t_start


def assign_links(score: np.ndarray, theta: int) -> np.ndarray:
    """Maximum-score RB-to-BS matching with at most ``theta`` RBs per BS.

    ``score`` is (N, K).  Links with non-positive score are never assigned.
    When no BS exceeds its cap under the per-RB best choice, that choice is
    optimal and is returned directly (ties to the lowest BS index); otherwise
    the problem is solved exactly as a rectangular assignment with each BS
    replicated ``theta`` times and one idle column per RB.
    """
    N, K = score.shape
    a = np.zeros((N, K), dtype=bool)
    if theta <= 0 or N == 0 or K == 0:
        return a
    pos = score > 0
    ks = np.arange(K)
    best = np.argmax(score, axis=0)
    take = pos[best, ks]
    counts = np.bincount(best[take], minlength=N)
    if counts.max(initial=0) <= theta:
        a[best[take], ks[take]] = True
        return a
    cap = min(int(theta), K)
    gain = np.where(pos, score, 0.0).T
    cost = np.hstack([-np.repeat(gain, cap, axis=1), np.zeros((K, K))])
    rows, cols = optimize.linear_sum_assignment(cost)
    for k, c in zip(rows, cols):
        if c < N * cap:
            n = c // cap
            if pos[n, k]:
                a[n, k] = True
    return a


def _stack_nodes(stats: ChannelStats, slots) -> tuple[np.ndarray, np.ndarray]:
    parts = [stats.slot_nodes(t) for t in slots]
    M = max(q.shape[-1] for q, _ in parts)
    N, K = stats.N, stats.K
    Q = np.empty((len(parts), N, K, M))
    W = np.zeros((len(parts), N, K, M))
    for i, (q, w) in enumerate(parts):
        m = q.shape[-1]
        Q[i, ..., :m] = q
        Q[i, ..., m:] = q[..., -1:]
        W[i, ..., :m] = w
    return Q, W


# ---------------------------------------------------------------------------
# Power-only water-filling on a fixed set of links.


def _link_power_and_slope(r_link, q, w, B, m0):
    """Per-link optimal power at its price and ``dp/dr`` (zero for idle links)."""
    p = power_at_price(r_link, q, w, B, m0)
    d = 1.0 + p[:, None] * q
    dm = -(B / LN2) * np.einsum("jm,jm->j", w, (q / d) ** 2)
    slope = np.where(p > 0, 1.0 / dm, 0.0)
    return p, slope


def _budget_prices(q, w, m0, slot_id, n_slots, B, p_bar):
    """Per-slot price at which the slot's links consume exactly ``p_bar``.

    Slots without links get price 0 (their budget never binds).  Newton on
    ``log P(e^x)`` with a bracket, vectorized over slots.
    """
    out = np.zeros(n_slots)
    has = np.bincount(slot_id, minlength=n_slots) > 0
    if not np.any(has):
        return out
    hi = np.full(n_slots, -np.inf)
    np.maximum.at(hi, slot_id, np.log(m0))
    lo = hi.copy()

    def total(x):
        p, s = _link_power_and_slope(np.exp(x)[slot_id], q, w, B, m0)
        P = np.bincount(slot_id, weights=p, minlength=n_slots)
        dP = np.bincount(slot_id, weights=s, minlength=n_slots)
        return P, dP

    # walk the lower end down until the slot overspends
    for _ in range(MAX_ITER):
        P, _ = total(lo)
        need = has & (P <= p_bar)
        if not np.any(need):
            break
        lo = np.where(need, lo - np.log(10.0), lo)
    else:
        raise IterationLimit("could not bracket the per-slot budget price")

    x = np.where(has, lo, 0.0)
    lo = np.where(has, lo, 0.0)
    hi = np.where(has, hi, 0.0)
    for _ in range(MAX_ITER):
        P, dP = total(x)
        over = P > p_bar
        lo = np.where(has & over, x, lo)
        hi = np.where(has & ~over, x, hi)
        err = np.where(P > 0, np.log(np.maximum(P, 1e-300) / p_bar), -np.inf)
        hit = np.abs(err) <= 1e-13
        done = ~has | hit | (hi - lo <= 1e-14 * np.maximum(1.0, np.abs(hi)))
        if np.all(done):
            break
        # d log P / dx = r P'(r) / P
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = np.exp(x) * dP / P
            xn = x - err / g1
        ok = np.isfinite(xn) & (xn > lo) & (xn < hi)
        x = np.where(done, x, np.where(ok, xn, 0.5 * (lo + hi)))
    else:
        raise IterationLimit("per-slot budget price did not converge")
    # converged points overspend by at most 1e-13 relative; otherwise take the budget side
    out = np.where(hit, x, hi)
    return np.where(has, np.exp(out), 0.0)


def power_only(q, w, slot_id, n_slots, B, p_bar, v_bar, m0=None, r0=None):
    """Minimum total power delivering ``v_bar`` expected bits over fixed links.

    ``q``/``w`` are (L, M) link node arrays and ``slot_id`` maps each link to
    its slot; ``r0`` is an optional starting price.  Returns
    ``(power (L,), bits, price)`` or raises :class:`Infeasible`.
    """
    L = len(slot_id)
    if L == 0:
        raise Infeasible("no links", max_bits=0.0, v_bar=v_bar)
    if m0 is None:
        m0 = marginal_from_nodes(np.zeros(L), q, w, B)

    def response(x, rb):
        r = np.exp(x)
        r_link = np.maximum(r, rb[slot_id])
        p, slope = _link_power_and_slope(r_link, q, w, B, m0)
        bits = float(rate_from_nodes(p, q, w, B).sum())
        # d bits / d log r = sum r c'(p) dp/dr over links priced by r itself
        free = rb[slot_id] < r
        return p, bits, float(np.sum(np.where(free, r_link * r_link * slope, 0.0)))

    x_hi = float(np.log(m0.max()))
    x0 = x_hi - 1.0 if r0 is None or not r0 > 0 else min(float(np.log(r0)), x_hi)
    rb = np.zeros(n_slots)

    # budget ignored first: valid whenever no slot overspends at the optimum
    x, (p, bits, _) = _solve_price(lambda x: response(x, rb), v_bar, x0, None, x_hi)
    per_slot = np.bincount(slot_id, weights=p, minlength=n_slots)
    if np.all(per_slot <= p_bar * (1 + 1e-12)):
        return p, bits, float(np.exp(x))

    rb = _budget_prices(q, w, m0, slot_id, n_slots, B, p_bar)
    x_lo = float(np.log(rb[rb > 0].min()))
    p, max_bits, _ = response(x_lo, rb)
    if max_bits < v_bar:
        raise Infeasible("power budget", max_bits=max_bits, v_bar=v_bar)
    x, (p, bits, _) = _solve_price(lambda x: response(x, rb), v_bar, max(x, x_lo), x_lo, x_hi)
    return p, bits, float(np.exp(x))


def _solve_price(response, v_bar, x0, x_lo, x_hi, rtol=1e-12):
    """Log-price at which delivered bits fall to ``v_bar`` from above.

    ``response(x)`` returns ``(power, bits, d bits / dx)`` with bits
    decreasing in ``x``.  Safeguarded Newton; bisection inside the bracket
    once both sides are known, downward steps of growing size before that.
    The returned point always delivers at least ``v_bar`` and at most
    ``v_bar (1 + rtol)`` unless the bracket collapses first.
    """
    lo, hi = x_lo, x_hi  # bits(lo) >= v_bar > bits(hi)
    best = None
    x = x0
    step = 1.0
    for _ in range(MAX_ITER):
        out = response(x)
        g = out[1] - v_bar
        if g >= 0:
            lo, best = x, (x, out)
            if g <= rtol * v_bar:
                return best
        else:
            hi = x
        if lo is not None and hi - lo <= 4e-16 * max(1.0, abs(lo)):
            return best if best is not None else (lo, response(lo))
        d = out[2]
        # aim at the middle of the accepted band so rounding lands inside it
        xn = x - (g - 0.5 * rtol * v_bar) / d if d < 0 else np.nan
        if lo is None:
            # no feasible point seen yet: Newton if it moves down, else growing steps
            if not (np.isfinite(xn) and xn < x):
                xn = x - step
                step *= 2.0
        elif not (np.isfinite(xn) and lo < xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    raise IterationLimit("throughput price did not converge")


# ---------------------------------------------------------------------------


class IntervalSolver:
    """Interval energies for one (stats, theta, p_bar).

    Per-slot quantities (budget prices, maximum throughput) are memoized and
    shared by every interval covering a slot, so graph construction computes
    each of them once per load cap.
    """

    def __init__(self, stats: ChannelStats, theta: int, p_bar: float):
        self.stats = stats
        self.theta = int(theta)
        self.p_bar = float(p_bar)
        self.B = stats.bandwidth
        self._m0 = {}
        self._slot_max = {}
        self._upper = {}

    # -- per-slot building blocks ------------------------------------------------

    def _m0_of(self, t):
        m = self._m0.get(t)
        if m is None:
            q, w = self.stats.slot_nodes(t)
            m = marginal_from_nodes(np.zeros(q.shape[:-1]), q, w, self.B)
            self._m0[t] = m
        return m

    def _respond(self, Q, W, M0, r_slots):
        """Assignment, power and rate per slot at the given per-slot prices."""
        r = np.asarray(r_slots, dtype=float)[:, None, None]
        p = power_at_price(np.broadcast_to(r, M0.shape), Q, W, self.B, M0)
        rate = rate_from_nodes(p, Q, W, self.B)
        score = rate - r * p
        A = np.stack([assign_links(score[i], self.theta) for i in range(len(score))])
        return A, np.where(A, p, 0.0), np.where(A, rate, 0.0)

    def _upper_bound(self, t):
        """Cheap bound on a slot's expected bits: every RB at full budget."""
        u = self._upper.get(t)
        if u is None:
            q, w = self.stats.slot_nodes(t)
            rate = rate_from_nodes(np.full(q.shape[:-1], self.p_bar), q, w, self.B)
            u = float(rate.max(axis=0).sum()) if self.theta > 0 else 0.0
            self._upper[t] = u
        return u

    def slot_max(self, t):
        """``(max_bits, assign, budget_price)`` for 0-based slot ``t``.

        The budget price is the lowest price at which the slot's best response
        stays within ``p_bar``.
        """
        hit = self._slot_max.get(t)
        if hit is not None:
            return hit
        N, K = self.stats.N, self.stats.K
        if self.theta <= 0:
            res = (0.0, np.zeros((N, K), dtype=bool), np.inf)
            self._slot_max[t] = res
            return res
        q, w = self.stats.slot_nodes(t)
        Q, W, M0 = q[None], w[None], self._m0_of(t)[None]

        def at(r):
            A, p, rate = self._respond(Q, W, M0, [r])
            return A[0], p[0].sum()

        hi = float(M0.max())
        A_hi, _ = at(hi)
        lo = hi
        for _ in range(MAX_ITER):
            lo /= 10.0
            A_lo, P_lo = at(lo)
            if P_lo > self.p_bar:
                break
            hi, A_hi = lo, A_lo
        else:
            raise IterationLimit("slot power never exceeds the budget")
        for _ in range(MAX_ITER):
            if np.array_equal(A_lo, A_hi) or hi / lo - 1.0 <= REL_BISECT:
                break
            mid = np.sqrt(lo * hi)
            A_mid, P_mid = at(mid)
            if P_mid > self.p_bar:
                lo, A_lo = mid, A_mid
            else:
                hi, A_hi = mid, A_mid
        best = (-1.0, None)
        for A in _unique([A_lo, A_hi]):
            bits = self._fill_budget(t, A)
            if bits > best[0]:
                best = (bits, A)
        res = (best[0], best[1], hi)
        self._slot_max[t] = res
        return res

    def _fill_budget(self, t, A):
        """Expected bits of links ``A`` in slot ``t`` water-filled to ``p_bar``."""
        if not A.any():
            return 0.0
        q, w = self.stats.slot_nodes(t)
        qL, wL, m0 = q[A], w[A], self._m0_of(t)[A]
        sid = np.zeros(len(qL), dtype=int)
        r = _budget_prices(qL, wL, m0, sid, 1, self.B, self.p_bar)
        p = power_at_price(np.full(len(qL), r[0]), qL, wL, self.B, m0)
        return float(rate_from_nodes(p, qL, wL, self.B).sum())

    # -- interval level ---------------------------------------------------------------

    def max_throughput(self, t0, t1):
        """Maximum expected bits over 0-based slots ``t0 .. t1 - 1``."""
        return float(sum(self.slot_max(t)[0] for t in range(t0, t1)))

    def _dual_search(self, Q, W, M0, v_bar, floor=None):
        """Bracket the price at which delivered bits cross ``v_bar``.

        ``floor`` holds per-slot minimum prices (budget-aware search).
        Returns the assignments just below and above the crossing price, the
        per-slot power of the low-price (sufficient) side and that price.
        """
        floor = np.zeros(len(Q)) if floor is None else floor

        def at(r):
            A, p, rate = self._respond(Q, W, M0, np.maximum(r, floor))
            return A, rate.sum(), p.sum(axis=(1, 2))

        hi = float(M0.max())
        A_hi, bits_hi, P_hi = at(hi)
        if bits_hi >= v_bar:
            return A_hi, A_hi, P_hi, hi
        lo = hi
        for _ in range(MAX_ITER):
            lo /= 10.0
            A_lo, bits_lo, P_lo = at(lo)
            if bits_lo >= v_bar:
                break
            if floor.any() and lo < floor.min():
                return A_lo, A_lo, P_lo, lo
            hi, A_hi = lo, A_lo
        else:
            raise IterationLimit("could not bracket the throughput price")
        for _ in range(MAX_ITER):
            if np.array_equal(A_lo, A_hi) or hi / lo - 1.0 <= REL_BISECT:
                return A_lo, A_hi, P_lo, lo
            mid = np.sqrt(lo * hi)
            A_mid, bits_mid, P_mid = at(mid)
            if bits_mid >= v_bar:
                lo, A_lo, P_lo = mid, A_mid, P_mid
            else:
                hi, A_hi = mid, A_mid
        raise IterationLimit("price bisection did not converge")

    def _power_only(self, Q, W, M0, A, v_bar, r0):
        sl, n, k = np.nonzero(A)
        return power_only(Q[sl, n, k], W[sl, n, k], sl, len(Q), self.B, self.p_bar, v_bar, M0[sl, n, k], r0)

    def solve(self, t_start: int, t_end: int, v_bar: float) -> IntervalPlan:
        """Optimal plan for 1-based slots ``t_start .. t_end - 1``."""
        T = self.stats.T
        if not (1 <= t_start < t_end <= T + 1):
            raise ValueError(f"invalid interval [{t_start}, {t_end}) for horizon {T}")
        if not v_bar > 0:
            raise ValueError("v_bar must be positive")
        slots = range(t_start - 1, t_end - 1)
        if self.theta <= 0 or sum(self._upper_bound(t) for t in slots) < v_bar:
            raise Infeasible(max_bits=self.max_throughput(t_start - 1, t_end - 1), v_bar=v_bar, theta=self.theta, interval=(t_start, t_end))

        Q, W = _stack_nodes(self.stats, slots)
        M0 = np.stack([self._m0_of(t) for t in slots])

        cands = []
        A_lo, A_hi, P_lo, r_lo = self._dual_search(Q, W, M0, v_bar)
        cands += _blend(A_lo, A_hi)
        best = self._best_of(Q, W, M0, cands, v_bar, r_lo)
        # the budget-free dual is exact only when its response fits every slot budget
        if best is None or np.any(P_lo > self.p_bar):
            floor = np.array([self.slot_max(t)[2] for t in slots])
            A_lo, A_hi, _, r_lo = self._dual_search(Q, W, M0, v_bar, floor)
            extra = _blend(A_lo, A_hi) + [np.stack([self.slot_max(t)[1] for t in slots])]
            more = self._best_of(Q, W, M0, extra, v_bar, r_lo)
            if more is not None and (best is None or more[0] < best[0]):
                best = more
        if best is None:
            raise Infeasible(max_bits=self.max_throughput(t_start - 1, t_end - 1), v_bar=v_bar, theta=self.theta, interval=(t_start, t_end))

        energy, A, p_links, bits = best
        power = np.zeros(A.shape)
        power[A] = p_links
        # links left without power would only occupy RBs
        A = power > 0
        # (L, N, K) -> (N, K, L)
        return IntervalPlan(
            t_start=t_start,
            t_end=t_end,
            assign=np.moveaxis(A, 0, -1).copy(),
            power=np.moveaxis(power, 0, -1).copy(),
            energy=float(p_links.sum()),
            expected_bits=bits,
        )

    def _best_of(self, Q, W, M0, cands, v_bar, r0):
        best = None
        for A in _unique(cands):
            if not A.any():
                continue
            try:
                p, bits, _ = self._power_only(Q, W, M0, A, v_bar, r0)
            except Infeasible:
                continue
            e = float(p.sum())
            if best is None or e < best[0]:
                best = (e, A, p, bits)
        return best


def _unique(arrays):
    seen = []
    for a in arrays:
        if a is None:
            continue
        if not any(np.array_equal(a, b) for b in seen):
            seen.append(a)
    return seen


def _blend(A_lo, A_hi, max_diff=4):
    """Both bracket assignments plus every per-slot mix of them (few slots differ)."""
    diff = [i for i in range(len(A_lo)) if not np.array_equal(A_lo[i], A_hi[i])]
    if not diff or len(diff) > max_diff:
        return [A_lo, A_hi]
    out = []
    for choice in itertools.product((0, 1), repeat=len(diff)):
        A = A_lo.copy()
        for i, c in zip(diff, choice):
            if c:
                A[i] = A_hi[i]
        out.append(A)
    return out


def max_expected_throughput(stats: ChannelStats, t_start: int, t_end: int, theta: int, p_bar: float) -> float:
    """Largest expected bits deliverable over 1-based slots ``t_start .. t_end - 1``."""
    return IntervalSolver(stats, theta, p_bar).max_throughput(t_start - 1, t_end - 1)


def solve_interval(stats: ChannelStats, t_start: int, t_end: int, theta: int, p_bar: float, v_bar: float) -> IntervalPlan:
    """Minimum-energy plan for one interval; raises :class:`Infeasible`."""
    return IntervalSolver(stats, theta, p_bar).solve(t_start, t_end, v_bar)
