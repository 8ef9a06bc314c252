"""Independent constraint audit, AoI reconstruction and Monte Carlo evaluation.

Nothing here calls the solvers: throughput is recomputed link by link with
the scalar capacity functions, and realizations are drawn fresh per run.

Realized timeliness is scored per *packet epoch*.  For schemes with sampling
instants an epoch is the interval from one instant to the next; for schemes
without sampling control the source is treated as zero-wait, taking a new
sample right after each delivery, and an epoch runs from a sample to its
delivery.  An epoch is satisfied when its packet is delivered within
``tau_bar`` slots of being sampled (and before the next sample).  A run's
success rate is the fraction of horizon slots that lie in satisfied epochs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelStats, LN2, expected_capacity, rate_from_nodes
from .pareto import energy_dbm
from .scenario import ScenarioConfig
from .strategy import Strategy

__all__ = [
    "Violation",
    "EvalReport",
    "audit_strategy",
    "aoi_trace",
    "account",
    "realized_slot_bits",
    "score_run",
    "monte_carlo_eval",
    "REPORT_COLUMNS",
    "report_row",
    "sample_feasible_strategy",
]

POWER_RTOL = 1e-9
BITS_RTOL = 1e-6
ENERGY_RTOL = 1e-9
REPORT_COLUMNS = ["scheme", "theta", "energy_dbm_slots", "rb_total", "aoi_success_rate", "runs", "seed", "feasible"]


@dataclass(frozen=True)
class Violation:
    """One broken constraint; ``index`` uses 1-based slots, ``margin`` < 0 is the shortfall."""

    constraint: str
    index: tuple
    margin: float

    def __str__(self):
        return f"{self.constraint} at {self.index}: margin {self.margin:.6g}"


def account(strategy: Strategy) -> tuple[int, float, int]:
    """``(theta_used, energy, rb_total)`` recomputed from the raw tables."""
    a = np.asarray(strategy.assign, dtype=bool)
    theta_used = int(a.sum(axis=1).max(initial=0))
    energy = float(np.where(a, strategy.power, 0.0).sum())
    return theta_used, energy, int(a.sum())


def _expected_slot_bits(strategy: Strategy, stats: ChannelStats) -> np.ndarray:
    bits = np.zeros(stats.T)
    for n, k, t in zip(*np.nonzero(strategy.assign)):
        p = float(strategy.power[n, k, t])
        bits[t] += expected_capacity(max(p, 0.0), stats.g[n, k, t], stats.kappa[n, k, t], stats.bandwidth, stats.noise_w)
    return bits


def audit_strategy(strategy: Strategy, stats: ChannelStats, config: ScenarioConfig, theta: int | None = None) -> list[Violation]:
    """Every constraint the strategy breaks; empty when fully feasible.

    ``theta`` overrides the load cap checked (default: the strategy's own).
    Sampling-interval, throughput and AoI checks apply only to strategies
    with sampling instants.
    """
    out: list[Violation] = []
    a = np.asarray(strategy.assign, dtype=bool)
    p = np.asarray(strategy.power, dtype=float)
    if a.shape != stats.dims:
        return [Violation("shape", tuple(a.shape), float("nan"))]
    cap = strategy.theta if theta is None else theta
    p_bar = config.p_bar_w
    tau_bar = config.tau_bar_slots
    v_bar = config.v_bar_bits

    for n, k, t in zip(*np.nonzero(p < 0)):
        out.append(Violation("negative_power", (int(n), int(k), int(t) + 1), float(p[n, k, t])))
    for n, k, t in zip(*np.nonzero(~a & (p != 0))):
        out.append(Violation("power_without_rb", (int(n), int(k), int(t) + 1), -abs(float(p[n, k, t]))))
    per_rb = a.sum(axis=0)
    for k, t in zip(*np.nonzero(per_rb > 1)):
        out.append(Violation("rb_exclusivity", (int(k), int(t) + 1), float(1 - per_rb[k, t])))
    load = a.sum(axis=1)
    for n, t in zip(*np.nonzero(load > cap)):
        out.append(Violation("load_cap", (int(n), int(t) + 1), float(cap - load[n, t])))
    spent = np.where(a, p, 0.0).sum(axis=(0, 1))
    for t in np.nonzero(spent > p_bar * (1 + POWER_RTOL))[0]:
        out.append(Violation("power_budget", (int(t) + 1,), float(p_bar - spent[t])))
    _, energy, _ = account(strategy)
    if abs(energy - strategy.energy) > ENERGY_RTOL * max(abs(energy), 1e-300):
        out.append(Violation("energy_accounting", (), float(strategy.energy - energy)))

    if strategy.instants is None:
        return out
    inst = strategy.instants
    T = stats.T
    if inst[0] != 1:
        out.append(Violation("sampling_start", (inst[0],), float(1 - inst[0])))
    if inst[-1] != T + 1:
        out.append(Violation("sampling_end", (inst[-1],), float(T + 1 - inst[-1])))
    slot_bits = _expected_slot_bits(strategy, stats)
    for i, (lo, hi) in enumerate(zip(inst[:-1], inst[1:])):
        gap = hi - lo
        if gap < 1 or gap > tau_bar:
            out.append(Violation("sampling_interval", (i, lo, hi), float(min(gap - 1, tau_bar - gap))))
        if gap < 1 or lo < 1 or hi > T + 1:
            continue
        bits = float(slot_bits[lo - 1 : hi - 1].sum())
        if bits < v_bar * (1 - BITS_RTOL):
            out.append(Violation("expected_throughput", (lo, hi), bits - v_bar))
    # AoI reconstruction with the expected-payload success criterion
    s, samples = _expected_success(slot_bits, inst, v_bar)
    tau = aoi_trace(s, samples)
    for d in np.nonzero(s)[0]:
        age = tau[d + 1]
        if age > tau_bar:
            out.append(Violation("aoi_peak", (int(d) + 1,), float(tau_bar - age)))
    return out


def _expected_success(slot_bits, instants, v_bar):
    """Success indicators ``s[1..T]`` (as a 0-based array) under expected bits."""
    T = len(slot_bits)
    s = np.zeros(T, dtype=bool)
    for lo, hi in zip(instants[:-1], instants[1:]):
        cum = np.cumsum(slot_bits[lo - 1 : hi - 1])
        hit = np.nonzero(cum >= v_bar * (1 - BITS_RTOL))[0]
        if hit.size:
            t = lo + int(hit[0]) + 1  # recognised at the end of the following slot index
            if t <= T:
                s[t - 1] = True
    return s, list(instants[:-1])


def aoi_trace(success, instants) -> np.ndarray:
    """Age ``tau[1..T+1]`` (returned 0-based, length ``T + 1``).

    ``success[t-1]`` is the indicator ``s[t]``: the payload sampled at the
    latest instant ``t0 < t`` has been delivered by slot ``t - 1``.  Then
    ``tau[t+1] = t - t0``; otherwise ``tau[t+1] = tau[t] + 1``.  ``tau[1] = 0``.
    """
    s = np.asarray(success, dtype=bool)
    T = len(s)
    inst = sorted(int(x) for x in instants)
    tau = np.zeros(T + 1, dtype=int)
    j = -1  # index of the latest instant < t
    for t in range(1, T + 1):
        while j + 1 < len(inst) and inst[j + 1] < t:
            j += 1
        if s[t - 1] and j >= 0:
            tau[t] = t - inst[j]
        else:
            tau[t] = tau[t - 1] + 1
    return tau


def realized_slot_bits(strategy: Strategy, stats: ChannelStats, rng: np.random.Generator) -> np.ndarray:
    """Bits carried in each slot under one fading realization of the assigned links."""
    a = np.asarray(strategy.assign, dtype=bool)
    n, k, t = np.nonzero(a)
    kap = stats.kappa[n, k, t]
    h = rng.gamma(kap, stats.g[n, k, t] / kap)
    c = stats.bandwidth * np.log1p(strategy.power[n, k, t] * h / stats.noise_w) / LN2
    return np.bincount(t, weights=c, minlength=stats.T)


def score_run(slot_bits, instants, tau_bar: int, v_bar: float):
    """``(success_rate, s, samples, epoch_bits)`` for one realization.

    ``epoch_bits`` lists the realized bits of each fixed interval (empty for
    zero-wait evaluation).
    """
    T = len(slot_bits)
    need = v_bar * (1 - BITS_RTOL)
    s = np.zeros(T, dtype=bool)
    good = 0
    samples = []
    epoch_bits = []
    if instants is not None:
        for lo, hi in zip(instants[:-1], instants[1:]):
            samples.append(lo)
            seg = slot_bits[lo - 1 : hi - 1]
            epoch_bits.append(float(seg.sum()))
            cum = np.cumsum(seg[: min(tau_bar, hi - lo)])
            hit = np.nonzero(cum >= need)[0]
            if hit.size:
                good += hi - lo
                t = lo + int(hit[0]) + 1
                if t <= T:
                    s[t - 1] = True
    else:
        a = 1
        while a <= T:
            samples.append(a)
            cum = np.cumsum(slot_bits[a - 1 :])
            hit = np.nonzero(cum >= need)[0]
            if hit.size:
                d = a + int(hit[0])  # delivered at the end of slot d
                if d - a + 1 <= tau_bar:
                    good += d - a + 1
                if d + 1 <= T:
                    s[d] = True
                a = d + 1
            else:
                # undelivered at the horizon end: late only if its deadline has passed
                if T - a + 1 < tau_bar:
                    good += T - a + 1
                break
    return good / T, s, samples, epoch_bits


@dataclass
class EvalReport:
    scheme: str
    theta: int
    expected_energy: float
    realized_energy_median: float
    realized_energy_iqr: tuple[float, float]
    aoi_success_rate: float
    success_median: float
    success_iqr: tuple[float, float]
    rb_total: int
    runs: int
    seed: int
    per_run_success: np.ndarray = field(repr=False)
    mean_interval_bits: np.ndarray | None = field(default=None, repr=False)
    per_run_traces: list | None = field(default=None, repr=False)

    def write_traces(self, path) -> None:
        """One JSON object per run: success indicators and AoI series."""
        with open(path, "w") as fh:
            for r, tr in enumerate(self.per_run_traces or []):
                fh.write(json.dumps({"run": r, **tr}, sort_keys=True) + "\n")


def monte_carlo_eval(
    strategy: Strategy,
    stats: ChannelStats,
    config: ScenarioConfig,
    n_runs: int,
    seed: int,
    keep_traces: bool = False,
) -> EvalReport:
    """Realized timeliness of ``strategy`` over ``n_runs`` fading draws.

    Run ``r`` uses the ``r``-th child of ``SeedSequence(seed)``, so results do
    not depend on evaluation order.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_runs)
    rates = np.empty(n_runs)
    energy = account(strategy)[1]
    energies = np.full(n_runs, energy)
    interval_sum = None
    traces = [] if keep_traces else None
    for r, child in enumerate(children):
        bits = realized_slot_bits(strategy, stats, np.random.default_rng(child))
        rate, s, samples, epoch_bits = score_run(bits, strategy.instants, config.tau_bar_slots, config.v_bar_bits)
        rates[r] = rate
        if epoch_bits:
            eb = np.asarray(epoch_bits)
            interval_sum = eb if interval_sum is None else interval_sum + eb
        if keep_traces:
            traces.append({"success": s.astype(int).tolist(), "aoi": aoi_trace(s, samples).tolist(), "rate": rate})
    q = np.percentile(np.sort(rates), [25, 50, 75])
    qe = np.percentile(energies, [25, 50, 75])
    return EvalReport(
        scheme=strategy.scheme,
        theta=strategy.theta,
        expected_energy=float(strategy.energy),
        realized_energy_median=float(qe[1]),
        realized_energy_iqr=(float(qe[0]), float(qe[2])),
        aoi_success_rate=float(np.mean(rates)),
        success_median=float(q[1]),
        success_iqr=(float(q[0]), float(q[2])),
        rb_total=account(strategy)[2],
        runs=n_runs,
        seed=seed,
        per_run_success=rates,
        mean_interval_bits=None if interval_sum is None else interval_sum / n_runs,
        per_run_traces=traces,
    )


def report_row(report: EvalReport | None, scheme: str = "", theta: int = 0, runs: int = 0, seed: int = 0) -> list:
    """CSV row in :data:`REPORT_COLUMNS` order; ``None`` marks an infeasible scheme."""
    if report is None:
        return [scheme, theta, "", "", "", runs, seed, 0]
    return [
        report.scheme,
        report.theta,
        repr(energy_dbm(report.expected_energy)),
        report.rb_total,
        repr(report.aoi_success_rate),
        report.runs,
        report.seed,
        1,
    ]


def _random_tables(N, K, T, theta, rng):
    """Random RB ownership (or idle) per slot, trimmed to ``theta`` RBs per BS."""
    owner = rng.integers(-1, N, size=(K, T))
    a = np.zeros((N, K, T), dtype=bool)
    for t in range(T):
        for n in range(N):
            ks = np.nonzero(owner[:, t] == n)[0]
            if ks.size > theta:
                ks = rng.choice(ks, size=theta, replace=False)
            a[n, ks, t] = True
    return a


def sample_feasible_strategy(stats: ChannelStats, config: ScenarioConfig, rng: np.random.Generator,
                             max_tries: int = 200) -> Strategy | None:
    """A random strategy that passes :func:`audit_strategy`, or ``None``.

    Draws random sampling gaps in ``1..tau_bar``, a random cap, random RB
    ownership and random relative powers, then scales each interval's powers
    by the common factor that makes its expected bits just reach the payload.
    Draws whose intervals cannot reach it within the power budget are retried.
    """
    N, K, T = stats.dims
    tau_bar, p_bar = config.tau_bar_slots, config.p_bar_w
    target = config.v_bar_bits * (1 + 1e-9)
    for _ in range(max_tries):
        theta = int(rng.integers(1, K + 1))
        inst = [1]
        while inst[-1] <= T:
            inst.append(min(inst[-1] + int(rng.integers(1, tau_bar + 1)), T + 1))
        a = _random_tables(N, K, T, theta, rng)
        rel = np.where(a, rng.random((N, K, T)), 0.0)
        n_i = len(inst) - 1
        slot_iv = np.repeat(np.arange(n_i), np.diff(inst))
        n, k, t = np.nonzero(a)
        iv = slot_iv[t]
        # largest scale per interval that keeps every slot within budget
        slot_sum = rel.sum(axis=(0, 1))
        s_max = np.full(n_i, np.inf)
        np.minimum.at(s_max, slot_iv, np.where(slot_sum > 0, p_bar / np.maximum(slot_sum, 1e-300), np.inf))
        if not np.all(np.isfinite(s_max)):
            continue  # an interval without any link
        nodes = [stats.slot_nodes(tt) for tt in range(T)]
        q = np.stack([nodes[tt][0][nn, kk] for nn, kk, tt in zip(n, k, t)]) if n.size else None
        w = np.stack([nodes[tt][1][nn, kk] for nn, kk, tt in zip(n, k, t)]) if n.size else None
        r = rel[n, k, t]

        def bits(scale):
            return np.bincount(iv, weights=rate_from_nodes(scale[iv] * r, q, w, stats.bandwidth), minlength=n_i)

        if np.any(bits(s_max) < target):
            continue
        lo, hi = np.zeros(n_i), s_max.copy()
        for _ in range(48):  # 2**-48 of the budget-limited scale
            mid = 0.5 * (lo + hi)
            ok = bits(mid) >= target
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        power = np.zeros((N, K, T))
        power[n, k, t] = hi[iv] * r
        keep = power > 0
        return Strategy("random", inst, keep, power, int(keep.sum(axis=1).max(initial=0)), float(power.sum()))
    return None
