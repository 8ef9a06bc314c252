"""Timing-control graph over candidate sampling slots and its shortest path.

Vertex ``t`` (1-based, ``1..T+1``) means "a sample is taken at the start of
slot ``t``"; edge ``(i, j)`` with ``1 <= j - i <= tau_bar`` carries the
minimum energy of delivering one payload over slots ``i .. j-1``.  The graph
is a DAG, so one forward relaxation finds the cheapest sampling sequence.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .allocator import IntervalPlan, IntervalSolver
from .channel import ChannelStats
from .errors import Infeasible, NoPath
from .strategy import Strategy

__all__ = [
    "UNREACHABLE",
    "TimingGraph",
    "SamplingSolution",
    "build_graph",
    "shortest_path",
    "solve_p2",
    "stitch",
]


class _Unreachable:
    """Weight of an interval that cannot deliver the payload."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNREACHABLE"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Unreachable, ())


UNREACHABLE = _Unreachable()


@dataclass
class TimingGraph:
    T: int
    tau_bar: int
    theta: int
    weights: dict = field(default_factory=dict)
    plans: dict = field(default_factory=dict, repr=False)

    def edges(self) -> list[tuple[int, int]]:
        """All admissible edges, ordered by tail then head."""
        return [(i, j) for i in range(1, self.T + 1) for j in range(i + 1, min(i + self.tau_bar, self.T + 1) + 1)]

    def weight(self, i: int, j: int):
        return self.weights[i, j]

    def is_finite(self, i: int, j: int) -> bool:
        return self.weights[i, j] is not UNREACHABLE

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["i", "j", "weight_or_inf"])
            for i, j in self.edges():
                w = self.weights[i, j]
                wr.writerow([i, j, "inf" if w is UNREACHABLE else repr(float(w))])


@dataclass
class SamplingSolution:
    instants: list[int]
    total_energy: float
    plans: list[IntervalPlan]


def _interval_weight(solver: IntervalSolver, i: int, j: int, v_bar: float):
    try:
        plan = solver.solve(i, j, v_bar)
    except Infeasible:
        return UNREACHABLE, None
    return plan.energy, plan


def build_graph(
    stats: ChannelStats,
    theta: int,
    tau_bar: int,
    p_bar: float,
    v_bar: float,
    workers: int = 1,
    solver: IntervalSolver | None = None,
) -> TimingGraph:
    """Weight every admissible edge by its minimum interval energy.

    Edges are processed group by group in interval length ``c = 1..tau_bar``.
    A single :class:`IntervalSolver` is shared by all edges, so per-slot work
    (quadrature nodes, zero-power slopes, per-slot throughput maxima and
    budget prices) is done once per slot and reused by every edge covering it.
    With ``workers > 1`` the edges of a group are solved concurrently; each
    edge is written to its own key, so the graph does not depend on order.
    """
    T = stats.T
    if theta < 1 or tau_bar < 1:
        raise ValueError("theta and tau_bar must be >= 1")
    solver = solver or IntervalSolver(stats, theta, p_bar)
    g = TimingGraph(T=T, tau_bar=int(tau_bar), theta=int(theta))
    for c in range(1, min(tau_bar, T) + 1):
        group = [(i, i + c) for i in range(1, T + 2 - c)]
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(lambda e: _interval_weight(solver, e[0], e[1], v_bar), group))
        else:
            results = [_interval_weight(solver, i, j, v_bar) for i, j in group]
        for e, (w, plan) in zip(group, results):
            g.weights[e] = w
            g.plans[e] = plan
    return g


def shortest_path(graph: TimingGraph) -> SamplingSolution:
    """Cheapest path from vertex 1 to ``T + 1``; raises :class:`NoPath`.

    Vertices are relaxed in increasing order.  Among equal-cost paths the one
    whose predecessor is earliest wins at every vertex.
    """
    T = graph.T
    dist: list = [None] * (T + 2)
    pred = [0] * (T + 2)
    dist[1] = 0.0
    for j in range(2, T + 2):
        for i in range(max(1, j - graph.tau_bar), j):
            w = graph.weights[i, j]
            if dist[i] is None or w is UNREACHABLE:
                continue
            cand = dist[i] + w
            if dist[j] is None or cand < dist[j]:
                dist[j] = cand
                pred[j] = i
    if dist[T + 1] is None:
        raise NoPath(f"no feasible sampling sequence for theta={graph.theta}")
    path = [T + 1]
    while path[-1] != 1:
        path.append(pred[path[-1]])
    path.reverse()
    plans = [graph.plans[a, b] for a, b in zip(path[:-1], path[1:])]
    return SamplingSolution(instants=path, total_energy=float(dist[T + 1]), plans=plans)


def stitch(plans, shape, scheme: str, theta: int, instants) -> Strategy:
    """Assemble interval plans into horizon-wide tables."""
    assign = np.zeros(shape, dtype=bool)
    power = np.zeros(shape)
    for pl in plans:
        sl = slice(pl.t_start - 1, pl.t_end - 1)
        assign[:, :, sl] = pl.assign
        power[:, :, sl] = pl.power
    energy = 0.0
    for pl in plans:
        energy += pl.energy
    return Strategy(
        scheme=scheme,
        instants=None if instants is None else list(instants),
        assign=assign,
        power=power,
        theta=int(theta),
        energy=energy,
        interval_bits=[float(pl.expected_bits) for pl in plans],
    )


def solve_p2(
    stats: ChannelStats,
    theta: int,
    tau_bar: int,
    p_bar: float,
    v_bar: float,
    workers: int = 1,
    graph: TimingGraph | None = None,
) -> Strategy:
    """Minimum-energy sampling strategy at load cap ``theta``.

    Raises :class:`Infeasible` (with ``theta`` set) when no sampling sequence
    can meet the payload in every interval.
    """
    graph = graph or build_graph(stats, theta, tau_bar, p_bar, v_bar, workers=workers)
    try:
        sol = shortest_path(graph)
    except NoPath as exc:
        raise Infeasible(str(exc), theta=theta) from exc
    return stitch(sol.plans, stats.dims, "proposed", theta, sol.instants)
