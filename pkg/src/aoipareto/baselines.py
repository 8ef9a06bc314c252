"""Comparison schemes built on the same interval solver.

* instantaneous: every slot on its own must carry ``v_bar / tau_bar`` expected bits.
* average: the whole horizon must carry ``T v_bar / tau_bar`` expected bits.
* periodic: samples at fixed instants ``1, 1 + tau_bar, ...``, each interval
  solved optimally.

The first two have no sampling control (``instants`` is ``None``).
"""

from __future__ import annotations

from .allocator import IntervalSolver
from .channel import ChannelStats
from .errors import Infeasible
from .graph import stitch
from .scenario import ScenarioConfig
from .strategy import Strategy

__all__ = ["instantaneous_rate_plan", "average_rate_plan", "periodic_sampling_plan", "periodic_instants"]


def instantaneous_rate_plan(stats: ChannelStats, config: ScenarioConfig, theta: int) -> Strategy:
    solver = IntervalSolver(stats, theta, config.p_bar_w)
    target = config.v_bar_bits / config.tau_bar_slots
    plans = []
    for t in range(1, stats.T + 1):
        try:
            plans.append(solver.solve(t, t + 1, target))
        except Infeasible as exc:
            raise Infeasible(f"slot {t} cannot carry the per-slot rate", theta=theta, interval=(t, t + 1),
                             max_bits=exc.max_bits, v_bar=target) from exc
    return stitch(plans, stats.dims, "instantaneous", theta, None)


def average_rate_plan(stats: ChannelStats, config: ScenarioConfig, theta: int) -> Strategy:
    target = stats.T * config.v_bar_bits / config.tau_bar_slots
    try:
        plan = IntervalSolver(stats, theta, config.p_bar_w).solve(1, stats.T + 1, target)
    except Infeasible as exc:
        raise Infeasible("horizon total unreachable", theta=theta, interval=(1, stats.T + 1),
                         max_bits=exc.max_bits, v_bar=target) from exc
    return stitch([plan], stats.dims, "average", theta, None)


def periodic_instants(T: int, tau_bar: int) -> list[int]:
    """``1, 1 + tau_bar, 1 + 2 tau_bar, ...`` closed by ``T + 1``."""
    return list(range(1, T + 1, tau_bar)) + [T + 1]


def periodic_sampling_plan(stats: ChannelStats, config: ScenarioConfig, theta: int) -> Strategy:
    solver = IntervalSolver(stats, theta, config.p_bar_w)
    instants = periodic_instants(stats.T, config.tau_bar_slots)
    plans = []
    for a, b in zip(instants[:-1], instants[1:]):
        try:
            plans.append(solver.solve(a, b, config.v_bar_bits))
        except Infeasible as exc:
            raise Infeasible("fixed interval cannot carry the payload", theta=theta, interval=(a, b),
                             max_bits=exc.max_bits, v_bar=config.v_bar_bits) from exc
    return stitch(plans, stats.dims, "periodic", theta, instants)
