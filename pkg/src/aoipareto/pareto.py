"""Load-cap / energy trade-off: sweep the cap and keep the undominated points."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelStats
from .errors import Infeasible, MonotonicityViolation, NonMonotoneMap, WhollyInfeasible
from .graph import build_graph, solve_p2
from .scenario import ScenarioConfig
from .strategy import Strategy

log = logging.getLogger(__name__)

__all__ = [
    "EPS_E",
    "ParetoPoint",
    "ParetoFrontier",
    "sweep_frontier",
    "scalarize",
    "energy_dbm",
]

# Relative tolerance for treating two minimum energies as equal.
EPS_E = 1e-9


def energy_dbm(e_watt_slots: float) -> float:
    """Energy in dBm-slots, ``10 log10(E / 1 mW)``."""
    return float(10.0 * np.log10(e_watt_slots * 1e3)) if e_watt_slots > 0 else float("-inf")


@dataclass
class ParetoPoint:
    theta: int
    energy: float
    strategy: Strategy = field(repr=False)


@dataclass
class ParetoFrontier:
    """Frontier points for caps ``theta_lower .. theta_upper``.

    ``sweep`` records the minimum energy (``None`` if infeasible) of every
    cap that was evaluated, including caps below ``theta_lower``.
    """

    points: list[ParetoPoint]
    theta_lower: int
    theta_upper: int
    utopia: tuple[int, float]
    sweep: dict = field(default_factory=dict)
    strategies: dict = field(default_factory=dict, repr=False)

    @property
    def thetas(self) -> list[int]:
        return [p.theta for p in self.points]

    @property
    def energies(self) -> list[float]:
        return [p.energy for p in self.points]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["theta", "energy_watt_slots", "energy_dbm_slots", "n_samples_I", "feasible"])
            for th in sorted(self.sweep):
                e = self.sweep[th]
                if e is None:
                    wr.writerow([th, "", "", "", 0])
                else:
                    s = self.strategies[th]
                    wr.writerow([th, repr(float(e)), repr(energy_dbm(e)), s.n_samples, 1])

    def to_dict(self) -> dict:
        return {
            "theta_lower": self.theta_lower,
            "theta_upper": self.theta_upper,
            "utopia": {"theta": self.utopia[0], "energy_watt_slots": self.utopia[1]},
            "points": [
                {"theta": p.theta, "energy_watt_slots": p.energy, "strategy": p.strategy.to_dict()} for p in self.points
            ],
        }


def _solve(stats, theta, config, workers):
    try:
        return solve_p2(stats, theta, config.tau_bar_slots, config.p_bar_w, config.v_bar_bits, workers=workers)
    except Infeasible:
        return None


def sweep_frontier(
    stats: ChannelStats,
    config: ScenarioConfig,
    eps: float = EPS_E,
    full: bool = False,
    workers: int = 1,
    dump_graph=None,
) -> ParetoFrontier:
    """Minimum energy for every load cap from 1 up to where it stops improving.

    The largest cap ``K`` is solved first; its energy is the smallest any cap
    can reach.  Caps are then swept upward and the sweep stops at the first
    cap whose energy is within ``eps`` (relative) of that minimum.  With
    ``full`` every cap ``1..K`` is solved.  An energy that rises with the cap
    raises :class:`MonotonicityViolation`.
    """
    K = stats.K
    s_max = _solve(stats, K, config, workers)
    if s_max is None:
        raise WhollyInfeasible(f"no strategy meets the payload even with all {K} RBs available")
    e_min = s_max.energy
    sweep: dict[int, float | None] = {}
    strategies: dict[int, Strategy] = {}
    theta_upper = None
    prev = None
    for theta in range(1, K + 1):
        s = s_max if theta == K else _solve(stats, theta, config, workers)
        if s is None:
            if prev is not None:
                raise MonotonicityViolation(f"theta={theta} infeasible although theta={prev[0]} was feasible")
            sweep[theta] = None
            continue
        e = s.energy
        if prev is not None and e > prev[1] * (1.0 + eps):
            raise MonotonicityViolation(f"E*({theta})={e!r} exceeds E*({prev[0]})={prev[1]!r}")
        if e < e_min * (1.0 - eps):
            raise MonotonicityViolation(f"E*({theta})={e!r} below E*({K})={e_min!r}")
        sweep[theta] = e
        strategies[theta] = s
        prev = (theta, e)
        if theta_upper is None and e <= e_min * (1.0 + eps):
            theta_upper = theta
            if not full:
                break
    theta_lower = min(t for t, e in sweep.items() if e is not None)
    points = [ParetoPoint(t, sweep[t], strategies[t]) for t in range(theta_lower, theta_upper + 1)]
    if dump_graph is not None:
        build_graph(stats, theta_upper, config.tau_bar_slots, config.p_bar_w, config.v_bar_bits, workers=workers).write_csv(
            dump_graph
        )
    return ParetoFrontier(
        points=points,
        theta_lower=theta_lower,
        theta_upper=theta_upper,
        utopia=(theta_lower, e_min),
        sweep=sweep,
        strategies=strategies,
    )


def _strictly_increasing_on(f, values, n_samples: int = 64) -> bool:
    lo, hi = float(np.min(values)), float(np.max(values))
    grid = np.unique(np.concatenate([np.asarray(values, dtype=float), np.linspace(lo, hi, n_samples)]))
    with np.errstate(all="ignore"):
        out = np.array([f(x) for x in grid], dtype=float)
    return bool(np.all(np.isfinite(out)) and np.all(np.diff(out) > 0))


def scalarize(frontier: ParetoFrontier, f1=None, f2=None) -> list[tuple[float, float]]:
    """Map every frontier point through ``(f1(theta), f2(E))``.

    Both maps must be strictly increasing over the frontier's ranges; this is
    checked on a sampled grid (plus the frontier values themselves) and a
    failure raises :class:`NonMonotoneMap`.  The mapped points keep their
    order and remain mutually undominated.
    """
    f1 = f1 or (lambda x: x)
    f2 = f2 or (lambda x: x)
    thetas = np.array(frontier.thetas, dtype=float)
    energies = np.array(frontier.energies, dtype=float)
    if not _strictly_increasing_on(f1, thetas):
        raise NonMonotoneMap("f1 is not strictly increasing on the load-cap range")
    if not _strictly_increasing_on(f2, energies):
        raise NonMonotoneMap("f2 is not strictly increasing on the energy range")
    mapped = [(float(f1(t)), float(f2(e))) for t, e in zip(thetas, energies)]
    xs = np.array([m[0] for m in mapped])
    ys = np.array([m[1] for m in mapped])
    same = np.array_equal(np.sign(np.diff(xs)), np.sign(np.diff(thetas))) and np.array_equal(
        np.sign(np.diff(ys)), np.sign(np.diff(energies))
    )
    if not same:
        raise NonMonotoneMap("mapped points lost their ordering")
    return mapped
