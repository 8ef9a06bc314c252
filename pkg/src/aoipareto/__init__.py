"""Pareto frontier between per-BS resource-block load cap and UAV transmit energy
for peak-AoI-constrained status updating over a predicted channel horizon."""

__version__ = "0.1.0"

from .allocator import IntervalPlan, IntervalSolver, max_expected_throughput, solve_interval
from .baselines import average_rate_plan, instantaneous_rate_plan, periodic_sampling_plan
from .channel import (
    ChannelStats,
    expected_capacity,
    expected_capacity_derivative,
    realized_capacity,
    sample_channel,
)
from .errors import (
    Infeasible,
    InstanceTooLarge,
    IterationLimit,
    MonotonicityViolation,
    NoPath,
    NonMonotoneMap,
    WhollyInfeasible,
)
from .evaluator import EvalReport, Violation, account, aoi_trace, audit_strategy, monte_carlo_eval
from .graph import UNREACHABLE, SamplingSolution, TimingGraph, build_graph, shortest_path, solve_p2
from .oracle import brute_force_interval, brute_force_schedule
from .pareto import ParetoFrontier, ParetoPoint, scalarize, sweep_frontier
from .scenario import ConfigError, Scenario, ScenarioConfig, build_scenario, synthesize_radio_map, trajectory_positions
from .strategy import Strategy
