"""Acceptance criteria, one test each; verdicts are summarised at the end of the run."""

import csv
import math
import time

import numpy as np
import pytest
from conftest import random_stats

from aoipareto.allocator import max_expected_throughput, solve_interval
from aoipareto.baselines import average_rate_plan, instantaneous_rate_plan, periodic_sampling_plan
from aoipareto.channel import ChannelStats, expected_capacity, expected_capacity_derivative
from aoipareto.cli import main
from aoipareto.errors import Infeasible, MonotonicityViolation
from aoipareto.evaluator import audit_strategy, monte_carlo_eval, sample_feasible_strategy
from aoipareto.graph import solve_p2
from aoipareto.oracle import brute_force_interval, brute_force_schedule
from aoipareto.pareto import EPS_E, energy_dbm, scalarize, sweep_frontier
from aoipareto.scenario import ScenarioConfig, build_scenario

SCHEMES = ("proposed", "periodic", "instantaneous", "average")


def build(scheme, stats, cfg, theta):
    try:
        if scheme == "proposed":
            return solve_p2(stats, theta, cfg.tau_bar_slots, cfg.p_bar_w, cfg.v_bar_bits)
        if scheme == "periodic":
            return periodic_sampling_plan(stats, cfg, theta)
        if scheme == "instantaneous":
            return instantaneous_rate_plan(stats, cfg, theta)
        return average_rate_plan(stats, cfg, theta)
    except Infeasible:
        return None


def rel_err(a, b):
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------


def test_criterion_1_joint_optimum_matches_exhaustive_search(record):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    n, worst, verdict_mismatch, n_inf = 0, 0.0, 0, 0
    while n < 120:
        N, K = int(rng.integers(1, 3)), int(rng.integers(1, 4))
        T, tau_bar, theta = int(rng.integers(2, 7)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
        stats = random_stats(rng, N, K, T)
        p_bar = 10 ** rng.uniform(-3, 0)
        per = min(max_expected_throughput(stats, t, t + 1, theta, p_bar) for t in range(1, T + 1))
        v_bar = per * tau_bar * rng.uniform(0.3, 1.2)
        try:
            e = solve_p2(stats, theta, tau_bar, p_bar, v_bar).energy
        except Infeasible:
            e = math.inf
        e_ref, _ = brute_force_schedule(stats, theta, tau_bar, p_bar, v_bar)
        n += 1
        if math.isinf(e) or math.isinf(e_ref):
            verdict_mismatch += math.isinf(e) != math.isinf(e_ref)
            n_inf += math.isinf(e_ref)
            continue
        worst = max(worst, rel_err(e, e_ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and verdict_mismatch == 0 and elapsed < 300
    record("1 joint oracle", ok, f"{n} instances ({n_inf} infeasible), worst rel err {worst:.2e}, "
                                 f"verdict mismatches {verdict_mismatch}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_interval_solver_matches_oracle(record):
    rng = np.random.default_rng(77)
    worst, mismatch, n_inf = 0.0, 0, 0
    for _ in range(200):
        N, K, L = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        stats = random_stats(rng, N, K, L)
        theta = int(rng.integers(1, 3))
        p_bar = 10 ** rng.uniform(-3, 0)
        mx = max_expected_throughput(stats, 1, L + 1, theta, p_bar)
        v_bar = mx * rng.uniform(0.05, 1.05)
        try:
            e = solve_interval(stats, 1, L + 1, theta, p_bar, v_bar).energy
        except Infeasible:
            e = math.inf
        try:
            e_ref = brute_force_interval(stats, 1, L + 1, theta, p_bar, v_bar).energy
        except Infeasible:
            e_ref = math.inf
        if math.isinf(e) or math.isinf(e_ref):
            mismatch += math.isinf(e) != math.isinf(e_ref)
            n_inf += math.isinf(e_ref)
            continue
        worst = max(worst, rel_err(e, e_ref))
    ok = worst <= 1e-4 and mismatch == 0
    record("2 interval oracle", ok, f"200 intervals ({n_inf} infeasible), worst rel err {worst:.2e}, "
                                    f"verdict mismatches {mismatch}")
    assert ok


def test_criterion_3_frontier_monotonicity_and_dominance(record):
    rng = np.random.default_rng(3)
    non_increase = non_strict = dominated = mutual = 0
    closest = math.inf
    t0 = time.perf_counter()
    for s in range(20):
        K = int(rng.integers(4, 9))
        cfg = ScenarioConfig(n_bs=3, n_rb_K=K, horizon_T=50, seed=100 + s)
        stats = build_scenario(cfg).stats
        try:
            fr = sweep_frontier(stats, cfg, full=True)
        except MonotonicityViolation:
            non_increase += 1
            continue
        es = [fr.sweep[t] for t in range(1, K + 1) if fr.sweep[t] is not None]
        non_increase += sum(b > a * (1 + EPS_E) for a, b in zip(es[:-1], es[1:]))
        non_strict += sum(not b < a * (1 - EPS_E) for a, b in zip(fr.energies[:-1], fr.energies[1:]))
        pts = list(zip(fr.thetas, fr.energies))
        mutual += sum(1 for a in pts for b in pts if a != b and a[0] <= b[0] and a[1] <= b[1])
        srng = np.random.default_rng(1000 + s)
        for _ in range(1000):
            r = sample_feasible_strategy(stats, cfg, srng)
            if r is None:
                continue
            for th, e in pts:
                if r.theta_used <= th:
                    closest = min(closest, r.energy / e)
                    dominated += r.energy < e * (1 - EPS_E)
    elapsed = time.perf_counter() - t0
    ok = non_increase == 0 and non_strict == 0 and mutual == 0 and dominated == 0
    record("3 frontier properties", ok, f"20 scenarios: non-increase violations {non_increase}, strictness violations {non_strict}, "
                                    f"mutually dominating pairs {mutual}, dominated by random {dominated} "
                                    f"(closest random/frontier energy ratio {closest:.3g}), {elapsed:.0f} s")
    assert ok


def test_criterion_4_scalarization_invariance(record):
    cfg = ScenarioConfig(n_bs=3, n_rb_K=8, horizon_T=40, seed=4)
    fr = sweep_frontier(build_scenario(cfg).stats, cfg)
    maps = {
        "(x^2, id)": (lambda x: x * x, lambda e: e),
        "(id, 10log10)": (lambda x: x, lambda e: 10 * np.log10(e)),
        "(exp, x+1)": (np.exp, lambda e: e + 1),
    }
    bad = []
    for name, (f1, f2) in maps.items():
        m = scalarize(fr, f1, f2)
        xs, ys = np.array([p[0] for p in m]), np.array([p[1] for p in m])
        order = np.array_equal(np.argsort(xs, kind="stable"), np.argsort(fr.thetas, kind="stable")) and np.array_equal(
            np.argsort(ys, kind="stable"), np.argsort(fr.energies, kind="stable"))
        nondom = all(not (xs[i] <= xs[j] and ys[i] <= ys[j]) for i in range(len(m)) for j in range(len(m)) if i != j)
        if not (order and nondom):
            bad.append(name)
    ok = not bad and len(fr.points) >= 2
    record("4 scalarization", ok, f"{len(fr.points)} frontier points, 3 maps, failures {bad or 'none'}")
    assert ok


def test_criterion_5_quadrature_accuracy(record):
    rng = np.random.default_rng(5)
    B, noise = 1e5, 1e-14
    worst_mc = 0.0
    for _ in range(50):
        p, g, k = 10 ** rng.uniform(-4, 0), 10 ** rng.uniform(-12, -8), rng.uniform(0.5, 30)
        mc = (B * np.log1p(p * rng.gamma(k, g / k, 10**6) / noise) / np.log(2)).mean()
        worst_mc = max(worst_mc, rel_err(expected_capacity(p, g, k, B, noise), mc))
    worst_fd = 0.0
    for _ in range(100):
        p, g, k = 10 ** rng.uniform(-2, 1), 10 ** rng.uniform(-1, 1), rng.uniform(0.5, 50)
        h = 1e-6 * max(p, 1.0)
        fd = (expected_capacity(p + h, g, k, 1.0, 1.0) - expected_capacity(p - h, g, k, 1.0, 1.0)) / (2 * h)
        worst_fd = max(worst_fd, rel_err(expected_capacity_derivative(p, g, k, 1.0, 1.0), fd))
    ok = worst_mc <= 1e-3 and worst_fd <= 1e-5
    record("5 quadrature", ok, f"worst vs 1e6-draw MC {worst_mc:.2e} (50 pts), worst vs finite diff {worst_fd:.2e} (100 pts)")
    assert ok


def _sweep_time(T, tau_bar, K=25, N=5, thetas=(2,), repeats=2):
    cfg = ScenarioConfig(n_bs=N, horizon_T=T, n_rb_K=K, tau_bar_slots=tau_bar)
    stats = build_scenario(cfg).stats
    for t in range(T):
        stats.slot_nodes(t)  # quadrature set-up is not part of the sweep
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for th in thetas:
            try:
                solve_p2(stats, th, tau_bar, cfg.p_bar_w, cfg.v_bar_bits)
            except Infeasible:
                pass
        best = min(best, time.perf_counter() - t0)
    return best


def test_criterion_6_complexity_scaling(record):
    _sweep_time(10, 2)
    Ts = [50, 100, 200, 400]
    taus = [2, 4, 8, 16]
    t_T = [_sweep_time(T, 5) for T in Ts]
    t_tau = [_sweep_time(100, tb) for tb in taus]
    slope_T = np.polyfit(np.log(Ts), np.log(t_T), 1)[0]
    slope_tau = np.polyfit(np.log(taus), np.log(t_tau), 1)[0]
    ok = 0.8 <= slope_T <= 1.3 and 1.6 <= slope_tau <= 2.4
    record("6 complexity", ok, f"slope vs T {slope_T:.2f} (times {np.round(t_T, 2).tolist()} s), "
                               f"slope vs tau_bar {slope_tau:.2f} (times {np.round(t_tau, 2).tolist()} s); N=5 K=25 theta grid (2,)")
    assert ok


@pytest.fixture(scope="module")
def default_schemes():
    cfg = ScenarioConfig()
    stats = build_scenario(cfg).stats
    out = {th: {s: build(s, stats, cfg, th) for s in SCHEMES} for th in range(1, cfg.n_rb_K + 1)}
    return cfg, stats, out


def _rb_at_energy(points, levels):
    """Piecewise-linear RB total of a scheme's cap sweep at energy levels (dBm-slots)."""
    pts = sorted(points)
    return np.interp(levels, [p[0] for p in pts], [p[1] for p in pts])


def test_criterion_7_energy_ordering_and_rb_savings(default_schemes, record):
    cfg, stats, out = default_schemes
    tol = 1 + 1e-9
    n_common = chain = below_avg = 0
    for th, r in out.items():
        if any(r[s] is None for s in SCHEMES):
            continue
        n_common += 1
        e = {s: r[s].energy for s in SCHEMES}
        chain += e["proposed"] <= e["periodic"] * tol and e["periodic"] <= e["instantaneous"] * tol
        below_avg += e["proposed"] <= e["average"] * tol
    prop = [(energy_dbm(r["proposed"].energy), r["proposed"].rb_total) for r in out.values() if r["proposed"]]
    per = [(energy_dbm(r["periodic"].energy), r["periodic"].rb_total) for r in out.values() if r["periodic"]]
    lo = max(min(p[0] for p in prop), min(p[0] for p in per))
    hi = min(max(p[0] for p in prop), max(p[0] for p in per))
    levels = np.unique(np.concatenate([np.linspace(lo, hi, 200), [p[0] for p in prop + per if lo <= p[0] <= hi]]))
    rb_prop, rb_per = _rb_at_energy(prop, levels), _rb_at_energy(per, levels)
    fewer = bool(hi > lo and np.all(rb_prop < rb_per))
    ratio = float(np.mean(rb_per / rb_prop)) if hi > lo else float("nan")
    ok = n_common > 0 and chain == n_common and below_avg == n_common and fewer
    record("7 energy ordering", ok,
           f"prop<=per<=inst at {chain}/{n_common} caps; prop<=avg at {below_avg}/{n_common} caps; "
           f"fewer RBs than periodic at matched energy over [{lo:.2f}, {hi:.2f}] dBm: {fewer} "
           f"(mean periodic/proposed RB ratio {ratio:.2f})")
    assert ok


def _deep_fade():
    cfg = ScenarioConfig(n_bs=1, n_rb_K=2, horizon_T=40, tau_bar_slots=4, v_bar_bits=1e6)
    g = np.full((1, 2, 40), 1e-9)
    g[:, :, 12:32] = 1e-12  # fade five times longer than tau_bar
    stats = ChannelStats(g=g, kappa=np.full_like(g, 2.0), bandwidth=cfg.bits_per_slot_scale, noise_w=cfg.noise_w)
    return cfg, stats


def test_criterion_8_timeliness(default_schemes, record):
    t0 = time.perf_counter()
    cfg, stats, out = default_schemes
    audits = []
    for th, r in out.items():
        if r["proposed"] is not None:
            audits.append(len(audit_strategy(r["proposed"], stats, cfg)))
    for seed in range(3):
        c = ScenarioConfig(n_bs=3, n_rb_K=4, horizon_T=30, seed=50 + seed)
        st = build_scenario(c).stats
        for th in (1, 2, 4):
            s = build("proposed", st, c, th)
            if s is not None:
                audits.append(len(audit_strategy(s, st, c)))
    fcfg, fstats = _deep_fade()
    rates = {}
    for th in (1, 2):
        for scheme in SCHEMES:
            s = build(scheme, fstats, fcfg, th)
            if scheme == "proposed":
                audits.append(len(audit_strategy(s, fstats, fcfg)))
            rates[scheme, th] = None if s is None else monte_carlo_eval(s, fstats, fcfg, 2000, 7).aoi_success_rate
    elapsed = time.perf_counter() - t0
    fade_ok = all(
        rates["average", th] < 1 and rates["instantaneous", th] < 1
        and rates["proposed", th] >= max(rates["average", th], rates["instantaneous", th])
        for th in (1, 2)
    )
    ok = sum(audits) == 0 and fade_ok and elapsed < 600
    summary = ", ".join(f"{s}@{th}={v:.3f}" for (s, th), v in rates.items() if v is not None)
    record("8 timeliness", ok, f"audit violations {sum(audits)} over {len(audits)} proposed strategies; "
                               f"deep-fade success {summary}; {elapsed:.0f} s")
    assert ok


def test_criterion_9_cli_determinism(tmp_path, record):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"n_bs": 3, "n_rb_K": 4, "horizon_T": 20, "tau_bar_slots": 4}')
    sc = tmp_path / "s.json"
    runs = [
        ["scenario", "--config", str(cfg), "--seed", "11", "--out", str(sc)],
        ["frontier", "--scenario", str(sc), "--out", str(tmp_path / "f.csv"), "--json", str(tmp_path / "f.json"),
         "--dump-graph", str(tmp_path / "g.csv")],
        ["compare", "--scenario", str(sc), "--out", str(tmp_path / "c.csv"), "--runs", "50", "--seed", "3",
         "--thetas", "1,2,4", "--traces", str(tmp_path / "t.jsonl")],
    ]
    codes = [main(a) for a in runs]
    outputs = [sc, tmp_path / "f.csv", tmp_path / "f.json", tmp_path / "g.csv", tmp_path / "c.csv", tmp_path / "t.jsonl"]
    first = {p: p.read_bytes() for p in outputs}
    verify = [main(["replay", str(p) + ".manifest.json", "--verify"]) for p in (sc, tmp_path / "f.csv", tmp_path / "c.csv")]
    plain = [main(["replay", str(p) + ".manifest.json"]) for p in (tmp_path / "f.csv", tmp_path / "c.csv")]
    same = all(p.read_bytes() == first[p] for p in outputs)
    ok = codes == [0, 0, 0] and verify == [0, 0, 0] and plain == [0, 0] and same
    record("9 CLI determinism", ok, f"commands {codes}, replay --verify {verify}, in-place replay {plain}, "
                                    f"{len(outputs)} outputs byte-identical: {same}")
    assert ok
