"""Compare adaptive sampling with the three baselines on one scenario."""
from aoipareto import (
    Infeasible,
    ScenarioConfig,
    average_rate_plan,
    build_scenario,
    instantaneous_rate_plan,
    monte_carlo_eval,
    periodic_sampling_plan,
    solve_p2,
)
from aoipareto.pareto import energy_dbm


def main(theta=2, runs=200):
    cfg = ScenarioConfig(n_bs=3, n_rb_K=6, horizon_T=40, tau_bar_slots=5, seed=7)
    stats = build_scenario(cfg).stats
    builders = {
        "proposed": lambda: solve_p2(stats, theta, cfg.tau_bar_slots, cfg.p_bar_w, cfg.v_bar_bits),
        "periodic": lambda: periodic_sampling_plan(stats, cfg, theta),
        "instantaneous": lambda: instantaneous_rate_plan(stats, cfg, theta),
        "average": lambda: average_rate_plan(stats, cfg, theta),
    }
    for name, build in builders.items():
        try:
            s = build()
        except Infeasible as exc:
            print(f"{name:14s} infeasible: {exc}")
            continue
        rep = monte_carlo_eval(s, stats, cfg, runs, seed=1)
        print(f"{name:14s} energy={energy_dbm(s.energy):7.2f} dBm-slots  RBs={s.rb_total:4d}  "
              f"success={rep.aoi_success_rate:.3f}")


if __name__ == "__main__":
    main()
