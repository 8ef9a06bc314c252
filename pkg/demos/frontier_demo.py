"""Sweep the load cap on a small synthetic scenario and print the frontier."""
from aoipareto import ScenarioConfig, build_scenario, sweep_frontier
from aoipareto.pareto import energy_dbm


def main():
    cfg = ScenarioConfig(n_bs=3, n_rb_K=6, horizon_T=40, tau_bar_slots=5, seed=7)
    stats = build_scenario(cfg).stats
    fr = sweep_frontier(stats, cfg)
    print(f"cap range {fr.theta_lower}..{fr.theta_upper}, utopia {fr.utopia}")
    for p in fr.points:
        s = p.strategy
        print(f"theta={p.theta}  energy={energy_dbm(p.energy):7.2f} dBm-slots  samples={s.n_samples}  RBs={s.rb_total}")


if __name__ == "__main__":
    main()
