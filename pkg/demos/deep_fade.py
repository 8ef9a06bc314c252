"""A long fade in the middle of the horizon: adaptive instants against fixed ones."""
import numpy as np

from aoipareto import ChannelStats, ScenarioConfig, monte_carlo_eval, periodic_sampling_plan, solve_p2
from aoipareto.pareto import energy_dbm


def main():
    cfg = ScenarioConfig(n_bs=1, n_rb_K=2, horizon_T=40, tau_bar_slots=4, v_bar_bits=1e6)
    g = np.full((1, 2, 40), 1e-9)
    g[:, :, 12:32] = 1e-12
    stats = ChannelStats(g=g, kappa=np.full_like(g, 2.0), bandwidth=cfg.bits_per_slot_scale, noise_w=cfg.noise_w)
    for name, s in (("proposed", solve_p2(stats, 1, cfg.tau_bar_slots, cfg.p_bar_w, cfg.v_bar_bits)),
                    ("periodic", periodic_sampling_plan(stats, cfg, 1))):
        rep = monte_carlo_eval(s, stats, cfg, 500, seed=0)
        print(f"{name:9s} energy={energy_dbm(s.energy):7.2f} dBm-slots  success={rep.aoi_success_rate:.3f}")
        print(f"          instants={s.instants}")


if __name__ == "__main__":
    main()
