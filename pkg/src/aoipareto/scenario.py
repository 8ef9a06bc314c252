"""Synthetic scenarios: BS layout, circular patrol trajectory and radio map."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .channel import KAPPA_MIN, ChannelStats

log = logging.getLogger(__name__)

__all__ = [
    "ScenarioConfig",
    "Scenario",
    "ConfigError",
    "trajectory_positions",
    "build_scenario",
    "synthesize_radio_map",
    "los_probability",
    "umi_path_loss_db",
    "dbm_to_watt",
    "watt_to_dbm",
]


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


@dataclass
class ScenarioConfig:
    area_side_m: float = 200.0
    n_bs: int = 5
    altitude_m: float = 50.0
    speed_mps: float = 6.0
    slot_s: float = 1.0
    horizon_T: int = 100
    n_rb_K: int = 8
    bandwidth_B_hz: float = 180e3
    noise_power_dbm: float = -121.4
    p_bar_dbm: float = 23.0
    v_bar_bits: float = 2.0e6
    tau_bar_slots: int = 5
    carrier_ghz: float = 2.0
    shadow_sigma_los_db: float = 4.0
    shadow_sigma_nlos_db: float = 8.0
    kappa_range: tuple[float, float] = (1.0, 30.0)
    seed: int = 0

    def __post_init__(self):
        self.kappa_range = tuple(float(v) for v in self.kappa_range)
        self.validate()

    def validate(self):
        for name in ("horizon_T", "n_rb_K", "n_bs", "tau_bar_slots"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {v!r}")
            setattr(self, name, int(v))
        for name in ("area_side_m", "speed_mps", "slot_s", "bandwidth_B_hz", "carrier_ghz", "v_bar_bits"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, f"must be > 0, got {getattr(self, name)!r}")
        if self.altitude_m < 0:
            raise ConfigError("altitude_m", "must be >= 0")
        for name in ("shadow_sigma_los_db", "shadow_sigma_nlos_db"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if not np.isfinite(self.p_bar_dbm):
            raise ConfigError("p_bar_dbm", "must be finite (p_bar > 0 in linear units)")
        if not np.isfinite(self.noise_power_dbm):
            raise ConfigError("noise_power_dbm", "must be finite")
        if len(self.kappa_range) != 2:
            raise ConfigError("kappa_range", "must be [kappa_min, kappa_max]")
        lo, hi = self.kappa_range
        if not (KAPPA_MIN <= lo <= hi):
            raise ConfigError("kappa_range", f"need {KAPPA_MIN} <= kappa_min <= kappa_max, got {self.kappa_range}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        self.seed = int(self.seed)

    @property
    def p_bar_w(self) -> float:
        return float(dbm_to_watt(self.p_bar_dbm))

    @property
    def noise_w(self) -> float:
        return float(dbm_to_watt(self.noise_power_dbm))

    @property
    def bits_per_slot_scale(self) -> float:
        """RB bandwidth times slot duration: bits per slot per bit/s/Hz."""
        return self.bandwidth_B_hz * self.slot_s

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kappa_range"] = list(self.kappa_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration field")
        return cls(**d)


def trajectory_positions(config: ScenarioConfig) -> np.ndarray:
    """``T`` points on a circle of radius ``area_side / 4`` about the area centre.

    Consecutive points are exactly ``speed * slot`` apart (chord length); the
    first point sits at angle 0 and the UAV flies counter-clockwise.
    """
    R = config.area_side_m / 4.0
    step = config.speed_mps * config.slot_s
    if step >= 2 * R:
        raise ConfigError("speed_mps", "per-slot displacement exceeds the patrol circle diameter")
    dphi = 2.0 * np.arcsin(step / (2.0 * R))
    phi = dphi * np.arange(config.horizon_T)
    c = config.area_side_m / 2.0
    return np.column_stack([c + R * np.cos(phi), c + R * np.sin(phi), np.full(phi.shape, config.altitude_m)])


def los_probability(d2d):
    d2d = np.asarray(d2d, dtype=float)
    with np.errstate(divide="ignore"):
        near = np.minimum(18.0 / d2d, 1.0)
    return near * (1.0 - np.exp(-d2d / 36.0)) + np.exp(-d2d / 36.0)


def umi_path_loss_db(d3d, carrier_ghz, los):
    d3d = np.asarray(d3d, dtype=float)
    pl_los = 22.0 * np.log10(d3d) + 28.0 + 20.0 * np.log10(carrier_ghz)
    pl_nlos = 36.7 * np.log10(d3d) + 22.7 + 26.0 * np.log10(carrier_ghz)
    return np.where(los, pl_los, pl_nlos)


def synthesize_radio_map(bs_positions, trajectory, config: ScenarioConfig, rng: np.random.Generator) -> ChannelStats:
    """Large-scale gain and fading shape along the trajectory.

    LoS state and shadowing are drawn per (BS, slot) and shared by all RBs;
    the Gamma shape is drawn per (BS, RB) and shared by all slots.
    """
    bs = np.asarray(bs_positions, dtype=float)
    traj = np.asarray(trajectory, dtype=float)
    N, T, K = len(bs), len(traj), config.n_rb_K
    diff = traj[None, :, :] - bs[:, None, :]
    d3d = np.linalg.norm(diff, axis=-1)
    d2d = np.linalg.norm(diff[..., :2], axis=-1)
    if np.any(d3d == 0):
        log.warning("UAV coincides with a BS at %d (n, t) pairs; distance set to 1 m", int(np.sum(d3d == 0)))
        d3d = np.where(d3d == 0, 1.0, d3d)

    los = rng.random((N, T)) < los_probability(d2d)
    sigma = np.where(los, config.shadow_sigma_los_db, config.shadow_sigma_nlos_db)
    shadow_db = sigma * rng.standard_normal((N, T))
    kappa_nk = rng.uniform(*config.kappa_range, size=(N, K))

    loss_db = umi_path_loss_db(d3d, config.carrier_ghz, los) + shadow_db
    g_nt = 10.0 ** (-loss_db / 10.0)
    g = np.broadcast_to(g_nt[:, None, :], (N, K, T)).copy()
    kappa = np.broadcast_to(kappa_nk[:, :, None], (N, K, T)).copy()
    return ChannelStats(g=g, kappa=kappa, bandwidth=config.bits_per_slot_scale, noise_w=config.noise_w)


@dataclass(eq=False)
class Scenario:
    config: ScenarioConfig
    bs_positions: np.ndarray
    trajectory: np.ndarray
    stats: ChannelStats
    los: np.ndarray | None = field(default=None, compare=False)

    def to_json(self) -> str:
        N, K, T = self.stats.dims
        doc = {
            "config": self.config.to_dict(),
            "bs_positions": self.bs_positions.tolist(),
            "trajectory": self.trajectory.tolist(),
            "stats": {
                "dims": {"order": ["n", "k", "t"], "shape": [N, K, T]},
                "bandwidth_bits_per_slot": self.stats.bandwidth,
                "noise_w": self.stats.noise_w,
                "g": self.stats.g.ravel().tolist(),
                "kappa": self.stats.kappa.ravel().tolist(),
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        cfg = ScenarioConfig.from_dict(doc["config"])
        s = doc["stats"]
        shape = tuple(s["dims"]["shape"])
        stats = ChannelStats(
            g=np.asarray(s["g"], dtype=float).reshape(shape),
            kappa=np.asarray(s["kappa"], dtype=float).reshape(shape),
            bandwidth=float(s["bandwidth_bits_per_slot"]),
            noise_w=float(s["noise_w"]),
        )
        return cls(cfg, np.asarray(doc["bs_positions"], dtype=float), np.asarray(doc["trajectory"], dtype=float), stats)


def build_scenario(config: ScenarioConfig, trajectory=None) -> Scenario:
    """Deterministic scenario for ``config.seed``.

    A caller-supplied ``trajectory`` (T x 3) replaces the circular patrol.
    """
    rng = np.random.default_rng(config.seed)
    bs = np.column_stack([rng.uniform(0.0, config.area_side_m, size=(config.n_bs, 2)), np.zeros(config.n_bs)])
    if trajectory is None:
        traj = trajectory_positions(config)
    else:
        traj = np.asarray(trajectory, dtype=float)
        if traj.shape != (config.horizon_T, 3):
            raise ConfigError("trajectory", f"expected shape ({config.horizon_T}, 3), got {traj.shape}")
    stats = synthesize_radio_map(bs, traj, config, rng)
    return Scenario(config, bs, traj, stats)
