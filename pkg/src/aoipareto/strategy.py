"""Full-horizon control strategy: sampling instants plus power/RB tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Strategy", "SCHEMES"]

SCHEMES = ("proposed", "instantaneous", "average", "periodic", "random")


@dataclass(eq=False)
class Strategy:
    """Assignment ``assign`` and power ``power`` tables of shape (N, K, T).

    ``instants`` lists the interval boundaries ``1 = t_0 < ... < T + 1``
    (1-based, final entry ``T + 1``), or is ``None`` for schemes without
    sampling control.  ``theta`` is the load cap the strategy was built
    for; ``energy`` is the total power over the horizon in watt-slots.
    """

    scheme: str
    instants: list[int] | None
    assign: np.ndarray
    power: np.ndarray
    theta: int
    energy: float
    interval_bits: list[float] | None = field(default=None)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self.assign = np.asarray(self.assign, dtype=bool)
        self.power = np.asarray(self.power, dtype=float)
        if self.assign.shape != self.power.shape or self.assign.ndim != 3:
            raise ValueError("assign and power must be (N, K, T) arrays of equal shape")
        if self.instants is not None:
            self.instants = [int(t) for t in self.instants]

    @property
    def T(self) -> int:
        return self.assign.shape[2]

    @property
    def theta_used(self) -> int:
        """Largest number of RBs any BS serves in any slot."""
        return int(self.assign.sum(axis=1).max(initial=0))

    @property
    def rb_total(self) -> int:
        return int(self.assign.sum())

    @property
    def n_samples(self) -> int | None:
        """Number of sampling events after the initial one (``I``)."""
        return None if self.instants is None else len(self.instants) - 2

    def intervals(self) -> list[tuple[int, int]]:
        if self.instants is None:
            return []
        return list(zip(self.instants[:-1], self.instants[1:]))

    def to_dict(self) -> dict:
        N, K, T = self.assign.shape
        return {
            "scheme": self.scheme,
            "theta": int(self.theta),
            "theta_used": self.theta_used,
            "energy_watt_slots": float(self.energy),
            "instants": self.instants,
            "interval_bits": self.interval_bits,
            "dims": {"order": ["n", "k", "t"], "shape": [N, K, T]},
            "assign": self.assign.astype(int).ravel().tolist(),
            "power": self.power.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Strategy":
        shape = tuple(d["dims"]["shape"])
        return cls(
            scheme=d["scheme"],
            instants=d["instants"],
            assign=np.asarray(d["assign"], dtype=bool).reshape(shape),
            power=np.asarray(d["power"], dtype=float).reshape(shape),
            theta=int(d["theta"]),
            energy=float(d["energy_watt_slots"]),
            interval_bits=d.get("interval_bits"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Strategy":
        return cls.from_dict(json.loads(text))
