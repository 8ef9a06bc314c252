"""Exception types shared across the solvers."""

from __future__ import annotations

__all__ = [
    "Infeasible",
    "IterationLimit",
    "NoPath",
    "WhollyInfeasible",
    "MonotonicityViolation",
    "NonMonotoneMap",
    "InstanceTooLarge",
]


class Infeasible(Exception):
    """No plan meets the payload / timing requirements.

    Optional context: ``max_bits`` (best achievable expected bits), ``v_bar``
    (the target), ``theta`` (the load cap) and ``interval`` (1-based
    ``(t_start, t_end)`` of the failing interval).
    """

    def __init__(self, detail: str = "", *, max_bits=None, v_bar=None, theta=None, interval=None):
        self.max_bits = None if max_bits is None else float(max_bits)
        self.v_bar = None if v_bar is None else float(v_bar)
        self.theta = theta
        self.interval = interval
        parts = []
        if interval is not None:
            parts.append(f"interval [{interval[0]}, {interval[1]})")
        if theta is not None:
            parts.append(f"theta={theta}")
        if self.max_bits is not None and self.v_bar is not None:
            parts.append(f"at most {self.max_bits:.6g} expected bits achievable, {self.v_bar:.6g} required")
        if detail:
            parts.append(detail)
        super().__init__("; ".join(parts) or "infeasible")


class IterationLimit(RuntimeError):
    """A bracketing search failed to converge; indicates a numerical bug."""


class NoPath(Exception):
    """Every sampling sequence crosses an infeasible interval."""


class WhollyInfeasible(Exception):
    """No load cap in ``1..K`` admits a feasible strategy."""


class MonotonicityViolation(RuntimeError):
    """Minimum energy increased with the load cap; a solver diagnostic."""


class NonMonotoneMap(ValueError):
    """A scalarization map is not strictly increasing on the sampled range."""


class InstanceTooLarge(ValueError):
    """Instance exceeds the exhaustive oracle's size guard."""
