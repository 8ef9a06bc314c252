"""Expected and realized per-RB capacity under Gamma small-scale fading.

The expectation over ``h ~ Gamma(kappa, g/kappa)`` is taken with a fixed
quadrature rule on ``y = log(h kappa / g)``.  In that variable both the
Gamma density and ``log(1 + p h / noise)`` are smooth and decay fast, so a
plain trapezoid rule converges geometrically for every shape, including the
large-kappa limit where the density collapses onto its mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

__all__ = [
    "ChannelStats",
    "KAPPA_MIN",
    "expected_capacity",
    "expected_capacity_derivative",
    "gamma_nodes",
    "power_at_price",
    "rate_from_nodes",
    "marginal_from_nodes",
    "realized_capacity",
    "sample_channel",
]

KAPPA_MIN = 0.5
LN2 = np.log(2.0)

# Tail cut of the log-density, relative to its peak (e^-40 ~ 4e-18).
_TAIL_LOG = 40.0


@lru_cache(maxsize=4096)
def _nodes_cached(kappa: float) -> tuple[np.ndarray, np.ndarray]:
    def logpdf(y):
        # log density of Y = log X, X ~ Gamma(kappa, 1/kappa), shifted so the peak is 0
        return kappa * (y - np.expm1(y))

    lo = optimize.brentq(lambda y: logpdf(y) + _TAIL_LOG, -1e5, 0.0)
    hi = optimize.brentq(lambda y: logpdf(y) + _TAIL_LOG, 0.0, 60.0)
    step = min(0.5, 0.25 / np.sqrt(kappa))
    n = int(np.ceil((hi - lo) / step)) + 1
    y = np.linspace(lo, hi, n)
    w = np.exp(logpdf(y))
    w /= w.sum()
    x = np.exp(y)
    x /= np.dot(w, x)  # exact unit mean keeps the rule below the Jensen bound at low SNR
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gamma_nodes(kappa: float) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights for ``E[f(X)]``, ``X ~ Gamma(kappa, 1/kappa)``.

    The unit-mean variable is returned; scale by ``g`` for the channel gain.
    Results are cached per shape and are read-only.
    """
    kappa = float(kappa)
    if not kappa >= KAPPA_MIN:
        raise ValueError(f"kappa must be >= {KAPPA_MIN}, got {kappa}")
    return _nodes_cached(kappa)


def _check(p, g, kappa, B, noise):
    if np.any(np.asarray(p) < 0):
        raise ValueError("transmit power must be non-negative")
    if g <= 0 or B <= 0 or noise <= 0:
        raise ValueError("g, B and noise must be positive")


def expected_capacity(p: float, g: float, kappa: float, B: float, noise: float) -> float:
    """``E_h[B log2(1 + p h / noise)]`` with ``h ~ Gamma(kappa, g / kappa)``."""
    _check(p, g, kappa, B, noise)
    x, w = gamma_nodes(kappa)
    return float(B * np.dot(w, np.log1p(p * g * x / noise)) / LN2)


def expected_capacity_derivative(p: float, g: float, kappa: float, B: float, noise: float) -> float:
    """Derivative of :func:`expected_capacity` with respect to ``p``."""
    _check(p, g, kappa, B, noise)
    x, w = gamma_nodes(kappa)
    q = g * x / noise
    return float(B * np.dot(w, q / (1.0 + p * q)) / LN2)


def realized_capacity(p: float, h: float, B: float, noise: float) -> float:
    """Bits carried in one slot by one RB with realized gain ``h``."""
    return float(B * np.log1p(p * h / noise) / LN2)


def sample_channel(g, kappa, rng: np.random.Generator, size=None):
    """Draw ``h ~ Gamma(kappa, g / kappa)``; broadcasts over array inputs."""
    g = np.asarray(g, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    return rng.gamma(kappa, g / kappa, size=size)


# ---------------------------------------------------------------------------
# Vectorized kernels on precomputed SNR nodes.
#
# ``q[..., m]`` is the per-watt SNR at node m (g x_m / noise) and ``w[..., m]``
# the matching weight; padding nodes carry zero weight.  ``B`` is the
# bits-per-slot scale.


def rate_from_nodes(p, q, w, B):
    p = np.asarray(p, dtype=float)
    return B * np.einsum("...m,...m->...", w, np.log1p(p[..., None] * q)) / LN2


def marginal_from_nodes(p, q, w, B):
    p = np.asarray(p, dtype=float)
    return B * np.einsum("...m,...m->...", w, q / (1.0 + p[..., None] * q)) / LN2


def power_at_price(r, q, w, B, m0=None, tol=1e-13, max_iter=200):
    """Solve ``d/dp E[c(p)] = r`` for ``p >= 0`` element-wise.

    Returns zero where the marginal capacity at zero power is already below
    the price.  Safeguarded Newton on ``1 / marginal(p)``, which is close to
    affine in ``p``, with geometric bisection as the fallback.
    """
    r = np.broadcast_to(np.asarray(r, dtype=float), q.shape[:-1])
    if m0 is None:
        m0 = marginal_from_nodes(np.zeros(q.shape[:-1]), q, w, B)
    p = np.zeros(q.shape[:-1])
    act = m0 > r
    if not np.any(act):
        return p
    qa, wa, ra = q[act], w[act], r[act]
    lo = np.zeros(ra.shape)
    hi = B / (LN2 * ra)
    qbar = np.einsum("jm,jm->j", wa, qa)
    x = np.clip(hi - 1.0 / qbar, 0.0, hi)
    target = 1.0 / ra
    k = B / LN2
    for _ in range(max_iter):
        d = 1.0 + x[:, None] * qa
        m = k * np.einsum("jm,jm->j", wa, qa / d)
        dm = -k * np.einsum("jm,jm->j", wa, (qa / d) ** 2)
        F = 1.0 / m - target
        below = F < 0
        lo = np.where(below, x, lo)
        hi = np.where(below, hi, x)
        done = np.abs(F) <= tol * target
        if np.all(done | (hi - lo <= 1e-15 * hi)):
            break
        step = F / (-dm / m**2)
        xn = x - step
        bad = ~((xn > lo) & (xn < hi))
        mid = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * hi)
        x = np.where(done, x, np.where(bad, mid, xn))
    p[act] = x
    return p


@dataclass(eq=False)
class ChannelStats:
    """Predicted large-scale gain and Gamma shape per (BS, RB, slot).

    ``bandwidth`` converts spectral efficiency to bits per slot (RB bandwidth
    times slot duration) and ``noise_w`` is the noise power in watts.  Slots
    are 0-based internally.
    """

    g: np.ndarray
    kappa: np.ndarray
    bandwidth: float
    noise_w: float
    _slot_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        self.kappa = np.asarray(self.kappa, dtype=float)
        if self.g.ndim != 3 or self.g.shape != self.kappa.shape:
            raise ValueError("g and kappa must be (N, K, T) arrays of equal shape")
        if not np.all(np.isfinite(self.g)) or np.any(self.g <= 0):
            raise ValueError("all gains must be finite and positive")
        if np.any(~(self.kappa >= KAPPA_MIN)):
            raise ValueError(f"all kappa must be >= {KAPPA_MIN}")
        if self.bandwidth <= 0 or self.noise_w <= 0:
            raise ValueError("bandwidth and noise must be positive")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.g.shape

    @property
    def N(self) -> int:
        return self.g.shape[0]

    @property
    def K(self) -> int:
        return self.g.shape[1]

    @property
    def T(self) -> int:
        return self.g.shape[2]

    def slot_nodes(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """SNR nodes ``q`` and weights ``w`` of shape (N, K, M) for 0-based slot ``t``.

        Built once per slot and shared by every interval covering it.
        """
        hit = self._slot_cache.get(t)
        if hit is not None:
            return hit
        kap = self.kappa[:, :, t]
        rules = [gamma_nodes(k) for k in kap.ravel()]
        M = max(len(x) for x, _ in rules)
        q = np.ones((kap.size, M))
        w = np.zeros((kap.size, M))
        scale = (self.g[:, :, t] / self.noise_w).ravel()
        for j, (x, wx) in enumerate(rules):
            q[j, : len(x)] = scale[j] * x
            q[j, len(x):] = scale[j]
            w[j, : len(x)] = wx
        N, K = kap.shape
        out = (q.reshape(N, K, M), w.reshape(N, K, M))
        for a in out:
            a.setflags(write=False)
        self._slot_cache[t] = out
        return out
