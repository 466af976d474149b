"""Mean-field approximation of the lattice SIS model.

A single agent sees ``f * d`` contacts with infected agents per tick, so it
is infected with probability ``p' = 1 - (1 - p)**(f d)`` (real exponent)
and then heals with probability q.  The resulting two-state chain on
(H, I) has stationary infected probability

    phi(f) = 1 - q / (1 - (1 - q) (1 - p)**(f d)),

and the mean-field fraction is the positive fixed point of ``phi``.  With
``alpha = d * log(1 / (1 - p))``, ``phi'(0) = (1 - q) alpha / q``, which
gives the threshold ``q0 = alpha / (1 + alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MeanFieldParams",
    "MeanFieldResult",
    "p_prime",
    "transition_matrix",
    "stationary_distribution",
    "phi",
    "threshold_q0",
    "solve_fmf",
    "mf_threshold_curve",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class MeanFieldParams:
    p: float
    q: float
    d: float

    def __post_init__(self):
        for name in ("p", "q", "d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if self.d < 0.0:
            raise ValueError(f"d must be nonnegative, got {self.d}")


@dataclass(frozen=True)
class MeanFieldResult:
    p: float
    q: float
    d: float
    f_mf: float
    q0: float
    p_prime_at_solution: float
    residual: float
    regime: str  # "epidemic" or "extinct"

    @property
    def epidemic(self) -> bool:
        return self.regime == "epidemic"


def _alpha(p: float, d: float) -> float:
    """``d * log(1/(1-p))``; inf when p == 1 and d > 0."""
    if p == 0.0 or d == 0.0:
        return 0.0
    if p == 1.0:
        return math.inf
    return -d * math.log1p(-p)


def p_prime(p: float, f: float, d: float) -> float:
    """Effective per-tick infection probability ``1 - (1-p)**(f d)``."""
    exposure = f * d
    if exposure == 0.0 or p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    return -math.expm1(exposure * math.log1p(-p))


def transition_matrix(p_prime: float, q: float) -> np.ndarray:
    """Row-stochastic matrix of the single-agent chain, rows/cols (H, I)."""
    return np.array([
        [1.0 - p_prime + p_prime * q, p_prime - p_prime * q],
        [q, 1.0 - q],
    ])


def stationary_distribution(p_prime: float, q: float) -> tuple[float, float]:
    """Stationary law ``(P[H], P[I])`` of the two-state chain."""
    denom = p_prime + q - p_prime * q
    if denom <= 0.0:
        raise ValueError("p' = q = 0: every distribution is stationary")
    return q / denom, (p_prime - p_prime * q) / denom


def phi(f: float, p: float, q: float, d: float) -> float:
    """Stationary infected probability given infected fraction ``f``."""
    alpha = _alpha(p, d)
    if f == 0.0 or alpha == 0.0:
        return 0.0
    # exposed = 1 - (1-p)**(f d), kept accurate for small f
    exposed = 1.0 if math.isinf(alpha) else -math.expm1(-alpha * f)
    denom = q + (1.0 - q) * exposed
    if denom == 0.0:
        return 0.0
    return (1.0 - q) * exposed / denom


def threshold_q0(p: float, d: float) -> float:
    """Mean-field epidemic threshold: the epidemic persists iff ``q < q0``."""
    alpha = _alpha(p, d)
    if math.isinf(alpha):
        return 1.0
    return alpha / (1.0 + alpha)


def solve_fmf(params: MeanFieldParams, tol: float = DEFAULT_TOL) -> MeanFieldResult:
    """Positive fixed point of ``phi``, or 0 when ``q >= q0``.

    Existence is decided by the closed-form threshold; the root is then
    bracketed by bisection on ``phi(f)/f - 1``, which is positive near 0
    and negative at 1, so the bracket never collapses onto the trivial root.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    p, q, d = params.p, params.q, params.d
    q0 = threshold_q0(p, d)

    def done(f, residual, regime):
        return MeanFieldResult(p, q, d, f, q0, p_prime(p, f, d), residual, regime)

    if q >= q0:
        return done(0.0, 0.0, "extinct")
    if q == 0.0:
        return done(1.0, 0.0, "epidemic")
    if p == 1.0:
        f = 1.0 - q
        return done(f, abs(phi(f, p, q, d) - f), "epidemic")

    lo, hi = 0.0, 1.0
    f = 0.5
    for _ in range(200):
        f = 0.5 * (lo + hi)
        value = phi(f, p, q, d)
        residual = abs(value - f)
        if residual <= tol and hi - lo <= tol:
            break
        if value > f:
            lo = f
        else:
            hi = f
        if hi - lo <= 4 * np.finfo(float).eps * max(hi, 1e-300):
            break
    residual = abs(phi(f, p, q, d) - f)
    return done(f, residual, "epidemic")


def mf_threshold_curve(d: float, p_grid) -> list[tuple[float, float]]:
    """``(p, q0(p, d))`` for each p in ``p_grid``."""
    return [(float(p), threshold_q0(float(p), float(d))) for p in p_grid]
