"""Safety corridor around the merge target and residual collision risks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

__all__ = [
    "SafetyParams",
    "gaussian_cdf",
    "safety_positions",
    "risk_ahead",
    "risk_behind",
    "exceedance",
]


@dataclass(frozen=True)
class SafetyParams:
    t_safety: float = 1.0
    s_margin: float = 2.0
    p_residual_max: float = 0.05
    w_risk_a: float = 20.0
    w_risk_b: float = 50.0

    def __post_init__(self):
        if self.t_safety < 0 or self.s_margin < 0:
            raise ValueError("t_safety and s_margin must be non-negative")
        if not 0.0 < self.p_residual_max < 1.0:
            raise ValueError("p_residual_max must lie in (0, 1)")


def gaussian_cdf(z):
    """Standard normal CDF, accurate in both tails."""
    return ndtr(z)


def safety_positions(s_pga, v_hat_a, v_hat_b, l_a, l_b, params: SafetyParams):
    """Positions the vehicle ahead must exceed and the one behind must stay below.

    Both bounds widen the corridor: margin and half-length are added ahead
    and subtracted behind.
    """
    s_a = s_pga + v_hat_a * params.t_safety + params.s_margin + 0.5 * l_a
    s_b = s_pga - v_hat_b * params.t_safety - params.s_margin - 0.5 * l_b
    return s_a, s_b


def exceedance(margin, var):
    """P(N(margin, var) < 0), i.e. ``1 - Phi(margin / sigma)``.

    Zero variance is the deterministic limit; an exact zero margin then
    counts as safe.
    """
    margin = np.asarray(margin, dtype=float)
    var = np.asarray(var, dtype=float)
    sd = np.sqrt(np.maximum(var, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = margin / sd
    p = ndtr(-z)
    det = sd == 0.0
    if np.any(det):
        p = np.where(det, (margin < 0).astype(float), p)
    return p if p.ndim else float(p)


def risk_ahead(track_a, s_safety_a, t_f):
    """Probability that the vehicle ahead is not yet beyond ``s_safety_a`` at ``t_f``."""
    s, _, var = track_a.at(t_f)
    return exceedance(s - s_safety_a, var)


def risk_behind(track_b, s_safety_b, t_f):
    """Probability that the vehicle behind has already passed ``s_safety_b`` at ``t_f``."""
    s, _, var = track_b.at(t_f)
    return exceedance(s_safety_b - s, var)
