"""Constant-velocity Kalman tracking and open-loop prediction of road users."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ObjectEstimate",
    "PredictionTrack",
    "kalman_update",
    "kalman_init",
    "predict_horizon",
    "Q_DEFAULT",
    "DT_PRED",
    "HORIZON",
]

Q_DEFAULT = 0.25 ** 2  # white acceleration variance, m^2/s^4
DT_PRED = 0.08
HORIZON = 15.0
V_INIT = 30.0 / 3.6
SIGMA_V_INIT = 2.0


@dataclass(frozen=True)
class ObjectEstimate:
    """Position/velocity estimate of one vehicle with its 2x2 covariance.

    ``cov`` is stored as ``(s11, s12, s22)``.
    """

    s_hat: float
    v_hat: float
    cov: tuple
    length: float = 4.0
    timestamp: float = 0.0
    ident: int = 0

    def __post_init__(self):
        _check_psd(self.cov)

    @property
    def matrix(self) -> np.ndarray:
        p11, p12, p22 = self.cov
        return np.array([[p11, p12], [p12, p22]])


def _check_psd(cov, tol=1e-9):
    p11, p12, p22 = cov
    scale = max(1.0, abs(p11), abs(p22))
    if p11 < -tol * scale or p22 < -tol * scale or p11 * p22 - p12 * p12 < -tol * scale * scale:
        raise ValueError(f"covariance not positive semi-definite: {cov}")


def _process_noise(dt, q):
    # piecewise-constant white acceleration, G = [dt^2/2, dt]
    g1, g2 = 0.5 * dt * dt, dt
    return q * g1 * g1, q * g1 * g2, q * g2 * g2


def _predict(s, v, cov, dt, q):
    p11, p12, p22 = cov
    q11, q12, q22 = _process_noise(dt, q)
    n11 = p11 + 2.0 * dt * p12 + dt * dt * p22 + q11
    n12 = p12 + dt * p22 + q12
    n22 = p22 + q22
    return s + v * dt, v, (n11, n12, n22)


def kalman_init(z_s: float, r: float, length: float = 4.0, timestamp: float = 0.0,
                v_init: float = V_INIT, sigma_v: float = SIGMA_V_INIT, ident: int = 0):
    """Start a track from a single position measurement."""
    return ObjectEstimate(z_s, v_init, (r, 0.0, sigma_v ** 2), length, timestamp, ident)


def kalman_update(prior: ObjectEstimate, z_s: float, r: float, dt: float,
                  q: float = Q_DEFAULT) -> ObjectEstimate:
    """Constant-velocity predict step over ``dt`` followed by a position update."""
    if r <= 0 or dt <= 0:
        raise ValueError("r and dt must be positive")
    _check_psd(prior.cov)
    s, v, (p11, p12, p22) = _predict(prior.s_hat, prior.v_hat, prior.cov, dt, q)
    innov_var = p11 + r
    k1, k2 = p11 / innov_var, p12 / innov_var
    y = z_s - s
    # Joseph form keeps the posterior symmetric PSD
    a = 1.0 - k1
    n11 = a * a * p11 + k1 * k1 * r
    n12 = a * (p12 - k2 * p11) + k1 * k2 * r
    n22 = p22 - 2.0 * k2 * p12 + k2 * k2 * p11 + k2 * k2 * r
    return ObjectEstimate(s + k1 * y, v + k2 * y, (n11, n12, n22), prior.length,
                          prior.timestamp + dt, prior.ident)


@dataclass(frozen=True)
class PredictionTrack:
    """Open-loop mean and covariance of one vehicle on a uniform grid."""

    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    p11: np.ndarray
    p12: np.ndarray
    p22: np.ndarray
    length: float = 4.0
    ident: int = 0

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def at(self, t):
        """Mean position, mean velocity and position variance at ``t``.

        The mean is affine in time and evaluated exactly; the variance is
        linearly interpolated between grid points.
        """
        t = np.asarray(t, dtype=float)
        s = self.s[0] + self.v[0] * t
        var = np.interp(t, self.t, self.p11)
        return s, np.broadcast_to(self.v[0], np.shape(t)), var


def predict_horizon(est: ObjectEstimate, horizon: float = HORIZON, dt_pred: float = DT_PRED,
                    q: float = Q_DEFAULT) -> PredictionTrack:
    """Propagate ``est`` open-loop with the constant-velocity model."""
    if horizon <= 0 or dt_pred <= 0:
        raise ValueError("horizon and dt_pred must be positive")
    n = int(math.floor(horizon / dt_pred + 1e-9))
    k = np.arange(n + 1, dtype=float)
    t = k * dt_pred
    p11, p12, p22 = est.cov
    q11, q12, q22 = _process_noise(dt_pred, q)
    # closed form of the k-step recursion P_k = F P_{k-1} F^T + Q
    P11 = p11 + 2 * t * p12 + t * t * p22
    P12 = p12 + t * p22
    P22 = p22 + k * q22
    # sums over j < k of F^j Q F^jT with F^j = [[1, j dt], [0, 1]]
    S1 = k * (k - 1) / 2.0
    S2 = (k - 1) * k * (2 * k - 1) / 6.0
    P11 = P11 + k * q11 + 2 * dt_pred * S1 * q12 + dt_pred * dt_pred * S2 * q22
    P12 = P12 + k * q12 + dt_pred * S1 * q22
    return PredictionTrack(t, est.s_hat + est.v_hat * t, np.full_like(t, est.v_hat),
                           P11, P12, P22, est.length, est.ident)
