"""Jerk-optimal and time-weighted jerk-optimal trajectory generation.

A trajectory connects two longitudinal states ``(s, v, a)`` over a fixed
horizon for a triple integrator driven by the jerk ``u``.  Two optimal
families are provided:

* the classic quintic, minimising ``int 1/2 u^2 dt``;
* the time-weighted solution, minimising
  ``int 1/2 ((w_t - 1)/(1 + t) + 1) u^2 dt``.

The time-weighted jerk has the form ``u(t) = p(t) + beta / (w_t + t)`` with
a quadratic ``p``.  Because the stationarity condition forces ``u`` to vanish
at ``t = -1``, the log coefficient obeys ``beta = -(w_t - 1) * p(-1)``, which
closes the linear boundary-value system.  Equivalently
``u(t) = (1 + t) q(t) / (w_t + t)`` for a quadratic ``q``; this form has no
cancellation between its terms and is the one solved and evaluated.
``alpha`` and ``beta`` are reported alongside.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "State1D",
    "TrajKind",
    "QuinticCoefficients",
    "TimeWeightedCoefficients",
    "ConstantDecelCoefficients",
    "Trajectory",
    "DynamicLimits",
    "ConstraintReport",
    "solve_quintic",
    "solve_time_weighted",
    "constant_deceleration",
    "evaluate",
    "sample",
    "jerk_cost",
    "jerk_cost_quad",
    "time_weighted_cost",
    "check_constraints",
    "compute_pnr",
    "write_trajectory_csv",
    "sample_times",
    "check_step",
    "jerk_energy_batch",
]

DT_CHECK = 0.2
DT_PNR = 0.08
_EPS_T = 1e-12


@dataclass(frozen=True)
class State1D:
    """Longitudinal state: position (m), velocity (m/s), acceleration (m/s^2)."""

    s: float
    v: float
    a: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.s, self.v, self.a)):
            raise ValueError(f"non-finite state {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.v, self.a])


class TrajKind(str, enum.Enum):
    TIME_WEIGHTED = "TimeWeighted"
    QUINTIC = "Quintic"
    CONSTANT_DECELERATION = "ConstantDeceleration"


@dataclass(frozen=True)
class QuinticCoefficients:
    # s(t) = sum_k c[k] t^k
    c: tuple
    t_f: float


@dataclass(frozen=True)
class TimeWeightedCoefficients:
    """Time-weighted solution in two equivalent forms.

    ``alpha`` and ``beta`` give ``s(t) = a1 t^5 + a2 t^4 + a3 t^3 + a4 t^2 +
    a5 t + a6 + beta * P(t)`` with ``P''' = 1/(w_t + t)`` and ``P`` anchored
    at zero.  ``q`` holds the same jerk as ``u(t) = (1 + t) q(t) / (w_t + t)``
    with ascending quadratic coefficients.  Evaluation uses ``q``: the
    ``alpha``/``beta`` terms cancel heavily when ``t_f << w_t``.
    """

    alpha: tuple  # (a1, ..., a6)
    beta: float
    w_t: float
    t_f: float
    q: tuple = (0.0, 0.0, 0.0)

    @property
    def poly(self) -> tuple:
        """Ascending coefficients of the polynomial part of the position."""
        return tuple(reversed(self.alpha))


@dataclass(frozen=True)
class ConstantDecelCoefficients:
    b: float
    s_stop: float


@dataclass(frozen=True)
class Trajectory:
    """An analytic motion plan evaluable on ``[0, duration]``.

    ``t_start`` shifts the local clock, so a time-shifted copy of a plan
    (see :meth:`shifted`) keeps the exact same coefficients.
    """

    kind: TrajKind
    coefficients: object
    t_f: float
    x0: State1D
    xf: State1D
    t_start: float = 0.0

    @property
    def duration(self) -> float:
        return self.t_f - self.t_start

    def shifted(self, dt: float) -> "Trajectory":
        """Same plan, with the clock advanced by ``dt``."""
        t0 = self.t_start + dt
        if self.kind is not TrajKind.CONSTANT_DECELERATION:
            t0 = min(t0, self.t_f)
        s, v, a, _ = _eval_raw(self, np.array([t0]))
        return Trajectory(self.kind, self.coefficients, self.t_f,
                          State1D(float(s[0]), float(v[0]), float(a[0])),
                          self.xf, t0)

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True)
class DynamicLimits:
    a_min: float = -4.0
    a_max: float = 2.5
    v_max: float = 50.0 / 3.6
    b_max: float = 4.0

    def __post_init__(self):
        if not (self.a_min < 0.0 < self.a_max):
            raise ValueError("need a_min < 0 < a_max")
        if self.v_max <= 0 or self.b_max <= 0:
            raise ValueError("v_max and b_max must be positive")


@dataclass(frozen=True)
class ConstraintReport:
    valid: bool
    t_violation: Optional[float] = None
    kind: Optional[str] = None  # "a_min", "a_max", "v_min", "v_max"

    def __bool__(self):
        return self.valid


# ---------------------------------------------------------------------------
# jerk shapes (1 + t) t^k / (w + t) and their integrals, anchored at t = 0
# ---------------------------------------------------------------------------

_SERIES_X = 0.5
_SERIES_N = 60


def _series_table():
    # Taylor coefficients of the anchored integrals of x^3 / (1 + x) divided by
    # their leading power, one column per d = 0, 1, 2 (triple, double, single)
    n = np.arange(_SERIES_N)
    sign = (-1.0) ** n
    cols = []
    for d in range(3):
        e = 4.0 + n
        den = e if d == 2 else (e * (e + 1) if d == 1 else e * (e + 1) * (e + 2))
        cols.append(sign / den)
    return np.stack(cols, axis=1)


_SER = _series_table()


def _unit_integrals(x):
    """Integrals of ``x^m / (1 + x)``, ``m = 0..3``, anchored at zero.

    Returns ``F[d, m]`` where ``d = 3`` is the integrand itself and each lower
    ``d`` is one more integration.  Closed forms are used for ``x >= 0.5``;
    below that they cancel and a Taylor series takes over.
    """
    x = np.asarray(x, dtype=float)
    F = np.empty((4, 4) + x.shape)
    inv = 1.0 / (1.0 + x)
    for m in range(4):
        F[3, m] = x ** m * inv
    small = x < _SERIES_X
    big = ~small
    if np.any(big):
        xb = x[big]
        L = np.log1p(xb)
        # anchored integrals of 1/(1+x)
        g = (L, (1.0 + xb) * L - xb, 0.5 * (1.0 + xb) ** 2 * L - 0.75 * xb * xb - 0.5 * xb)
        for m in range(4):
            sgn = (-1.0) ** m
            for d, k in ((2, 1), (1, 2), (0, 3)):
                # x^m/(1+x) = sum_{i<m} (-1)^(m-1-i) x^i + (-1)^m/(1+x)
                poly = np.zeros_like(xb)
                for i in range(m):
                    den = math.prod(range(i + 1, i + k + 1))
                    poly += (-1.0) ** (m - 1 - i) * xb ** (i + k) / den
                F[d, m][big] = poly + sgn * g[k - 1]
    if np.any(small):
        xs = x[small]
        # terms alternate and shrink, so the first dropped one bounds the error
        xmax = float(xs.max())
        n = _SERIES_N if xmax <= 0.0 else int(min(_SERIES_N, max(4, math.ceil(-54.0 / math.log2(xmax)))))
        xp = np.empty((max(n, 7), xs.size))
        xp[0] = 1.0
        for i in range(1, len(xp)):
            np.multiply(xp[i - 1], xs, out=xp[i])
        ser = _SER[:n].T @ xp[:n]
        for d, k in ((2, 1), (1, 2), (0, 3)):
            f = xp[3 + k] * ser[d]
            F[d, 3][small] = f
            # x^(m-1)/(1+x) = x^(m-1) - x^m/(1+x), stable downward for x < 1/2
            for m in (3, 2, 1):
                f = xp[m - 1 + k] * (math.factorial(m - 1) / math.factorial(m - 1 + k)) - f
                F[d, m - 1][small] = f
    return F


def _shape_rows(t, w):
    """Position, velocity, acceleration and jerk rows of the jerk shapes.

    The shapes are ``(1 + t) t^k / (w + t)``, ``k = 0, 1, 2``, so that
    ``u = sum_k q_k shape_k``; for ``w = 1`` they reduce to ``t^k``.  All rows
    vanish at ``t = 0`` except the jerk.  Each output has shape
    ``t.shape + (3,)``.
    """
    t = np.asarray(t, dtype=float)
    if w == 1.0:
        t2 = t * t
        t3 = t2 * t
        s = np.stack([t3 / 6.0, t2 * t2 / 24.0, t3 * t2 / 60.0], axis=-1)
        v = np.stack([t2 / 2.0, t3 / 6.0, t2 * t2 / 12.0], axis=-1)
        a = np.stack([t, t2 / 2.0, t3 / 3.0], axis=-1)
        j = np.stack([np.ones_like(t), t, t2], axis=-1)
        return s, v, a, j
    F = _unit_integrals(t / w)
    # integrals of t^m/(w+t) in t: I[d, m] = w^(m + 2 - d) F[d, m]
    I = np.empty_like(F)
    for d in range(4):
        for m in range(4):
            I[d, m] = w ** (m + 2 - d) * F[d, m]
    rows = [np.stack([I[d, k] + I[d, k + 1] for k in range(3)], axis=-1) for d in range(4)]
    return tuple(rows)


def _check_bvp_args(x0, xf, t_f):
    if not (math.isfinite(t_f) and t_f > 0):
        raise ValueError(f"horizon must be positive and finite, got {t_f}")
    for x in (x0, xf):
        if not isinstance(x, State1D):
            raise TypeError("boundary states must be State1D")


def _solve_batch(x0: State1D, sf, vf, af, t_f, w_t: float):
    """Solve many boundary-value problems sharing ``x0`` and ``w_t``.

    Returns the shape weights ``q`` with shape ``(n, 3)``.  Rows are scaled
    by powers of ``t_f`` and columns equilibrated before the solve.
    """
    T = np.atleast_1d(np.asarray(t_f, dtype=float))
    sf, vf, af = (np.broadcast_to(np.asarray(x, float), T.shape) for x in (sf, vf, af))
    s0, v0, a0 = x0.s, x0.v, x0.a
    rs, rv, ra, _ = _shape_rows(T, w_t)
    # targets after removing the free motion from the initial state
    b = np.stack([(sf - s0 - v0 * T - 0.5 * a0 * T * T) / (T * T),
                  (vf - v0 - a0 * T) / T,
                  af - a0], axis=-1)
    A = np.stack([rs / (T * T)[:, None], rv / T[:, None], ra], axis=1)
    col = np.max(np.abs(A), axis=1, keepdims=True)
    col = np.where(col > 0, col, 1.0)
    y = np.linalg.solve(A / col, b[..., None])[..., 0]
    return y / col[:, 0, :]


def _paper_form(q, w_t):
    """Quadratic ``p`` (t^2, t, 1) and ``beta`` with ``u = p(t) + beta/(w_t + t)``."""
    b0, b1, b2 = (float(x) for x in q)
    if w_t == 1.0:
        return (b2, b1, b0), 0.0
    # synthetic division of (1 + t) q(t) by (t + w_t)
    p2 = b2
    p1 = b1 + b2 - w_t * p2
    p0 = b0 + b1 - w_t * p1
    return (p2, p1, p0), b0 - w_t * p0


def _build(x0, xf, t_f, q, w_t, kind):
    q = tuple(float(x) for x in q)
    if kind is TrajKind.QUINTIC:
        c = (x0.s, x0.v, 0.5 * x0.a, q[0] / 6.0, q[1] / 24.0, q[2] / 60.0)
        coeffs = QuinticCoefficients(c, float(t_f))
    else:
        (j1, j2, j3), beta = _paper_form(q, w_t)
        alpha = (j1 / 60.0, j2 / 24.0, j3 / 6.0, 0.5 * x0.a, x0.v, x0.s)
        coeffs = TimeWeightedCoefficients(alpha, float(beta), float(w_t), float(t_f), q)
    return Trajectory(kind, coeffs, float(t_f), x0, xf)


def solve_quintic(x0: State1D, xf: State1D, t_f: float) -> Trajectory:
    """Minimum-jerk quintic connecting ``x0`` to ``xf`` in ``t_f`` seconds."""
    _check_bvp_args(x0, xf, t_f)
    q = _solve_batch(x0, xf.s, xf.v, xf.a, t_f, 1.0)
    return _build(x0, xf, t_f, q[0], 1.0, TrajKind.QUINTIC)


def solve_time_weighted(x0: State1D, xf: State1D, t_f: float, w_t: float) -> Trajectory:
    """Minimiser of the time-weighted jerk functional.

    Parameters
    ----------
    x0, xf : State1D
        Boundary states at ``t = 0`` and ``t = t_f``.
    t_f : float
        Horizon in seconds, ``> 0``.
    w_t : float
        Time weight ``>= 1``; ``w_t = 1`` gives the plain quintic (with
        ``beta = 0``) but is still reported as a time-weighted trajectory.
    """
    _check_bvp_args(x0, xf, t_f)
    if not (math.isfinite(w_t) and w_t >= 1.0):
        raise ValueError(f"time weight must be >= 1, got {w_t}")
    q = _solve_batch(x0, xf.s, xf.v, xf.a, t_f, float(w_t))
    if not np.all(np.isfinite(q)):
        raise np.linalg.LinAlgError("singular boundary-value system")
    return _build(x0, xf, t_f, q[0], w_t, TrajKind.TIME_WEIGHTED)


def constant_deceleration(x0: State1D, b: float) -> Trajectory:
    """Brake from ``x0`` with constant deceleration ``b`` until standstill.

    The plan starts with acceleration ``-b`` (a step from ``x0.a``), so its
    own initial state is ``(s, v, -b)``.  After the stop it holds still.
    """
    if b < 0 or x0.v < 0:
        raise ValueError("deceleration and speed must be non-negative")
    if x0.v == 0.0 or b == 0.0:
        start = State1D(x0.s, x0.v, 0.0)
        coeffs = ConstantDecelCoefficients(0.0, x0.s)
        return Trajectory(TrajKind.CONSTANT_DECELERATION, coeffs, 0.0, start, start)
    t_stop = x0.v / b
    s_stop = x0.s + x0.v * x0.v / (2.0 * b)
    coeffs = ConstantDecelCoefficients(float(b), float(s_stop))
    return Trajectory(TrajKind.CONSTANT_DECELERATION, coeffs, t_stop,
                      State1D(x0.s, x0.v, -b), State1D(s_stop, 0.0, -b))


def _eval_raw(traj: Trajectory, t):
    """Evaluate at local (unshifted) times without range checks."""
    t = np.asarray(t, dtype=float)
    c = traj.coefficients
    if traj.kind is TrajKind.CONSTANT_DECELERATION:
        x0 = _origin(traj)
        b = c.b
        if b == 0.0:
            z = np.zeros_like(t)
            return z + x0.s, z + x0.v, z, z
        tc = np.minimum(t, traj.t_f)
        s = x0.s + x0.v * tc - 0.5 * b * tc * tc
        v = np.maximum(x0.v - b * tc, 0.0)
        a = np.where(t < traj.t_f, -b, 0.0)
        return s, v, a, np.zeros_like(t)
    if traj.kind is TrajKind.QUINTIC:
        c0, c1, c2, c3, c4, c5 = c.c
        s = c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))))
        v = c1 + t * (2 * c2 + t * (3 * c3 + t * (4 * c4 + t * 5 * c5)))
        a = 2 * c2 + t * (6 * c3 + t * (12 * c4 + t * 20 * c5))
        j = 6 * c3 + t * (24 * c4 + t * 60 * c5)
        return s, v, a, j
    x0 = traj.x0 if traj.t_start == 0.0 else _tw_origin(traj)
    return _tw_eval(x0, c.q, c.w_t, t)


def _tw_origin(traj):
    a6, a5, a4 = traj.coefficients.alpha[5], traj.coefficients.alpha[4], traj.coefficients.alpha[3]
    return State1D(a6, a5, 2.0 * a4)


def _tw_eval(x0: State1D, q, w, t):
    rs, rv, ra, rj = _shape_rows(t, w)
    q = np.asarray(q, dtype=float)
    s = x0.s + t * (x0.v + 0.5 * x0.a * t) + rs @ q
    v = x0.v + x0.a * t + rv @ q
    a = x0.a + ra @ q
    return s, v, a, rj @ q


def _origin(traj: Trajectory) -> State1D:
    # state at local time 0 for constant-deceleration plans
    if traj.t_start == 0.0:
        return traj.x0
    b = traj.coefficients.b
    v0 = traj.x0.v + b * traj.t_start if traj.t_start < traj.t_f else b * traj.t_f
    s0 = traj.coefficients.s_stop - v0 * v0 / (2 * b) if b > 0 else traj.x0.s
    return State1D(s0, v0, -b)


def evaluate(traj: Trajectory, t):
    """State and jerk at time ``t`` (scalar or array) since the plan start.

    Returns ``(State1D, jerk)`` for scalar ``t`` and a tuple of arrays
    ``(s, v, a, j)`` otherwise.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(tt < -_EPS_T):
        raise ValueError("evaluation time before trajectory start")
    if traj.kind is not TrajKind.CONSTANT_DECELERATION and np.any(tt > traj.duration + 1e-9):
        raise ValueError(f"evaluation time beyond horizon {traj.duration}")
    tt = np.clip(tt, 0.0, None) + traj.t_start
    if traj.kind is not TrajKind.CONSTANT_DECELERATION:
        tt = np.minimum(tt, traj.t_f)
    s, v, a, j = _eval_raw(traj, tt)
    if scalar:
        return State1D(float(s[0]), float(v[0]), float(a[0])), float(j[0])
    return s, v, a, j


def sample_times(t_f: float, dt: float) -> np.ndarray:
    """0, dt, 2 dt, ... up to ``t_f``, with ``t_f`` itself appended."""
    n = int(math.floor(t_f / dt + 1e-9))
    ts = np.arange(n + 1) * dt
    if t_f - ts[-1] > 1e-9:
        ts = np.append(ts, t_f)
    return ts


def sample(traj: Trajectory, dt: float):
    ts = sample_times(traj.duration, dt)
    return (ts,) + evaluate(traj, ts)


# ---------------------------------------------------------------------------
# costs
# ---------------------------------------------------------------------------

_GL_N = 24
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_N)
_GL_PANEL = 5.0


def _gl_nodes(t0, t1):
    """Composite Gauss-Legendre nodes and weights on ``[t0, t1]``."""
    n = max(1, int(math.ceil((t1 - t0) / _GL_PANEL)))
    edges = np.linspace(t0, t1, n + 1)
    h = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + h[:, None] * _GL_X).ravel()
    wts = (h[:, None] * _GL_W).ravel()
    return x, wts


def jerk_cost(traj: Trajectory) -> float:
    """``int 1/2 u^2 dt`` over the remaining horizon.

    Composite 24-point Gauss-Legendre on panels of at most 5 s: exact for
    quintics, and for time-weighted plans the integrand is analytic with its
    nearest singularity at ``t = -w_t <= -1``, so the rule is converged to
    round-off.
    """
    if traj.kind is TrajKind.CONSTANT_DECELERATION or traj.duration <= 0:
        return 0.0
    x, wts = _gl_nodes(traj.t_start, traj.t_f)
    j = _eval_raw(traj, x)[3]
    return 0.5 * float(np.dot(wts, j * j))


def _gl_batch_nodes(t_f):
    """Gauss-Legendre nodes and weights on ``[0, t_f]`` for many horizons.

    One panel count (set by the longest horizon) serves the whole batch so the
    shape rows can be evaluated in a single call.  Returns arrays of shape
    ``(n, G)``.
    """
    t_f = np.asarray(t_f, dtype=float)
    npan = max(1, int(math.ceil(float(t_f.max()) / _GL_PANEL))) if t_f.size else 1
    u = np.linspace(0.0, 1.0, npan + 1)
    h = 0.5 * np.diff(u)
    mid = 0.5 * (u[1:] + u[:-1])
    xr = (mid[:, None] + h[:, None] * _GL_X).ravel()
    wr = (h[:, None] * _GL_W).ravel()
    return t_f[:, None] * xr, t_f[:, None] * wr


def jerk_energy_batch(q, w_t: float, t_f) -> np.ndarray:
    """``int_0^t_f u^2 dt`` for many shape-weight vectors ``q`` (shape ``(n, 3)``)."""
    q = np.asarray(q, dtype=float)
    ts, wts = _gl_batch_nodes(t_f)
    jv = np.einsum("nmk,nk->nm", _shape_rows(ts, w_t)[3], q)
    return np.sum(wts * jv * jv, axis=1)


def jerk_cost_quad(traj: Trajectory, rtol: float = 1e-8) -> float:
    """Adaptive-quadrature counterpart of :func:`jerk_cost`."""
    if traj.kind is TrajKind.CONSTANT_DECELERATION or traj.duration <= 0:
        return 0.0
    f = lambda t: 0.5 * evaluate(traj, t)[1] ** 2
    val, _ = integrate.quad(f, 0.0, traj.duration, epsrel=rtol, epsabs=0.0, limit=200)
    return val


def time_weighted_cost(traj: Trajectory, w_t: float, rtol: float = 1e-8) -> float:
    """``int 1/2 ((w_t - 1)/(1 + t) + 1) u^2 dt`` by adaptive quadrature."""
    if w_t < 1.0:
        raise ValueError(f"time weight must be >= 1, got {w_t}")
    if traj.kind is TrajKind.CONSTANT_DECELERATION or traj.duration <= 0:
        return 0.0

    def f(t):
        u = evaluate(traj, t)[1]
        return 0.5 * ((w_t - 1.0) / (1.0 + t) + 1.0) * u * u

    val, _ = integrate.quad(f, 0.0, traj.duration, epsrel=rtol, epsabs=0.0, limit=200)
    return val


# ---------------------------------------------------------------------------
# constraints and point of no return
# ---------------------------------------------------------------------------

def _first_violation(ts, v, a, limits):
    checks = (
        ("a_min", a < limits.a_min),
        ("a_max", a > limits.a_max),
        ("v_min", v < 0.0),
        ("v_max", v > limits.v_max),
    )
    first = None
    for kind, bad in checks:
        idx = np.flatnonzero(bad)
        if idx.size and (first is None or idx[0] < first[0]):
            first = (idx[0], kind)
    if first is None:
        return ConstraintReport(True)
    return ConstraintReport(False, float(ts[first[0]]), first[1])


MIN_CHECK_SAMPLES = 10


def check_step(duration: float, dt_check: float) -> float:
    """Sampling step for constraint checks; short plans get at least 10 intervals."""
    if duration <= 0:
        return dt_check
    return min(dt_check, duration / MIN_CHECK_SAMPLES)


def check_constraints(traj: Trajectory, limits: DynamicLimits,
                      dt_check: float = DT_CHECK) -> ConstraintReport:
    """Sample ``a`` and ``v`` every ``dt_check`` and report the first violation."""
    if dt_check <= 0:
        raise ValueError("dt_check must be positive")
    ts = sample_times(traj.duration, check_step(traj.duration, dt_check))
    _, v, a, _ = evaluate(traj, ts)
    return _first_violation(ts, v, a, limits)


def compute_pnr(traj: Trajectory, s_yield: float, b_max: float,
                dt: float = DT_PNR) -> Optional[tuple]:
    """Last sampled time from which braking at ``b_max`` still stops before ``s_yield``.

    Returns ``(t_pnr, State1D)`` with the PNR state ``(s_yield - v^2/(2 b_max),
    v, -b_max)``, or ``None`` when no sample lies inside the braking envelope.
    """
    ts = sample_times(traj.duration, dt)
    s, v, _, _ = evaluate(traj, ts)
    ok = s <= s_yield - v * v / (2.0 * b_max)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return None
    k = idx[-1]
    vk = float(v[k])
    return float(ts[k]), State1D(s_yield - vk * vk / (2.0 * b_max), vk, -b_max)


def write_trajectory_csv(path, traj: Trajectory, dt: float = 0.01, t_offset: float = 0.0):
    """Write ``t,s,v,a,j`` rows sampled every ``dt``."""
    duration = traj.duration if traj.duration > 0 else 0.0
    ts = sample_times(duration, dt) if duration > 0 else np.array([0.0])
    s, v, a, j = evaluate(traj, ts)
    rows = np.column_stack([ts + t_offset, s, v, a, j])
    write_rows_csv(path, ("t", "s", "v", "a", "j"), rows)


def write_rows_csv(path, header: Sequence[str], rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{x:.12g}" for x in r])
