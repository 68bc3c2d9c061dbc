"""Merge planning cycle: option search, risk-aware selection, yielding and fail-safe.

Positions of the ego vehicle (on its approach path) and of the main-road
vehicles share one arc-length axis that agrees at the merge point
``LocalMap.s_merge``.  Main-road traffic drives towards increasing ``s``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import trajgen as tg
from .predict import (DT_PRED, HORIZON, Q_DEFAULT, ObjectEstimate, PredictionTrack,
                      predict_horizon)
from .risk import SafetyParams, exceedance, safety_positions
from .trajgen import DynamicLimits, State1D, Trajectory

__all__ = [
    "LocalMap",
    "PlannerConfig",
    "OptionKind",
    "DecisionClass",
    "MergeCandidate",
    "CandidateSet",
    "Decision",
    "LockState",
    "GapTarget",
    "preprocess",
    "enumerate_gap_targets",
    "enumerate_before_first_targets",
    "evaluate_option",
    "plan_gentle_stop",
    "fail_safe",
    "gentle_stop_grid",
    "plan_cycle",
    "DecisionLog",
]


@dataclass(frozen=True)
class LocalMap:
    s_yield: float = 97.0
    s_merge: float = 100.0
    v_max: float = 30.0 / 3.6  # target speed of the main road
    sight_range: float = 200.0
    clearance: float = 50.0  # keep objects up to this far past the merge point

    def __post_init__(self):
        if self.s_yield > self.s_merge:
            raise ValueError("yield line must not lie beyond the merge point")
        if self.v_max <= 0:
            raise ValueError("v_max must be positive")


@dataclass(frozen=True)
class PlannerConfig:
    limits: DynamicLimits = field(default_factory=DynamicLimits)
    safety: SafetyParams = field(default_factory=SafetyParams)
    w_t: float = 1.0
    dt_f: float = 0.2
    horizon: float = HORIZON
    dt_check: float = tg.DT_CHECK
    dt_pnr: float = tg.DT_PNR
    dt_cycle: float = 0.08
    dt_pred: float = DT_PRED
    q: float = Q_DEFAULT
    a_min_comfort: float = -2.5
    gentle_dt: float = 0.25
    gentle_t_max: float = 20.0

    def __post_init__(self):
        if self.w_t < 1.0:
            raise ValueError(f"w_t must be >= 1, got {self.w_t}")
        for name in ("dt_f", "horizon", "dt_check", "dt_pnr", "dt_cycle", "dt_pred", "gentle_dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class OptionKind(str, enum.Enum):
    BEFORE_FIRST = "BeforeFirst"
    INTO_GAP = "IntoGap"
    BEHIND_LAST = "BehindLast"


class DecisionClass(str, enum.Enum):
    MERGE_BEFORE_FIRST = "MergeBeforeFirst"
    MERGE_INTO_GAP = "MergeIntoGap"
    GENTLE_STOP = "GentleStop"
    FAIL_SAFE = "FailSafe"
    LOCKED = "Locked"


@dataclass(frozen=True)
class MergeCandidate:
    t_f: float
    target: State1D
    trajectory: Trajectory
    pnr: Optional[tuple]
    p_risk_a: float
    p_risk_b: float
    jerk_cost: float
    cost: float
    option_kind: OptionKind
    gap_index: int = 0

    @property
    def decision_class(self) -> DecisionClass:
        if self.option_kind is OptionKind.BEFORE_FIRST:
            return DecisionClass.MERGE_BEFORE_FIRST
        return DecisionClass.MERGE_INTO_GAP


@dataclass(frozen=True)
class CandidateSet:
    """All valid candidates of one cycle, in construction order."""

    t_f: np.ndarray
    v_f: np.ndarray
    p_a: np.ndarray
    p_b: np.ndarray
    jerk_cost: np.ndarray
    cost: np.ndarray
    option: np.ndarray  # index into OPTION_CODES
    gap_index: np.ndarray

    def __len__(self):
        return int(self.t_f.size)


OPTION_CODES = (OptionKind.BEFORE_FIRST, OptionKind.INTO_GAP, OptionKind.BEHIND_LAST)


@dataclass(frozen=True)
class Decision:
    cls: DecisionClass
    trajectory: Trajectory
    candidate: Optional[MergeCandidate] = None
    lock_engaged: bool = False
    emergency: bool = False
    candidates: Optional[CandidateSet] = None

    @property
    def cost(self) -> float:
        if self.candidate is not None:
            return self.candidate.cost
        return tg.jerk_cost(self.trajectory)


@dataclass(frozen=True)
class LockState:
    engaged: bool = False
    trajectory: Optional[Trajectory] = None
    candidate: Optional[MergeCandidate] = None
    elapsed: float = 0.0


class GapTarget(tuple):
    """``(t_f, target, p_a, p_b)``."""

    __slots__ = ()

    def __new__(cls, t_f, target, p_a, p_b):
        return super().__new__(cls, (t_f, target, p_a, p_b))

    t_f = property(lambda self: self[0])
    target = property(lambda self: self[1])
    p_a = property(lambda self: self[2])
    p_b = property(lambda self: self[3])


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

def preprocess(objects: Sequence[ObjectEstimate], lmap: LocalMap) -> List[ObjectEstimate]:
    """Keep vehicles in sight and not long past the merge point, nearest arrival first."""
    kept = []
    for o in objects:
        d = lmap.s_merge - o.s_hat
        if d > lmap.sight_range or -d > lmap.clearance:
            continue
        kept.append(o)
    return sorted(kept, key=lambda o: lmap.s_merge - o.s_hat)


# ---------------------------------------------------------------------------
# target enumeration
# ---------------------------------------------------------------------------

def _tf_grid(cfg: PlannerConfig, t_now: float = 0.0) -> np.ndarray:
    """Horizons whose arrival instants ``t_now + t_f`` lie on a fixed ``dt_f`` clock grid.

    Anchoring arrivals to the clock rather than to the current cycle keeps
    the previous plan's arrival time available in the next cycle.
    """
    eps = 1e-9
    k0 = math.floor(t_now / cfg.dt_f + eps) + 1
    k1 = math.floor((t_now + cfg.horizon) / cfg.dt_f + eps)
    tf = np.arange(k0, k1 + 1) * cfg.dt_f - t_now
    return tf[tf > eps]


def _risk_a(track, tf, lmap, params):
    s, v, var = track.at(tf)
    s_a, _ = safety_positions(lmap.s_merge, v, 0.0, track.length, 0.0, params)
    return exceedance(s - s_a, var), v


def _risk_b(track, tf, lmap, params):
    s, v, var = track.at(tf)
    _, s_b = safety_positions(lmap.s_merge, 0.0, v, 0.0, track.length, params)
    return exceedance(s_b - s, var)


def _gap_window(track_ahead, track_behind, lmap, params, tf):
    """Indices of ``tf`` emitted for one gap plus the risk arrays."""
    p_a, v_a = _risk_a(track_ahead, tf, lmap, params)
    if track_behind is None:
        p_b = np.zeros_like(tf)
    else:
        p_b = _risk_b(track_behind, tf, lmap, params)
    pmax = params.p_residual_max
    ok_a = np.flatnonzero(p_a <= pmax)
    if ok_a.size == 0:
        return np.empty(0, dtype=int), p_a, p_b, v_a
    k0 = ok_a[0]
    stop = np.flatnonzero(p_b[k0:] > pmax)
    k1 = k0 + stop[0] if stop.size else tf.size
    idx = np.arange(k0, k1)
    idx = idx[p_a[idx] <= pmax]
    return idx, p_a, p_b, v_a


def enumerate_gap_targets(track_ahead: PredictionTrack, track_behind: Optional[PredictionTrack],
                          lmap: LocalMap, params: SafetyParams, dt_f: float = 0.2,
                          horizon: float = HORIZON) -> List[GapTarget]:
    """Arrival times at the merge point that respect both residual-risk bounds.

    The scan starts at the first time the vehicle ahead has cleared the
    corridor and stops as soon as the vehicle behind intrudes.  Without a
    vehicle behind the gap extends to the end of sight.
    """
    tf = np.arange(1, int(math.floor(horizon / dt_f + 1e-9)) + 1) * dt_f
    idx, p_a, p_b, v_a = _gap_window(track_ahead, track_behind, lmap, params, tf)
    return [GapTarget(float(tf[k]), State1D(lmap.s_merge, float(v_a[k]), 0.0),
                      float(p_a[k]), float(p_b[k])) for k in idx]


def _before_first_window(track_first, lmap, params, tf):
    """Indices up to the last arrival time the first vehicle still tolerates."""
    if track_first is None:
        p_b = np.zeros_like(tf)
    else:
        p_b = _risk_b(track_first, tf, lmap, params)
    bad = np.flatnonzero(p_b > params.p_residual_max)
    k_end = bad[0] if bad.size else tf.size  # exclusive
    return k_end, p_b


def _reverse_valid_run(valid: np.ndarray) -> np.ndarray:
    """Backward scan from the last entry: skip leading invalid, stop at the next invalid."""
    n = valid.size
    rev = valid[::-1]
    first = np.flatnonzero(rev)
    if first.size == 0:
        return np.empty(0, dtype=int)
    start = first[0]
    gap = np.flatnonzero(~rev[start:])
    stop = start + gap[0] if gap.size else n
    return (n - 1 - np.arange(start, stop))


def enumerate_before_first_targets(track_first: Optional[PredictionTrack], ego: State1D,
                                   lmap: LocalMap, limits: DynamicLimits, params: SafetyParams,
                                   dt_f: float = 0.2, horizon: float = HORIZON, w_t: float = 1.0,
                                   dt_check: float = tg.DT_CHECK) -> List[GapTarget]:
    """Targets for merging ahead of the first vehicle, in backward scan order.

    The scan runs from the latest arrival time the first vehicle tolerates
    towards earlier arrivals until the ego connection violates its dynamic
    limits.  Returned tuples carry ``p_a = 0``.
    """
    tf = np.arange(1, int(math.floor(horizon / dt_f + 1e-9)) + 1) * dt_f
    k_end, p_b = _before_first_window(track_first, lmap, params, tf)
    if k_end == 0:
        return []
    ts = tf[:k_end]
    batch = _evaluate_batch(ego, ts, np.full_like(ts, lmap.s_merge), np.full_like(ts, lmap.v_max),
                            w_t, limits, dt_check)
    order = _reverse_valid_run(batch.valid)
    return [GapTarget(float(ts[k]), State1D(lmap.s_merge, lmap.v_max, 0.0), 0.0, float(p_b[k]))
            for k in order]


# ---------------------------------------------------------------------------
# batched trajectory evaluation
# ---------------------------------------------------------------------------

@dataclass
class _Batch:
    tf: np.ndarray
    q: np.ndarray  # jerk shape weights, see trajgen
    valid: np.ndarray
    jerk_cost: np.ndarray


def _evaluate_batch(ego: State1D, tf, sf, vf, w_t, limits, dt_check, a_min=None) -> _Batch:
    """Solve, constraint-check and cost many targets reached from ``ego``."""
    tf = np.asarray(tf, dtype=float)
    if tf.size == 0:
        e = np.empty(0)
        return _Batch(tf, np.empty((0, 3)), np.empty(0, dtype=bool), e)
    q = tg._solve_batch(ego, sf, vf, 0.0, tf, w_t)
    a_lo = limits.a_min if a_min is None else a_min
    # per-candidate uniform grid, never coarser than dt_check
    m = max(tg.MIN_CHECK_SAMPLES, int(math.ceil(tf.max() / dt_check - 1e-9))) + 1
    ts = tf[:, None] * np.linspace(0.0, 1.0, m)[None, :]
    tq, wq = tg._gl_batch_nodes(tf)
    # one pass over the shape rows for the check grid and the energy nodes
    _, rv, ra, rj = tg._shape_rows(np.concatenate([ts, tq], axis=1), w_t)
    rv, ra, rj = rv[:, :m], ra[:, :m], rj[:, m:]
    v = ego.v + ego.a * ts + np.einsum("nmk,nk->nm", rv, q)
    a = ego.a + np.einsum("nmk,nk->nm", ra, q)
    bad = (a < a_lo) | (a > limits.a_max) | (v < 0.0) | (v > limits.v_max)
    valid = ~bad.any(axis=1)
    # terminal samples are the targets themselves
    valid &= (vf >= 0.0) & (vf <= limits.v_max)
    valid &= np.all(np.isfinite(q), axis=1)
    jv = np.einsum("nmk,nk->nm", rj, q)
    cost = 0.5 * np.sum(wq * jv * jv, axis=1)
    return _Batch(tf, q, valid, cost)


def _trajectory_from(ego, tf, sf, vf, q, w_t, kind=tg.TrajKind.TIME_WEIGHTED):
    return tg._build(ego, State1D(sf, vf, 0.0), float(tf), q, w_t, kind)


def evaluate_option(ego: State1D, target, lmap: LocalMap, limits: DynamicLimits,
                    params: SafetyParams, w_t: float = 1.0, p_a: float = 0.0, p_b: float = 0.0,
                    option_kind: OptionKind = OptionKind.INTO_GAP, gap_index: int = 0,
                    dt_check: float = tg.DT_CHECK, dt_pnr: float = tg.DT_PNR):
    """Connect ``ego`` to one ``(t_f, target)`` and score it.

    Returns a :class:`MergeCandidate`, or ``None`` when the connection breaks
    the dynamic limits, a risk bound, or the solve itself.
    """
    t_f, x_f = target
    if p_a > params.p_residual_max or p_b > params.p_residual_max:
        return None
    try:
        traj = tg.solve_time_weighted(ego, x_f, t_f, w_t)
    except (ValueError, np.linalg.LinAlgError):
        return None
    if not tg.check_constraints(traj, limits, dt_check):
        return None
    jc = tg.jerk_cost(traj)
    cost = jc + params.w_risk_a * p_a + params.w_risk_b * p_b
    pnr = tg.compute_pnr(traj, lmap.s_yield, limits.b_max, dt_pnr)
    return MergeCandidate(float(t_f), x_f, traj, pnr, float(p_a), float(p_b), jc, cost,
                          option_kind, gap_index)


# ---------------------------------------------------------------------------
# yielding and fail-safe
# ---------------------------------------------------------------------------

GENTLE_FINE_DT = 0.01
GENTLE_FINE_UNTIL = 1.0


def gentle_stop_grid(v: float, cfg: PlannerConfig) -> np.ndarray:
    """Stop durations tried by :func:`plan_gentle_stop`.

    ``t_min = 1.5 v / |a_min_comfort|`` then ``gentle_dt`` steps up to
    ``gentle_t_max``.  Durations below one second are additionally sampled
    at 0.01 s: a stop already under way is replanned every cycle, and its
    remaining duration must stay reachable or the last few centimetres
    fall through to the fail-safe.
    """
    t_min = 1.5 * v / abs(cfg.a_min_comfort)
    start = t_min if t_min > 0 else cfg.gentle_dt
    n = int(math.floor((cfg.gentle_t_max - start) / cfg.gentle_dt + 1e-9))
    coarse = start + cfg.gentle_dt * np.arange(max(n + 1, 0))
    fine = GENTLE_FINE_DT * np.arange(1, int(round(GENTLE_FINE_UNTIL / GENTLE_FINE_DT)) + 1)
    fine = fine[fine >= t_min]
    return np.unique(np.concatenate([fine, coarse]))


def plan_gentle_stop(ego: State1D, lmap: LocalMap, limits: DynamicLimits,
                     cfg: Optional[PlannerConfig] = None) -> Optional[Trajectory]:
    """Comfortable minimum-jerk stop at the yield line, or ``None`` if out of reach."""
    cfg = cfg or PlannerConfig(limits=limits)
    if ego.s > lmap.s_yield or (ego.s == lmap.s_yield and (ego.v != 0.0 or ego.a != 0.0)):
        return None
    tf = gentle_stop_grid(ego.v, cfg)
    if tf.size == 0:
        return None
    batch = _evaluate_batch(ego, tf, np.full_like(tf, lmap.s_yield), np.zeros_like(tf), 1.0,
                            limits, cfg.dt_check, a_min=max(cfg.a_min_comfort, limits.a_min))
    if not batch.valid.any():
        return None
    idx = np.flatnonzero(batch.valid)
    best = idx[np.argmin(batch.jerk_cost[idx])]  # argmin keeps the earliest on ties
    return _trajectory_from(ego, tf[best], lmap.s_yield, 0.0, batch.q[best], 1.0,
                            tg.TrajKind.QUINTIC)


V_REST = 1e-9  # speeds at or below this count as standstill


def fail_safe(ego: State1D, lmap: LocalMap, b_max: float):
    """Constant-deceleration stop at the yield line.

    Returns ``(trajectory, emergency)``; ``emergency`` is set when more than
    ``b_max`` would be needed, in which case ``b_max`` is applied anyway.
    """
    if ego.v < 0:
        raise ValueError("fail-safe expects non-negative speed")
    if ego.v <= V_REST:
        return tg.constant_deceleration(State1D(ego.s, 0.0, ego.a), 0.0), False
    d = lmap.s_yield - ego.s
    if d <= 0:
        return tg.constant_deceleration(ego, b_max), True
    b = ego.v * ego.v / (2.0 * d)
    if b > b_max:
        # a state on the braking envelope reproduces b_max only up to round-off
        if b <= b_max * (1.0 + 1e-9):
            return tg.constant_deceleration(ego, b_max), False
        return tg.constant_deceleration(ego, b_max), True
    return tg.constant_deceleration(ego, b), False


# ---------------------------------------------------------------------------
# the cycle
# ---------------------------------------------------------------------------

def _collect_candidates(ego, relevant, tracks, lmap, cfg, t_now=0.0):
    tf = _tf_grid(cfg, t_now)
    params = cfg.safety
    parts = []  # (tf, vf, p_a, p_b, option code, gap index, before_first flag)

    first = tracks[0] if tracks else None
    k_end, p_b0 = _before_first_window(first, lmap, params, tf)
    if k_end:
        sl = slice(0, k_end)
        parts.append((tf[sl], np.full(k_end, lmap.v_max), np.zeros(k_end), p_b0[sl], 0, 0))
    for i, ahead in enumerate(tracks):
        behind = tracks[i + 1] if i + 1 < len(tracks) else None
        idx, p_a, p_b, v_a = _gap_window(ahead, behind, lmap, params, tf)
        if idx.size:
            code = 1 if behind is not None else 2
            parts.append((tf[idx], v_a[idx], p_a[idx], p_b[idx], code, i))
    if not parts:
        return None
    t_all = np.concatenate([p[0] for p in parts])
    v_all = np.concatenate([p[1] for p in parts])
    batch = _evaluate_batch(ego, t_all, np.full_like(t_all, lmap.s_merge), v_all, cfg.w_t,
                            cfg.limits, cfg.dt_check)
    valid = batch.valid.copy()
    if k_end:
        # before-first: backward scan stops at the first infeasible target
        keep = np.zeros(k_end, dtype=bool)
        keep[_reverse_valid_run(valid[:k_end])] = True
        valid[:k_end] = keep
    p_a_all = np.concatenate([p[2] for p in parts])
    p_b_all = np.concatenate([p[3] for p in parts])
    opt = np.concatenate([np.full(p[0].size, p[4]) for p in parts])
    gap = np.concatenate([np.full(p[0].size, p[5]) for p in parts])
    cost = batch.jerk_cost + params.w_risk_a * p_a_all + params.w_risk_b * p_b_all
    sel = np.flatnonzero(valid)
    cands = CandidateSet(t_all[sel], v_all[sel], p_a_all[sel], p_b_all[sel],
                         batch.jerk_cost[sel], cost[sel], opt[sel], gap[sel])
    return cands, batch, sel


def _select(cands: CandidateSet) -> int:
    """Minimal cost, earliest arrival on exact ties, then construction order."""
    best = np.min(cands.cost)
    tied = np.flatnonzero(cands.cost == best)
    return int(tied[np.argmin(cands.t_f[tied])])


def plan_cycle(ego: State1D, objects: Sequence[ObjectEstimate],
               predictions: Optional[Sequence[PredictionTrack]], lmap: LocalMap,
               cfg: PlannerConfig, lock: Optional[LockState] = None, t_now: float = 0.0):
    """One planning cycle.

    Returns ``(Decision, LockState)``.  While locked the stored trajectory is
    replayed, advanced by one ``dt_cycle`` per call.  ``t_now`` is the clock
    time of the cycle; candidate arrival instants are multiples of ``dt_f``
    on that clock.
    """
    lock = lock or LockState()
    if lock.engaged:
        elapsed = lock.elapsed + cfg.dt_cycle
        traj = lock.trajectory.shifted(elapsed)
        new_lock = replace(lock, elapsed=elapsed)
        return Decision(DecisionClass.LOCKED, traj, lock.candidate, True), new_lock

    relevant = preprocess(objects, lmap)
    if predictions:
        by_id = {p.ident: p for p in predictions}
        tracks = [by_id[o.ident] for o in relevant]
    else:
        tracks = [predict_horizon(o, cfg.horizon, cfg.dt_pred, cfg.q) for o in relevant]

    found = _collect_candidates(ego, relevant, tracks, lmap, cfg, t_now)
    if found is not None and len(found[0]):
        cands, batch, sel = found
        k = _select(cands)
        j = sel[k]
        opt = OPTION_CODES[int(cands.option[k])]
        traj = _trajectory_from(ego, cands.t_f[k], lmap.s_merge, cands.v_f[k],
                                batch.q[j], cfg.w_t)
        pnr = tg.compute_pnr(traj, lmap.s_yield, cfg.limits.b_max, cfg.dt_pnr)
        cand = MergeCandidate(float(cands.t_f[k]), traj.xf, traj, pnr, float(cands.p_a[k]),
                              float(cands.p_b[k]), float(cands.jerk_cost[k]), float(cands.cost[k]),
                              opt, int(cands.gap_index[k]))
        # lock when the next cycle would start beyond the point of no return
        if pnr is None or pnr[0] < cfg.dt_cycle:
            new_lock = LockState(True, traj, cand, 0.0)
            return Decision(cand.decision_class, traj, cand, True, candidates=cands), new_lock
        return Decision(cand.decision_class, traj, cand, False, candidates=cands), lock

    cands = found[0] if found is not None else None
    stop = plan_gentle_stop(ego, lmap, cfg.limits, cfg)
    if stop is not None:
        return Decision(DecisionClass.GENTLE_STOP, stop, candidates=cands), lock
    traj, emergency = fail_safe(ego, lmap, cfg.limits.b_max)
    return Decision(DecisionClass.FAIL_SAFE, traj, emergency=emergency, candidates=cands), lock


class DecisionLog:
    """Accumulates one row per cycle for ``cycle,t_now,class,t_f,cost,p_a,p_b,lock``."""

    header = ("cycle", "t_now", "class", "t_f", "cost", "p_a", "p_b", "lock")

    def __init__(self):
        self.rows = []

    def append(self, cycle: int, t_now: float, d: Decision):
        c = d.candidate
        t_f = c.t_f if c is not None else d.trajectory.duration
        p_a = c.p_risk_a if c is not None else 0.0
        p_b = c.p_risk_b if c is not None else 0.0
        self.rows.append((cycle, t_now, d.cls.value, t_f, d.cost, p_a, p_b, int(d.lock_engaged)))

    def write(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header)
            for r in self.rows:
                w.writerow([r[0], f"{r[1]:.12g}", r[2]] + [f"{x:.12g}" for x in r[3:7]] + [r[7]])
