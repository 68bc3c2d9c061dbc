"""Monte-Carlo traffic world for the merge planner.

Two main-road vehicles driven by the intelligent driver model approach the
merge point; the ego vehicle plans every cycle from noisy position
measurements filtered by constant-velocity Kalman trackers.  Randomness is
drawn from per-episode Philox streams keyed by ``(seed, gap index, run)``,
so the main-road traffic of a run is identical for every time weight and
parallel execution reproduces serial results.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import List, Optional, Sequence

import numpy as np

from . import trajgen as tg
from .planner import (DecisionClass, LocalMap, LockState, OptionKind, PlannerConfig,
                      plan_cycle)
from .predict import ObjectEstimate, kalman_init, kalman_update
from .trajgen import State1D

__all__ = [
    "IDMParams",
    "ScenarioConfig",
    "World",
    "EpisodeResult",
    "StatsRow",
    "idm_accel",
    "step_world",
    "measure",
    "generate_scenario",
    "collision_check",
    "run_episode",
    "monte_carlo",
    "episode_rngs",
    "write_stats_csv",
    "ReplayResult",
    "replay_noisy_target",
    "random_target_noise",
    "load_noise_csv",
    "reference_target_noise",
    "FINAL_CLASSES",
]

FINAL_CLASSES = (DecisionClass.MERGE_INTO_GAP, DecisionClass.MERGE_BEFORE_FIRST,
                 DecisionClass.GENTLE_STOP, DecisionClass.FAIL_SAFE)


@dataclass(frozen=True)
class IDMParams:
    v0: float = 30.0 / 3.6
    T: float = 1.5
    s0: float = 2.0
    a: float = 1.4
    b: float = 2.0
    delta: float = 4.0
    b_hard: float = 9.0  # output clamp when the bumper gap is gone


def idm_accel(v: float, gap: float, dv: float, p: IDMParams = IDMParams()) -> float:
    """IDM acceleration for bumper ``gap`` (``inf`` on a free road) and closing speed ``dv``."""
    free = p.a * (1.0 - (v / p.v0) ** p.delta)
    if math.isinf(gap):
        return free
    if gap <= 0:
        return -p.b_hard
    s_star = p.s0 + v * p.T + v * dv / (2.0 * math.sqrt(p.a * p.b))
    return max(free - p.a * (s_star / gap) ** 2, -p.b_hard)


@dataclass(frozen=True)
class ScenarioConfig:
    gap_size: float = 50.0
    arrival_interval: tuple = (5.0, 13.0)
    v_init_others: float = 30.0 / 3.6
    sigma_v: float = 0.3
    sigma_a: float = 0.25
    sigma_s: float = 0.25
    ego_v_interval: tuple = (25.0 / 3.6, 35.0 / 3.6)
    ego_start_offset: float = 80.0
    vehicle_length: float = 4.0
    ego_length: float = 4.0
    seed: int = 0

    def __post_init__(self):
        if self.gap_size <= 0:
            raise ValueError("gap_size must be positive")
        for lo, hi in (self.arrival_interval, self.ego_v_interval):
            if lo > hi:
                raise ValueError("interval bounds out of order")


@dataclass
class World:
    t: float
    s: np.ndarray  # main-road vehicle centres, lead first
    v: np.ndarray
    length: np.ndarray
    ego: State1D
    lead_arrival: float = float("nan")


def episode_rngs(seed: int, cell: int, run: int):
    """Independent generators for scenario, traffic noise and measurement noise."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(cell, run))
    return [np.random.Generator(np.random.Philox(c)) for c in ss.spawn(3)]


def generate_scenario(cfg: ScenarioConfig, rng: np.random.Generator,
                      lmap: LocalMap = LocalMap()) -> World:
    """Lead arrival uniform in the interval, follower ``gap_size`` bumper-to-bumper behind."""
    t_arr = rng.uniform(*cfg.arrival_interval)
    v = cfg.v_init_others + cfg.sigma_v * rng.standard_normal(2)
    v = np.maximum(v, 0.1)
    ego_v = rng.uniform(*cfg.ego_v_interval)
    ln = cfg.vehicle_length
    s_lead = lmap.s_merge - v[0] * t_arr
    s_follow = s_lead - ln - cfg.gap_size
    ego = State1D(lmap.s_merge - cfg.ego_start_offset, float(ego_v), 0.0)
    return World(0.0, np.array([s_lead, s_follow]), v, np.array([ln, ln]), ego, t_arr)


def step_world(world: World, dt: float, rng: np.random.Generator, idm: IDMParams = IDMParams(),
               sigma_a: float = 0.25, ego: Optional[State1D] = None) -> World:
    """Advance main-road vehicles by one double-integrator step.

    Vehicles are ordered lead first; each follows the one in front.  The
    acceleration noise is drawn for every vehicle every step.
    """
    n = world.s.size
    noise = rng.standard_normal(n) * sigma_a
    acc = np.empty(n)
    for i in range(n):
        if i == 0:
            acc[i] = idm_accel(world.v[i], math.inf, 0.0, idm)
        else:
            gap = world.s[i - 1] - world.s[i] - 0.5 * (world.length[i - 1] + world.length[i])
            acc[i] = idm_accel(world.v[i], gap, world.v[i] - world.v[i - 1], idm)
    acc += noise
    s = world.s + world.v * dt + 0.5 * acc * dt * dt
    v = np.maximum(world.v + acc * dt, 0.0)
    return World(world.t + dt, s, v, world.length, ego if ego is not None else world.ego,
                 world.lead_arrival)


def measure(world: World, rng: np.random.Generator, sigma_s: float = 0.25) -> np.ndarray:
    """Position measurements with additive Gaussian noise."""
    return world.s + sigma_s * rng.standard_normal(world.s.size)


def collision_check(ego_s, ego_length, others_s, others_length, s_merge) -> bool:
    """Overlap of vehicle extents once the ego front has passed the merge point.

    Accepts scalars or equally long histories; touching is not a collision.
    """
    ego_s = np.atleast_1d(np.asarray(ego_s, dtype=float))
    others_s = np.asarray(others_s, dtype=float).reshape(ego_s.size, -1)
    others_length = np.broadcast_to(np.asarray(others_length, dtype=float), others_s.shape)
    merged = ego_s + 0.5 * ego_length >= s_merge
    dist = np.abs(others_s - ego_s[:, None])
    hit = dist < 0.5 * (ego_length + others_length)
    return bool(np.any(hit & merged[:, None]))


@dataclass
class EpisodeResult:
    decision_class: DecisionClass
    collided: bool
    max_decel_applied: float
    executed_jerk_energy: float
    cycle_times: List[float]
    cycle_classes: List[str] = field(default_factory=list)
    emergency: bool = False
    merged: bool = False
    duration: float = 0.0
    final_speed: float = 0.0
    target_speed: float = float("nan")
    others_s: Optional[np.ndarray] = None
    merge_option: str = ""  # option kind of the executed merge, empty if none


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def _segment_energy(traj, h):
    """int_0^h u^2 dt along ``traj``."""
    if h <= 0 or traj.kind is tg.TrajKind.CONSTANT_DECELERATION:
        return 0.0
    t = 0.5 * h * (_GL_X + 1.0)
    _, _, _, j = tg.evaluate(traj, t)
    return float(0.5 * h * np.sum(_GL_W * j * j))


def run_episode(cfg: ScenarioConfig, pcfg: PlannerConfig, lmap: LocalMap = LocalMap(),
                dt_cycle: float = 0.08, idm: IDMParams = IDMParams(), cell: int = 0, run: int = 0,
                t_max: float = 40.0, hold_time: float = 2.0, keep_history: bool = False,
                timer=time.perf_counter) -> EpisodeResult:
    """Simulate one approach until merge, stop at the yield line, or ``t_max``.

    The final class counts any fail-safe application as ``FailSafe``;
    otherwise a completed merge is classed by its option (merging behind
    the last vehicle counts as merging into a gap) and everything else as
    ``GentleStop``.  Collisions are audited every step, including a
    ``hold_time`` window of steady driving after the merge.
    """
    if pcfg.dt_cycle != dt_cycle:
        pcfg = replace(pcfg, dt_cycle=dt_cycle)
    rng_scen, rng_world, rng_meas = episode_rngs(cfg.seed, cell, run)
    world = generate_scenario(cfg, rng_scen, lmap)
    ego = world.ego
    r = max(cfg.sigma_s ** 2, 1e-6)
    estimates = {}
    lock = LockState()
    cycle_times, cycle_classes = [], []
    history = []
    energy = 0.0
    failsafe_b = 0.0
    used_failsafe = emergency = merged = collided = False
    merge_cand = None
    stopped_for = 0.0
    post_merge = 0.0
    target_speed = float("nan")

    n_steps = int(round(t_max / dt_cycle))
    for _ in range(n_steps):
        z = measure(world, rng_meas, cfg.sigma_s)
        if merged:
            # steady driving at the matched speed; only the collision audit remains
            ego = State1D(ego.s + ego.v * dt_cycle, ego.v, 0.0)
            post_merge += dt_cycle
        else:
            objs = []
            for i, zi in enumerate(z):
                prev = estimates.get(i)
                if prev is None:
                    est = kalman_init(float(zi), r, float(world.length[i]), world.t, ident=i)
                else:
                    est = kalman_update(prev, float(zi), r, dt_cycle, pcfg.q)
                estimates[i] = est
                objs.append(est)
            t0 = timer()
            decision, lock = plan_cycle(ego, objs, None, lmap, pcfg, lock, world.t)
            cycle_times.append(timer() - t0)
            cls = decision.cls
            if cls is DecisionClass.LOCKED:
                cls = lock.candidate.decision_class
            cycle_classes.append(cls.value)
            traj = decision.trajectory
            if decision.cls is DecisionClass.FAIL_SAFE:
                used_failsafe = True
                emergency |= decision.emergency
                failsafe_b = max(failsafe_b, traj.coefficients.b)
            h = dt_cycle
            if traj.kind is not tg.TrajKind.CONSTANT_DECELERATION:
                h = min(dt_cycle, traj.duration)
            energy += _segment_energy(traj, h)
            if traj.kind is tg.TrajKind.CONSTANT_DECELERATION:
                ego = tg.evaluate(traj, dt_cycle)[0]
            elif traj.duration <= dt_cycle + 1e-9:
                ego = traj.xf
                if lock.engaged:
                    merged = True
                    merge_cand = lock.candidate
                    target_speed = traj.xf.v
            else:
                ego = tg.evaluate(traj, dt_cycle)[0]
        if ego.v < 0.0:
            # between-sample undershoot near a stop; the vehicle does not reverse
            ego = State1D(ego.s, 0.0, max(ego.a, 0.0))
        world = step_world(world, dt_cycle, rng_world, idm, cfg.sigma_a, ego)
        if keep_history:
            history.append(world.s.copy())
        if collision_check(ego.s, cfg.ego_length, world.s, world.length, lmap.s_merge):
            collided = True
        if merged and post_merge >= hold_time - 1e-9:
            break
        if not merged and ego.v <= 1e-9 and ego.s >= lmap.s_yield - 1e-6:
            stopped_for += dt_cycle
            if stopped_for >= hold_time - 1e-9:
                break
        else:
            stopped_for = 0.0

    if used_failsafe:
        final = DecisionClass.FAIL_SAFE
    elif merged:
        final = merge_cand.decision_class
    else:
        final = DecisionClass.GENTLE_STOP
    return EpisodeResult(final, collided, failsafe_b, energy, cycle_times, cycle_classes,
                         emergency, merged, world.t, ego.v, target_speed,
                         np.array(history) if keep_history else None,
                         merge_cand.option_kind.value if merge_cand is not None else "")


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass
class StatsRow:
    gap_m: float
    w_t: float
    runs: int
    p_gap: float
    p_before: float
    p_gentle: float
    p_failsafe: float
    collisions: int
    mean_failsafe_decel: float
    max_failsafe_decel: float
    mean_cycle_ms: float
    emergencies: int = 0
    collision_runs: tuple = ()

    @property
    def fractions(self):
        return (self.p_gap, self.p_before, self.p_gentle, self.p_failsafe)


STATS_HEADER = ("gap_m", "w_t", "runs", "p_gap", "p_before", "p_gentle", "p_failsafe",
                "collisions", "mean_failsafe_decel", "max_failsafe_decel", "mean_cycle_ms")


def _cell_summary(gap, w_t, results: Sequence[EpisodeResult]) -> StatsRow:
    n = len(results)
    counts = {c: 0 for c in FINAL_CLASSES}
    for r in results:
        counts[r.decision_class] += 1
    decels = [r.max_decel_applied for r in results if r.decision_class is DecisionClass.FAIL_SAFE]
    times = [t for r in results for t in r.cycle_times]
    coll = tuple(i for i, r in enumerate(results) if r.collided)
    return StatsRow(
        gap, w_t, n,
        counts[DecisionClass.MERGE_INTO_GAP] / n,
        counts[DecisionClass.MERGE_BEFORE_FIRST] / n,
        counts[DecisionClass.GENTLE_STOP] / n,
        counts[DecisionClass.FAIL_SAFE] / n,
        len(coll),
        float(np.mean(decels)) if decels else 0.0,
        float(np.max(decels)) if decels else 0.0,
        1e3 * float(np.mean(times)) if times else 0.0,
        sum(r.emergency for r in results),
        coll,
    )


def _run_chunk(args):
    base, pcfg, lmap, dt_cycle, idm, jobs = args
    out = []
    for gap_idx, gap, w_t, run in jobs:
        cfg = replace(base, gap_size=gap)
        res = run_episode(cfg, replace(pcfg, w_t=w_t), lmap, dt_cycle, idm, cell=gap_idx, run=run)
        res.cycle_times = [float(np.mean(res.cycle_times))] if res.cycle_times else []
        res.cycle_classes = []
        out.append(res)
    return out


def monte_carlo(gaps: Sequence[float], w_ts: Sequence[float], runs: int,
                base: ScenarioConfig = ScenarioConfig(), pcfg: PlannerConfig = PlannerConfig(),
                lmap: LocalMap = LocalMap(), dt_cycle: float = 0.08, idm: IDMParams = IDMParams(),
                threads: int = 1, progress=None) -> List[StatsRow]:
    """Decision statistics for every ``(gap, w_t)`` cell.

    Episode seeds depend on the gap index and run number only, so all time
    weights see the same traffic.  Work is split into fixed chunks and
    reassembled in order; the thread count never changes the numbers.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    jobs = [(gi, float(g), float(w), r) for gi, g in enumerate(gaps) for w in w_ts
            for r in range(runs)]
    chunk = max(1, min(50, runs))
    chunks = [jobs[i:i + chunk] for i in range(0, len(jobs), chunk)]
    payload = [(base, pcfg, lmap, dt_cycle, idm, c) for c in chunks]
    results: List[EpisodeResult] = []
    if threads <= 1:
        for i, p in enumerate(payload):
            results.extend(_run_chunk(p))
            if progress:
                progress(len(results), len(jobs))
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            for part in ex.map(_run_chunk, payload):
                results.extend(part)
                if progress:
                    progress(len(results), len(jobs))
    rows = []
    k = 0
    for g in gaps:
        for w in w_ts:
            rows.append(_cell_summary(float(g), float(w), results[k:k + runs]))
            k += runs
    return rows


def write_stats_csv(path, rows: Sequence[StatsRow], timing: bool = True):
    """StatsTable CSV; with ``timing=False`` the wall-clock column is left empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATS_HEADER)
        for r in rows:
            w.writerow([f"{r.gap_m:g}", f"{r.w_t:g}", r.runs, f"{r.p_gap:.6f}", f"{r.p_before:.6f}",
                        f"{r.p_gentle:.6f}", f"{r.p_failsafe:.6f}", r.collisions,
                        f"{r.mean_failsafe_decel:.6f}", f"{r.max_failsafe_decel:.6f}",
                        f"{r.mean_cycle_ms:.4f}" if timing else ""])


# ---------------------------------------------------------------------------
# replanning toward a noisy target
# ---------------------------------------------------------------------------

@dataclass
class ReplayResult:
    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    jerk_energy: float
    plans: list

    def rows(self):
        return np.column_stack([self.t, self.s, self.v, self.a, self.j])


def replay_noisy_target(x0: State1D, target: State1D, t_f: float, noise, w_t: float,
                        lock_time: float = 7.44, dt: float = 0.08, samples_per_cycle: int = 8):
    """Execute the first ``dt`` of a fresh plan every cycle toward a perturbed target.

    ``noise`` holds one ``(ds, dv)`` pair per cycle (missing cycles reuse
    the last pair).  Once the clock passes ``lock_time`` the target is frozen
    and a single minimum-jerk plan is followed to the end.
    """
    noise = np.asarray(noise, dtype=float).reshape(-1, 2)
    n_cycles = int(math.ceil(t_f / dt - 1e-9))
    state = x0
    locked = None
    last_target = target
    ts, ss, vs, as_, js = [], [], [], [], []
    plans = []
    energy = 0.0
    for k in range(n_cycles):
        t_now = k * dt
        remaining = t_f - t_now
        if remaining <= 1e-9:
            break
        if locked is None and t_now > lock_time + 1e-9:
            locked = tg.solve_quintic(state, last_target, remaining)
            plans.append((t_now, locked))
        if locked is not None:
            plan = locked.shifted(t_now - plans[-1][0]) if t_now > plans[-1][0] else locked
        else:
            ds, dv = noise[min(k, len(noise) - 1)] if len(noise) else (0.0, 0.0)
            last_target = State1D(target.s + ds, target.v + dv, 0.0)
            plan = tg.solve_time_weighted(state, last_target, remaining, w_t)
            plans.append((t_now, plan))
        h = min(dt, plan.duration)
        tt = np.linspace(0.0, h, samples_per_cycle, endpoint=False)
        s, v, a, j = tg.evaluate(plan, tt)
        ts.append(t_now + tt), ss.append(s), vs.append(v), as_.append(a), js.append(j)
        energy += _segment_energy(plan, h)
        state = tg.evaluate(plan, h)[0]
    end, jend = state, 0.0
    ts.append([t_f]), ss.append([end.s]), vs.append([end.v]), as_.append([end.a])
    js.append([js[-1][-1] if js else 0.0])
    cat = lambda x: np.concatenate([np.asarray(y, float) for y in x])
    return ReplayResult(cat(ts), cat(ss), cat(vs), cat(as_), cat(js), energy, plans)


def random_target_noise(rng: np.random.Generator, n: int, dt: float = 0.08, t_quiet: float = 0.4,
                        sigma0: float = 1.2, decay: float = 1.5, floor: float = 0.1,
                        revert: float = 0.85, hold: float = 0.25, ds_per_dv: float = 5.67):
    """Velocity offsets as a decaying, mean-reverting random walk with random holds.

    Position offsets are proportional to the velocity offsets.  Defaults
    give several m/s and tens of metres early on, and centimetre-to-metre
    jitter near the end.
    """
    dv = np.zeros(n)
    for k in range(1, n):
        t = k * dt
        if t < t_quiet or rng.random() < hold:
            dv[k] = dv[k - 1]
            continue
        sig = sigma0 * math.exp(-t / decay) + floor
        dv[k] = revert * dv[k - 1] + sig * rng.standard_normal()
    return np.column_stack([ds_per_dv * dv, dv])


def load_noise_csv(path):
    """Read ``t,ds,dv`` rows; a malformed line raises ``ValueError`` naming it."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "ds", "dv"]:
            raise ValueError(f"{path}: line 1: expected header t,ds,dv")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != 3:
                    raise ValueError
                t, ds, dv = (float(c) for c in row)
                if not all(math.isfinite(x) for x in (t, ds, dv)):
                    raise ValueError
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: malformed row {row!r}") from None
            out.append((t, ds, dv))
    return np.array(out).reshape(-1, 3)


def reference_target_noise():
    """The bundled reference noise sequence, ``(t, ds, dv)`` rows on a 0.08 s grid."""
    with resources.as_file(resources.files("mergeplan") / "data" / "target_noise.csv") as p:
        return load_noise_csv(p)
