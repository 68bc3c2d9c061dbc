"""Command-line runner: single plans, sweeps, replay experiments and timing.

Every run is described by a flat ``key = value`` configuration.  Values come
from the built-in defaults, then an optional ``--config`` file, then
``--key value`` flags.  ``mergeplan defaults`` prints the full table.
"""

from __future__ import annotations

import argparse
import csv
import os
import statistics
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import trajgen as tg
from .planner import (DecisionLog, LocalMap, LockState, PlannerConfig,
                      plan_cycle)
from .predict import ObjectEstimate
from .risk import SafetyParams
from .sim import (IDMParams, ScenarioConfig, load_noise_csv, monte_carlo, random_target_noise,
                  replay_noisy_target, run_episode, write_stats_csv)
from .trajgen import DynamicLimits, State1D

__all__ = ["RunConfig", "load_config", "main", "cmd_plan", "cmd_sweep", "cmd_replay",
           "cmd_bench", "cmd_defaults"]


class ConfigError(ValueError):
    pass


def _float_list(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(x) for x in text)
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(float(p) for p in parts)


@dataclass
class RunConfig:
    """Flat run configuration; every key is listed by ``mergeplan defaults``."""

    # dynamic limits
    a_min: float = -4.0
    a_max: float = 2.5
    v_max: float = 50.0 / 3.6
    b_max: float = 4.0
    # safety corridor and risk
    t_safety: float = 1.0
    s_margin: float = 2.0
    p_residual_max: float = 0.05
    w_risk_a: float = 20.0
    w_risk_b: float = 50.0
    # planner
    w_t: float = 1.0
    dt_f: float = 0.2
    horizon: float = 15.0
    dt_check: float = tg.DT_CHECK
    dt_pnr: float = tg.DT_PNR
    dt_cycle: float = 0.08
    dt_pred: float = 0.08
    q: float = 0.0625
    a_min_comfort: float = -2.5
    # map
    s_yield: float = 97.0
    s_merge: float = 100.0
    v_target: float = 30.0 / 3.6
    sight_range: float = 200.0
    clearance: float = 50.0
    # traffic model
    idm_v0: float = 30.0 / 3.6
    idm_T: float = 1.5
    idm_s0: float = 2.0
    idm_a: float = 1.4
    idm_b: float = 2.0
    idm_delta: float = 4.0
    # scenario
    arrival_min: float = 5.0
    arrival_max: float = 13.0
    v_init_others: float = 30.0 / 3.6
    sigma_v: float = 0.3
    sigma_a: float = 0.25
    sigma_s: float = 0.25
    ego_v_min: float = 25.0 / 3.6
    ego_v_max: float = 35.0 / 3.6
    ego_start_offset: float = 80.0
    vehicle_length: float = 4.0
    ego_length: float = 4.0
    t_max: float = 40.0
    # sweep
    runs: int = 100
    gap_min: float = 30.0
    gap_max: float = 65.0
    gap_step: float = 5.0
    w_t_list: tuple = (1.0, 2.0, 5.0, 12.5, 25.0)
    timing: bool = True
    # replay
    replay_w_t: float = 12.5
    replay_seeds: int = 50
    replay_s0: float = 0.0
    replay_v0: float = 25.0 / 3.6
    replay_sf: float = 80.0
    replay_vf: float = 30.0 / 3.6
    replay_tf: float = 9.52
    lock_time: float = 7.44
    # bench
    bench_cycles: int = 1000
    bench_gap: float = 50.0
    # run control
    seed: int = 0
    threads: int = 0  # 0 = all available cores
    out: str = "out"

    def __post_init__(self):
        if self.w_t < 1.0:
            raise ConfigError(f"w_t must be >= 1, got {self.w_t}")
        if self.replay_w_t < 1.0 or min(self.w_t_list) < 1.0:
            raise ConfigError("all time weights must be >= 1")
        if self.runs < 1 or self.replay_seeds < 1 or self.bench_cycles < 1:
            raise ConfigError("runs, replay_seeds and bench_cycles must be >= 1")
        if self.gap_step <= 0 or self.gap_max < self.gap_min:
            raise ConfigError("gap range must satisfy gap_min <= gap_max and gap_step > 0")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")

    # -- conversions -------------------------------------------------------
    def limits(self) -> DynamicLimits:
        return DynamicLimits(self.a_min, self.a_max, self.v_max, self.b_max)

    def safety(self) -> SafetyParams:
        return SafetyParams(self.t_safety, self.s_margin, self.p_residual_max,
                            self.w_risk_a, self.w_risk_b)

    def planner(self, w_t: Optional[float] = None) -> PlannerConfig:
        return PlannerConfig(self.limits(), self.safety(), self.w_t if w_t is None else w_t,
                             self.dt_f, self.horizon, self.dt_check, self.dt_pnr, self.dt_cycle,
                             self.dt_pred, self.q, self.a_min_comfort)

    def local_map(self) -> LocalMap:
        return LocalMap(self.s_yield, self.s_merge, self.v_target, self.sight_range,
                        self.clearance)

    def idm(self) -> IDMParams:
        return IDMParams(self.idm_v0, self.idm_T, self.idm_s0, self.idm_a, self.idm_b,
                         self.idm_delta)

    def scenario(self, gap: float = 50.0) -> ScenarioConfig:
        return ScenarioConfig(gap, (self.arrival_min, self.arrival_max), self.v_init_others,
                              self.sigma_v, self.sigma_a, self.sigma_s,
                              (self.ego_v_min, self.ego_v_max), self.ego_start_offset,
                              self.vehicle_length, self.ego_length, self.seed)

    def gaps(self) -> List[float]:
        n = int(np.floor((self.gap_max - self.gap_min) / self.gap_step + 1e-9))
        return [self.gap_min + k * self.gap_step for k in range(n + 1)]

    def n_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, raw):
    f = _FIELDS[name]
    default = f.default
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return _float_list(raw)
        return str(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{source}: line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(), str(path)))
    for k, v in (overrides or {}).items():
        k = k.replace("-", "_")
        if k not in _FIELDS:
            raise ConfigError(f"unknown key {k!r}")
        values[k] = _coerce(k, v)
    return RunConfig(**values)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(f"{x:g}" for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _parse_state(text: str, n: int, what: str):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    return vals


def cmd_plan(cfg: RunConfig, ego: State1D, objects, out: Path, stream=None):
    """One planning cycle; writes ``trajectory.csv`` and ``decisions.csv``."""
    stream = stream or sys.stdout
    out.mkdir(parents=True, exist_ok=True)
    decision, _ = plan_cycle(ego, objects, None, cfg.local_map(), cfg.planner(), LockState())
    log = DecisionLog()
    log.append(0, 0.0, decision)
    log.write(out / "decisions.csv")
    tg.write_trajectory_csv(out / "trajectory.csv", decision.trajectory, dt=cfg.dt_cycle)
    print(f"{decision.cls.value} cost={decision.cost:.6g} t_f={decision.trajectory.duration:.6g}",
          file=stream)
    return decision


def cmd_sweep(cfg: RunConfig, out: Path, stream=None):
    stream = stream or sys.stderr
    out.mkdir(parents=True, exist_ok=True)
    gaps = cfg.gaps()
    n_cells = len(gaps) * len(cfg.w_t_list)

    def progress(done, total):
        cells = done // cfg.runs
        print(f"\r{done}/{total} episodes, {cells}/{n_cells} cells", end="", file=stream,
              flush=True)

    rows = monte_carlo(gaps, cfg.w_t_list, cfg.runs, cfg.scenario(), cfg.planner(),
                       cfg.local_map(), cfg.dt_cycle, cfg.idm(), cfg.n_threads(), progress)
    print(file=stream)
    path = out / "stats.csv"
    write_stats_csv(path, rows, timing=cfg.timing)
    return rows, path


def _replay_pair(cfg: RunConfig, noise):
    x0 = State1D(cfg.replay_s0, cfg.replay_v0, 0.0)
    target = State1D(cfg.replay_sf, cfg.replay_vf, 0.0)
    base = replay_noisy_target(x0, target, cfg.replay_tf, noise, 1.0, cfg.lock_time,
                               cfg.dt_cycle)
    tw = replay_noisy_target(x0, target, cfg.replay_tf, noise, cfg.replay_w_t, cfg.lock_time,
                             cfg.dt_cycle)
    return base, tw


def cmd_replay(cfg: RunConfig, out: Path, noise_csv: Optional[str] = None, stream=None):
    """Replanning toward a noisy target for ``w_t = 1`` and ``replay_w_t``.

    With a noise file the single sequence is replayed; otherwise
    ``replay_seeds`` random sequences are drawn from ``seed``.
    """
    stream = stream or sys.stdout
    out.mkdir(parents=True, exist_ok=True)
    n = int(np.ceil(cfg.replay_tf / cfg.dt_cycle - 1e-9))
    if noise_csv is not None:
        table = load_noise_csv(noise_csv)
        sequences = [table[:, 1:3]]
    else:
        ss = np.random.SeedSequence(cfg.seed)
        sequences = [random_target_noise(np.random.Generator(np.random.Philox(c)), n,
                                         cfg.dt_cycle) for c in ss.spawn(cfg.replay_seeds)]
    summary = []
    for i, noise in enumerate(sequences):
        base, tw = _replay_pair(cfg, noise)
        ratio = tw.jerk_energy / base.jerk_energy if base.jerk_energy > 0 else 1.0
        summary.append((i, base.jerk_energy, tw.jerk_energy, ratio))
        if i == 0:
            tg.write_rows_csv(out / "replay_w1.csv", ("t", "s", "v", "a", "j"), base.rows())
            tg.write_rows_csv(out / "replay_wt.csv", ("t", "s", "v", "a", "j"), tw.rows())
    with open(out / "replay_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("seed", "energy_w1", "energy_wt", "ratio"))
        for i, e1, e2, r in summary:
            w.writerow([i, f"{e1:.12g}", f"{e2:.12g}", f"{r:.12g}"])
    med = statistics.median(r for *_, r in summary)
    print(f"w_t={cfg.replay_w_t:g} vs w_t=1: median jerk-energy ratio {med:.6f} "
          f"over {len(summary)} sequence(s)", file=stream)
    return summary


def cmd_bench(cfg: RunConfig, out: Path, stream=None):
    """Time ``plan_cycle`` inside simulated episodes until ``bench_cycles`` are collected."""
    stream = stream or sys.stdout
    out.mkdir(parents=True, exist_ok=True)
    by_class = {}
    total = 0
    run = 0
    scen = cfg.scenario(cfg.bench_gap)
    pcfg = cfg.planner()
    lmap = cfg.local_map()
    while total < cfg.bench_cycles:
        res = run_episode(scen, pcfg, lmap, cfg.dt_cycle, cfg.idm(), 0, run, cfg.t_max)
        for t, c in zip(res.cycle_times, res.cycle_classes):
            by_class.setdefault(c, []).append(1e3 * t)
        total += len(res.cycle_times)
        run += 1
    rows = []
    for c in sorted(by_class):
        ms = np.asarray(by_class[c])
        rows.append((c, ms.size, float(ms.mean()), float(np.median(ms)),
                     float(np.percentile(ms, 99))))
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("class", "cycles", "mean_ms", "median_ms", "p99_ms"))
        for c, n, mean, med, p99 in rows:
            w.writerow([c, n, f"{mean:.4f}", f"{med:.4f}", f"{p99:.4f}"])
    for c, n, mean, med, p99 in rows:
        print(f"{c:18s} n={n:6d} mean={mean:8.3f} ms median={med:8.3f} ms p99={p99:8.3f} ms",
              file=stream)
    return rows


def cmd_defaults(stream=None):
    stream = stream or sys.stdout
    stream.write(format_config(RunConfig()))


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

_NAMED = ("seed", "out", "threads", "w_t", "runs", "gap_min", "gap_max", "gap_step")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, help="worker processes (0 = all cores)")
    common.add_argument("--w-t", dest="w_t", type=float, help="time weight w_t >= 1")
    common.add_argument("--runs", type=int, help="episodes per sweep cell")
    common.add_argument("--gap-min", dest="gap_min", type=float)
    common.add_argument("--gap-max", dest="gap_max", type=float)
    common.add_argument("--gap-step", dest="gap_step", type=float)

    p = argparse.ArgumentParser(
        prog="mergeplan",
        description="Merge planning experiments. Any config key can also be given as --key value.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("plan", parents=[common], help="run one planning cycle")
    sp.add_argument("--ego", default="20,8.333333333333334,0", metavar="S,V,A",
                    help="ego state (default: 80 m before the merge point at 30 km/h)")
    sp.add_argument("--object", action="append", default=[], metavar="S,V[,SIGMA_S,SIGMA_V]",
                    help="main-road vehicle estimate; repeatable")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo decision statistics")
    rp = sub.add_parser("replay", parents=[common], help="replanning toward a noisy target")
    rp.add_argument("--noise", metavar="CSV", help="noise sequence t,ds,dv (default: random)")
    sub.add_parser("bench", parents=[common], help="plan-cycle timing per decision class")
    sub.add_parser("defaults", help="print all configuration defaults")
    return p


def _extra_overrides(extra: List[str]) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"missing value for {tok}")
            value = extra[i + 1]
            i += 2
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown option {tok}")
        out[key] = value
    return out


def _objects(specs, cfg: RunConfig):
    objs = []
    for i, spec in enumerate(specs):
        vals = [float(x) for x in spec.split(",")] if spec else []
        if len(vals) not in (2, 4):
            raise ConfigError(f"--object: expected S,V or S,V,SIGMA_S,SIGMA_V, got {spec!r}")
        sig_s, sig_v = (vals[2], vals[3]) if len(vals) == 4 else (cfg.sigma_s, cfg.sigma_v)
        objs.append(ObjectEstimate(vals[0], vals[1], (sig_s ** 2, 0.0, sig_v ** 2),
                                   cfg.vehicle_length, 0.0, i))
    return objs


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "defaults":
            if extra:
                raise ConfigError(f"unexpected arguments {extra}")
            cmd_defaults()
            return 0
        overrides = _extra_overrides(extra)
        for k in _NAMED:
            v = getattr(args, k, None)
            if v is not None:
                overrides[k] = v
        cfg = load_config(args.config, overrides)
        out = Path(cfg.out)
        if args.command == "plan":
            ego = State1D(*_parse_state(args.ego, 3, "--ego"))
            cmd_plan(cfg, ego, _objects(args.object, cfg), out)
        elif args.command == "sweep":
            _, path = cmd_sweep(cfg, out)
            print(path)
        elif args.command == "replay":
            cmd_replay(cfg, out, args.noise)
        elif args.command == "bench":
            cmd_bench(cfg, out)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"mergeplan: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
