"""Longitudinal merge planning under prediction uncertainty.

Modules
-------
trajgen
    Closed-form jerk-optimal and time-weighted jerk-optimal trajectories.
predict
    Constant-velocity Kalman tracking and open-loop prediction.
risk
    Safety corridor and residual collision risk.
planner
    Merge option sampling, selection, trajectory locking and fail-safe.
sim
    Traffic simulation, Monte Carlo sweeps and noisy-target replay.
cli
    Command-line runner.
"""

from .trajgen import (DynamicLimits, State1D, Trajectory, TrajKind, evaluate, jerk_cost,
                      solve_quintic, solve_time_weighted)
from .predict import ObjectEstimate, PredictionTrack, kalman_update, predict_horizon
from .risk import SafetyParams
from .planner import DecisionClass, LocalMap, LockState, PlannerConfig, plan_cycle

__version__ = "0.1.0"
