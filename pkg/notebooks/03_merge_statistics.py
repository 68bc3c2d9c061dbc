"""
Merge decision statistics
=========================

A small Monte-Carlo sweep over gap sizes for two time weights.  Main-road
traffic is identical across the weights, so differences come from the
planner alone.  The acceptance suite runs the same sweep at 300 runs per
cell; here 40 keep the runtime to a few minutes.

Run with ``python notebooks/03_merge_statistics.py``.
"""

# %%
from mergeplan.cli import RunConfig
from mergeplan.sim import monte_carlo

cfg = RunConfig()
runs = 40
gaps = [30.0, 40.0, 50.0, 65.0]

rows = monte_carlo(gaps, (1.0, 25.0), runs, cfg.scenario(), cfg.planner(), cfg.local_map(),
                   cfg.dt_cycle, cfg.idm())

# %% [markdown]
# Fractions of the four final classes per cell.

# %%
print(" gap  w_t   gap%  before%  gentle%  failsafe%  coll  b_mean  b_max")
for r in rows:
    print(f"{r.gap_m:4.0f} {r.w_t:4.0f} {100 * r.p_gap:6.1f} {100 * r.p_before:8.1f} "
          f"{100 * r.p_gentle:8.1f} {100 * r.p_failsafe:10.1f} {r.collisions:5d} "
          f"{r.mean_failsafe_decel:7.2f} {r.max_failsafe_decel:6.2f}")

# %% [markdown]
# Mean plan-cycle time per cell, in milliseconds.

# %%
for r in rows:
    print(f"gap {r.gap_m:g} w_t {r.w_t:g}: {r.mean_cycle_ms:.2f} ms")
