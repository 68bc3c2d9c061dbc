"""
Time-weighted jerk-optimal trajectories
=======================================

The weight ``(w_t - 1)/(1 + t) + 1`` penalises jerk near the start of a plan
more than jerk near its end.  This script connects the same pair of states
with increasing ``w_t`` and prints how the jerk profile moves towards the
end of the horizon.

Run with ``python notebooks/01_time_weighted_shapes.py``.
"""

# %%
import numpy as np

from mergeplan import trajgen as tg
from mergeplan.trajgen import State1D

x0 = State1D(0.0, 25 / 3.6, 0.0)
xf = State1D(80.0, 30 / 3.6, 0.0)
t_f = 9.52
t = np.linspace(0.0, t_f, 9)

# %% [markdown]
# ``w_t = 1`` is the classic minimum-jerk quintic.  Larger weights move the
# jerk towards the end, where it is cheap.

# %%
print("w_t    u(0)     u(t_f)   int u^2/2   weighted cost")
for w in (1.0, 2.0, 5.0, 12.5, 25.0):
    tr = tg.solve_time_weighted(x0, xf, t_f, w)
    u = tg.evaluate(tr, t)[3]
    print(f"{w:5.1f} {u[0]:8.4f} {u[-1]:8.4f} {tg.jerk_cost(tr):10.5f} "
          f"{tg.time_weighted_cost(tr, w):12.5f}")

# %% [markdown]
# The solution has a polynomial part plus a ``beta / (w_t + t)`` term.  For
# ``w_t = 1`` the log-type term vanishes exactly.

# %%
for w in (1.0, 12.5):
    c = tg.solve_time_weighted(x0, xf, t_f, w).coefficients
    print(f"w_t={w:g}: alpha={np.round(c.alpha, 6)}, beta={c.beta:.6g}")

# %% [markdown]
# Jerk profile samples, one row per weight.

# %%
np.set_printoptions(precision=3, suppress=True)
for w in (1.0, 5.0, 25.0):
    print(w, tg.evaluate(tg.solve_time_weighted(x0, xf, t_f, w), t)[3])
