# %% [markdown]
# # Distance from kernel decay
#
# For small t the kernel behaves like exp(-d^2 / 4t) times a power of t, so
# -4t log p tends to d^2.  The power of t contributes a term of size t log t,
# which a straight line in t does not capture.

# %%
import math

import numpy as np

from crhyp import CylPoint, EvalContext, sr_distance
from crhyp.subelliptic import log_p_cover

ctx = EvalContext(1)
ts = np.array([0.005, 0.01, 0.02])

# %%
for r, th in [(1, 0), (1, 0.5), (0.5, 1)]:
    pt = CylPoint(r, th)
    d2 = sr_distance(ctx, pt).d2
    y = np.array([-4 * t * log_p_cover(ctx, t, pt) for t in ts])
    naive = np.polyfit(ts, y, 1)[1]
    # off the cut locus the prefactor is t^-(n+1/2), so strip 4t (n+1/2) log(4 pi t)
    corrected = y - 4 * ts * (ctx.n + 0.5) * np.log(4 * math.pi * ts)
    better = np.polyfit(ts, corrected, 1)[1]
    print(f"({r},{th})  d2={d2:.5f}  line fit={naive:.5f}  with log term={better:.5f}")

# %% [markdown]
# The distance itself comes from a one-dimensional root solve.

# %%
for th in np.linspace(0, 2 * math.pi, 7):
    v = sr_distance(ctx, CylPoint(0.0, th))
    print(f"theta={th:.3f}  d2={v.d2:.6f}  regime={v.regime.name}")
