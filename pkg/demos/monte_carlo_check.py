# %% [markdown]
# # Monte Carlo check
#
# Simulate the radial diffusion and compare bin counts with the integrated
# kernel.

# %%
import numpy as np

from crhyp import EvalContext, McConfig, mc_compare, mc_simulate
from crhyp.verification import default_grid

ctx = EvalContext(1)
t = 0.5

# %%
samples = mc_simulate(ctx, t, McConfig(paths=50_000, seed=7))
print("aborted paths:", samples.aborted)
print("r quartiles:", np.percentile(samples.r, [25, 50, 75]).round(3))

# %%
rep = mc_compare(samples, ctx, t, default_grid(ctx, t))
print(f"{rep.within} of {rep.qualifying} bins inside 3 sigma")
busy = rep.expected >= 20
print(f"largest |z| over those bins = {np.abs(rep.z[busy]).max():.2f}")
