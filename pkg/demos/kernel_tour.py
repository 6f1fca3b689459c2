# %% [markdown]
# # Kernel tour
#
# Riemannian kernel on complex hyperbolic space, then the subelliptic kernel
# on the anti-de Sitter fibration, evaluated along a few slices.

# %%
import math

import numpy as np

from crhyp import CylPoint, EvalContext, p_compact, p_cover, p_cover_double, q_exact, q_integral

ctx = EvalContext(1)

# %% [markdown]
# For n = 1 the Riemannian kernel has a closed form, a handy sanity check.

# %%
t = 0.5
for d in (0.0, 1.0, 2.0, 4.0):
    closed = math.exp(-t) * (4 * math.pi * t) ** -1.5 * (d / math.sinh(d) if d else 1.0) * math.exp(-d * d / (4 * t))
    print(f"delta={d:3.1f}  q={q_exact(ctx, t, d).value:.15e}  closed={closed:.15e}")

# %%
# two independent routes, n = 2
ctx2 = EvalContext(2)
for d in (0.0, 0.5, 2.0):
    a, b = q_exact(ctx2, 1.0, d).value, q_integral(ctx2, 1.0, d).value
    print(f"delta={d}  derivative={a:.12e}  integral={b:.12e}  rel={abs(a - b) / a:.1e}")

# %% [markdown]
# The subelliptic kernel on the universal cover, single integral against the
# iterated one.

# %%
for r, th in [(0, 0), (1, 0), (1, 0.5), (0.5, 1.0), (0, 2.0)]:
    pt = CylPoint(r, th)
    s = p_cover(ctx, 0.25, pt).value
    d = p_cover_double(ctx, 0.25, pt).value
    print(f"(r,theta)=({r},{th})  single={s:.12e}  double={d:.12e}")

# %% [markdown]
# Compact quotient: the fiber becomes a circle and the kernel is periodic.

# %%
cctx = EvalContext(1, "compact")
thetas = np.linspace(-math.pi, math.pi, 9)
row = [p_compact(cctx, 1.0, CylPoint(0.5, th)).value for th in thetas]
print(np.array2string(np.array(row), precision=6))
print(p_compact(cctx, 1.0, CylPoint(0.5, 1.0)).value == p_compact(cctx, 1.0, CylPoint(0.5, 1.0 + 2 * math.pi)).value)
