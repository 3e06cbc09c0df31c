"""
Pinned swarm on a grid with link failures
=========================================

Two opposite columns of a 30x30 grid are pinned to the plane X = 0; every
other robot starts in the unit cube and averages over surviving links.
"""

# %%
import numpy as np

from flockenergy import swarm

cfg, x0 = swarm.grid_scenario(30, 30, p=0.7, seed=2, steps=2000)
run = swarm.run_swarm(cfg, x0)
free = np.setdiff1d(np.arange(900), cfg.pinned)
print("nu =", cfg.nu, " c =", cfg.contraction_rate)

# %%
# the slowest mode spans 28 free columns, so flattening takes thousands of steps
X = run.trajectory[:, :, 0]
for t in (0, 200, 500, 1000, 2000):
    print(t, f"{np.abs(X[t, free]).max():.4f}")

# %%
for alpha in (0.1, 0.03):
    print(alpha, run.stats(alpha), f"{swarm.theorem4_bound(900, cfg.d, 0.7, cfg.rho, alpha):.3e}")
