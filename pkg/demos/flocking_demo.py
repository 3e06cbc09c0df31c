"""
Flocking with hysteresis links
==============================

Birds link when close and misaligned; flocks average velocities until the
network freezes, then each flock flies along a line.
"""

# %%
import numpy as np

from flockenergy import flocking

cfg = flocking.FlockConfig(8, r=0.5, eps_o=0.05, max_steps=2000)
x0, v0 = flocking.sample_initial(cfg, np.random.default_rng(3))
run = flocking.simulate(cfg, x0, v0)
print("switch times:", run.switches.times)

# %%
st = flocking.detect_stabilization(run)
print(st.status, "t_stable =", st.t_stable)
print("flocks:", [f.tolist() for f in st.flocks])
print("decay rates:", np.round(st.decay_rates(), 4))

# %%
stats = flocking.count_switch_stats(run, cfg.eps_o / np.sqrt(3))
print(stats)

# %%
tr = flocking.backward_trace(run, cfg.eps_o / np.sqrt(3))
print("R =", tr.R, " residual =", tr.sbp_residual)

# %%
line = flocking.fit_flight_line(run, start=st.t_stable)
print("max line residual:", line.residual.max())
