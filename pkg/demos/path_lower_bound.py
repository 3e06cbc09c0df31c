"""
Energy of the path and the recursive cluster schedule
=====================================================
"""

# %%
import numpy as np

from flockenergy import lower_bound as lb

# diameter of the path orbit from a unit spike: spectral formula vs simulation
model = lb.PathSpectralModel(16, 0.1)
t = np.arange(1, 11)
print(np.c_[t, lb.path_diameter(model, t), lb.simulate_path(model, 10, None)])

# %%
# 1-energy grows linearly in n
ns = np.array([8, 16, 32, 64])
e = np.array([lb.measured_path_energy(lb.PathSpectralModel(int(n), 0.1), 1.0) for n in ns])
print(e, np.polyfit(np.log(ns), np.log(e), 1)[0])

# %%
# m clusters: measured schedule energy against the lower-bound shape
for n, m in [(8, 2), (16, 2), (16, 4)]:
    sched = lb.build_recursive_schedule(n, m, 0.1)
    for s in (0.5, 1.0):
        en = lb.schedule_energy(sched, s)
        print(n, m, s, f"{en.total:.4g}", f"{lb.theorem3_bound(n, m, 0.1, s):.4g}")
