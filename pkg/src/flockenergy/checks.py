"""Quick randomized invariant suites behind ``flockenergy check``."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import core, flocking, lower_bound, swarm
from .graphs import WeightedGraph, random_component_graph, union_find_components


def random_instance(rng: np.random.Generator, n_max: int = 50):
    n = int(rng.integers(2, n_max + 1))
    g = random_component_graph(n, int(rng.integers(1, n + 1)), rng, extra=float(rng.random() * 0.3))
    limit = 1.0 / (g.degrees + 1)
    a = limit * rng.uniform(0.05, 1.0, n)
    x = rng.standard_normal(n) * rng.uniform(0.1, 10)
    return g, a, x


def check_dirichlet(rng: np.random.Generator, trials: int = 200) -> bool:
    for _ in range(trials):
        g, a, x = random_instance(rng)
        sys = core.build_system(g, a)
        q = sys.q
        if core.q_norm2(sys.apply(x), q) > core.q_norm2(x, q) - core.dirichlet_form(x, g) / 2 + 1e-9:
            return False
    return True


def check_systems(rng: np.random.Generator, trials: int = 100) -> bool:
    for _ in range(trials):
        g, a, _ = random_instance(rng)
        try:
            core.build_system(g, a).check()
        except AssertionError:
            return False
        if union_find_components(g) != g.n_components:
            return False
    return True


def check_q_mean(rng: np.random.Generator, steps: int = 2000) -> bool:
    n = 20
    a = rng.uniform(0.5, 1.0, n) / n
    x = rng.standard_normal(n)
    q = 1 / a
    mean0 = core.q_mean(x, q)
    lo, hi = x.min(), x.max()
    for _ in range(steps):
        x = core.build_system(random_component_graph(n, 3, rng), a).apply(x)
        if x.min() < lo - 1e-12 or x.max() > hi + 1e-12:
            return False
        lo, hi = x.min(), x.max()
    return abs(core.q_mean(x, q) - mean0) <= 1e-10


def check_path_spectrum() -> bool:
    for n in (2, 8, 33):
        model = lower_bound.PathSpectralModel(n, 0.1)
        P = model.system().to_dense()
        V, lam = model.eigenvectors, model.eigenvalues
        if np.abs(P @ V - V * lam).max() > 1e-9:
            return False
        sim = lower_bound.simulate_path(model, horizon=200, stop_below=None)
        if np.abs(sim - lower_bound.path_diameter(model, np.arange(1, 201))).max() > 1e-9:
            return False
    return True


def check_schedule() -> bool:
    sched = lower_bound.build_recursive_schedule(12, 3, 0.1, rel_cutoff=1e-6)
    rep = lower_bound.replay_schedule(sched, rounds=2)
    return rep.max_components <= 3 and rep.center_drift <= 1e-12 and abs(rep.phase1_energy - 1) < 1e-9


def check_swarm(seed: int = 0) -> bool:
    cfg = swarm.path_scenario(10, p=0.6, seed=seed, steps=300)
    run = swarm.run_swarm(cfg)
    X = run.trajectory[:, :, 0]
    sym = run.system
    pinned_ok = np.abs(X[:, sym.pinned]).max() <= 1e-12
    anti_ok = np.abs(X + X[:, sym.mirror]).max() <= 1e-12
    mono = np.all(np.diff(run.norms) <= 1e-12 * run.norms[:-1])
    stats_ok = all(run.stats(al).K_alpha <= run.stats(al).N_alpha for al in (0.1, 0.01))
    return bool(pinned_ok and anti_ok and mono and stats_ok)


def check_flocking(seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    cfg = flocking.FlockConfig(6, r=0.5, eps_o=0.05, max_steps=400)
    x0, v0 = flocking.sample_initial(cfg, rng)
    run = flocking.simulate(cfg, x0, v0)
    for t in range(run.T):
        for f in run.graphs[t].components:
            before = core.q_mean(run.v[t, f], cfg.q[f])
            after = core.q_mean(run.v[t + 1, f], cfg.q[f])
            if np.abs(before - after).max() > 1e-10:
                return False
    tr = flocking.backward_trace(run, cfg.eps_o / 2)
    return tr.sbp_residual <= 1e-9 and tr.monotone_on_R()


SUITES: dict[str, Callable[[np.random.Generator], bool]] = {
    "dirichlet": check_dirichlet,
    "systems": check_systems,
    "q_mean": check_q_mean,
    "path_spectrum": lambda rng: check_path_spectrum(),
    "schedule": lambda rng: check_schedule(),
    "swarm": lambda rng: check_swarm(int(rng.integers(2**31))),
    "flocking": lambda rng: check_flocking(int(rng.integers(2**31))),
}


def run_checks(seed: int = 0) -> dict[str, bool]:
    rng = np.random.default_rng(seed)
    return {name: bool(fn(rng)) for name, fn in SUITES.items()}
