import numpy as np
import pytest

from flockenergy.core import build_system
from flockenergy.graphs import WeightedGraph
from flockenergy.lower_bound import (
    PathSpectralModel,
    build_recursive_schedule,
    contraction_steps,
    fit_theorem3_constant,
    measured_path_energy,
    path_diameter,
    path_diameter_bound,
    path_energy_bound,
    path_s_energy,
    replay_schedule,
    schedule_energy,
    simulate_path,
    theorem3_bound,
    unit_variance_scale,
)


def dense_path_matrix(n, rho):
    L = np.zeros((n, n))
    for i in range(n - 1):
        L[i, i] += 1
        L[i + 1, i + 1] += 1
        L[i, i + 1] = L[i + 1, i] = -1
    return np.eye(n) - rho * L


def power_diameters(n, rho, T):
    P = dense_path_matrix(n, rho)
    x = np.zeros(n)
    x[0] = 1
    out = []
    for _ in range(T):
        out.append(x[0] - x[-1])
        x = P @ x
    return np.array(out)


def test_rho_range():
    with pytest.raises(ValueError):
        PathSpectralModel(8, 0.25)
    with pytest.raises(ValueError):
        PathSpectralModel(1, 0.1)


@pytest.mark.parametrize("n", [2, 3, 8, 17, 64, 256])
def test_eigenpairs(n):
    model = PathSpectralModel(n, 0.1)
    P = dense_path_matrix(n, 0.1)
    V, lam = model.eigenvectors, model.eigenvalues
    assert np.abs(P @ V - V * lam).max() <= 1e-9
    assert np.abs(model.system().to_dense() - P).max() <= 1e-15 if n <= 64 else True
    assert abs(V[:, 1] @ V[:, 1] - n / 2) <= 1e-9


def test_two_vertex_closed_form():
    model = PathSpectralModel(2, 0.1)
    t = np.arange(1, 201)
    assert model.lambda1 == pytest.approx(0.8, abs=1e-15)
    assert np.abs(path_diameter(model, t) - 0.8 ** (t - 1)).max() <= 1e-12
    assert np.abs(simulate_path(model, 200, None) - 0.8 ** (t - 1)).max() <= 1e-12
    assert np.abs(path_diameter_bound(model, t) - 0.8 ** (t - 1)).max() <= 1e-12
    assert path_diameter(model, 1) == pytest.approx(1.0, abs=1e-15)
    assert path_s_energy(model, 1.0) == pytest.approx(5.0, abs=1e-9)
    assert path_energy_bound(model, 1.0) == pytest.approx(5.0, abs=1e-12)


def test_spectral_matches_matrix_power():
    model = PathSpectralModel(8, 0.1)
    oracle = power_diameters(8, 0.1, 50)
    assert abs(path_diameter(model, 50) - oracle[49]) <= 1e-9


@pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
def test_spectral_vs_simulation_and_lower_bound(n):
    model = PathSpectralModel(n, 0.1)
    t = np.arange(1, 1001)
    spectral = path_diameter(model, t)
    sim = simulate_path(model, 1000, None)
    assert np.abs(spectral - sim).max() <= 1e-9
    assert np.all(spectral >= path_diameter_bound(model, t) - 1e-12)


def test_rank_order_kept():
    model = PathSpectralModel(16, 0.2)
    sys = model.system()
    x = np.zeros(16)
    x[0] = 1
    for _ in range(500):
        x = sys.apply(x)
        assert np.all(np.diff(x) <= 0)


@pytest.mark.parametrize("s", [0.5, 1.0])
def test_path_energy_above_bound(s):
    for n in (2, 8, 16, 32):
        model = PathSpectralModel(n, 0.1)
        e = path_s_energy(model, s)
        assert e >= path_energy_bound(model, s) - 1e-9
        assert measured_path_energy(model, s) == pytest.approx(e, rel=1e-9)


def test_path_energy_linear_in_n():
    ns = np.array([8, 16, 32, 64])
    e = np.array([path_s_energy(PathSpectralModel(int(n), 0.1), 1.0) for n in ns])
    slope = np.polyfit(np.log(ns), np.log(e), 1)[0]
    assert abs(slope - 1.0) <= 0.15


def test_theorem3_bound_examples():
    for n in (1, 5, 30):
        assert theorem3_bound(n, 1, 0.1, 1.0, 1.0) == pytest.approx(n, rel=1e-15)
    assert theorem3_bound(16, 2, 0.1, 0.5, 1.0) == pytest.approx(2560.0, abs=1e-9)
    e = 1234.5
    c = fit_theorem3_constant(e, 16, 2, 0.1, 0.5)
    assert theorem3_bound(16, 2, 0.1, 0.5, c) == pytest.approx(e, rel=1e-12)
    assert unit_variance_scale(16, 0.1, 1.0) == pytest.approx(np.sqrt(0.1 / 16))
    with pytest.raises(ValueError):
        theorem3_bound(4, 5, 0.1, 1.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        build_recursive_schedule(10, 3, 0.1)
    with pytest.raises(ValueError):
        build_recursive_schedule(10, 1, 0.1)
    with pytest.raises(ValueError):
        build_recursive_schedule(10, 2, 0.3)


@pytest.mark.parametrize("n,m", [(8, 2), (12, 3), (16, 4)])
def test_schedule_matrices_valid(n, m):
    rho = 0.1
    sched = build_recursive_schedule(n, m, rho, rel_cutoff=1e-6)
    stack = [(sched, 0)]
    while stack:
        sc, _ = stack.pop()
        for ph in sc.phases:
            sys = build_system(ph.graph, rho)
            sys.check()
            assert sys.rho == rho
            assert ph.graph.n_components <= sc.n
            if ph.sub is not None:
                stack.append((ph.sub, 0))
    rep = replay_schedule(sched, rounds=2)
    assert rep.max_components <= m
    assert rep.center_drift <= 1e-12


@pytest.mark.parametrize("n,m", [(8, 2), (16, 2), (16, 4)])
def test_phase_one_and_two_endpoints(n, m):
    rho = 0.1
    sched = build_recursive_schedule(n, m, rho)
    nu = n // m
    link, contract = sched.phases[:2]
    assert link.kind == "link" and link.steps == 1
    x = sched.initial_state()
    x = build_system(link.graph, rho).apply(x)
    assert x[nu - 1] == pytest.approx(rho, abs=1e-15)
    assert x[nu] == pytest.approx(1 - rho, abs=1e-15)
    sys = build_system(contract.graph, rho)
    for _ in range(contract.steps):
        x = sys.apply(x)
    assert np.abs(x[:nu] - rho / nu).max() <= 1e-9
    assert np.abs(x[nu:2 * nu] - (1 - rho / nu)).max() <= 1e-9
    rep = replay_schedule(sched, rounds=1)
    assert abs(rep.phase1_energy - 1.0) <= 1e-9


def test_contraction_steps_cutoff():
    k = contraction_steps(4, 0.1, 1e-6)
    d = power_diameters(4, 0.1, k + 2)
    assert d[k] < 1e-6 <= d[k - 1]
    assert contraction_steps(1, 0.1, 1e-6) == 0


@pytest.mark.parametrize("s", [0.5, 1.0])
def test_two_cluster_energy_at_least_first_terms(s):
    rho, nu = 0.1, 4
    sched = build_recursive_schedule(2 * nu, 2, rho, s)
    F = measured_path_energy(PathSpectralModel(nu, rho), s)
    E = schedule_energy(sched, s)
    assert E.total >= (1 + 2 * rho**s * F) * (1 - 1e-3)
    assert E.phase1 == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n,m,rounds", [(8, 2, 5), (9, 3, 3), (12, 4, 2)])
@pytest.mark.parametrize("s", [0.5, 1.0])
def test_literal_replay_matches_finite_composition(n, m, rounds, s):
    rho = 0.1

    def composed(sc):
        flat = replay_schedule(
            type(sc)(sc.n, sc.m, sc.rho, s, sc.rel_cutoff,
                     tuple(p for p in sc.phases if p.kind != "recurse")), rounds=1).energy(s)
        sub = 0.0
        for ph in sc.phases:
            if ph.sub is not None:
                sub = (rho / sc.nu) ** s * composed(ph.sub)
        f = sc.shrink ** s
        return (flat + sub) * (1 - f**rounds) / (1 - f)

    sched = build_recursive_schedule(n, m, rho, s, rel_cutoff=1e-7)
    rep = replay_schedule(sched, rounds=rounds)
    # averaging a collapsed cluster leaves ulp-sized blocks; each costs up to
    # (n eps)^s per step, which only matters for s < 1
    noise = rep.steps * n * (n * np.finfo(float).eps) ** s
    assert rep.energy(s) == pytest.approx(composed(sched), rel=1e-9, abs=noise)


def test_composed_energy_is_limit_of_literal_rounds():
    sched = build_recursive_schedule(8, 2, 0.1, 1.0, rel_cutoff=1e-8)
    total = schedule_energy(sched).total
    f = sched.shrink
    prev = 0.0
    for rounds in (1, 10, 100):
        e = replay_schedule(sched, rounds=rounds).energy(1.0)
        assert prev < e <= total * (1 + 1e-9)
        assert e == pytest.approx(total * (1 - f**rounds), rel=1e-9)
        prev = e


def test_schedule_config_roundtrip_fields():
    sched = build_recursive_schedule(16, 4, 0.1, 0.5)
    cfg = sched.to_config()
    assert cfg["mode"] == "lower-bound" and cfg["n"] == 16 and cfg["m"] == 4
