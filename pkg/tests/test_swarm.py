import numpy as np
import pytest

from flockenergy.core import build_system
from flockenergy.graphs import WeightedGraph
from flockenergy.swarm import (
    SwarmConfig,
    _avg_step,
    build_failure_matrix,
    grid_scenario,
    path_scenario,
    replica_rng,
    run_swarm,
    sample_failures,
    symmetrize,
    theorem4_bound,
)


def test_replica_streams():
    a = replica_rng(5, 0).random(4)
    assert np.array_equal(a, replica_rng(5, 0).random(4))
    assert not np.array_equal(a, replica_rng(5, 1).random(4))
    assert not np.array_equal(a, replica_rng(6, 0).random(4))
    ref = np.random.Generator(np.random.Philox(np.random.SeedSequence(5, spawn_key=(0,))))
    assert np.array_equal(a, ref.random(4))


def test_sample_failures_statistics():
    G = WeightedGraph.grid(30, 30)
    assert sample_failures(G, 1.0, replica_rng(0)) == G
    rng = replica_rng(1)
    sigma = np.sqrt(1740 * 0.7 * 0.3)
    assert abs(sample_failures(G, 0.7, rng).n_edges - 1218) <= 3 * sigma
    counts = [int(sample_failures(G, 0.7, rng, return_mask=True).sum()) for _ in range(1000)]
    assert abs(np.mean(counts) - 1218) <= 0.01 * 1218
    with pytest.raises(ValueError):
        sample_failures(G, 0.0, rng)


def test_failure_matrix_examples():
    assert np.array_equal(build_failure_matrix(WeightedGraph.empty(3), 0.2).to_dense(), np.eye(3))
    sys = build_failure_matrix(WeightedGraph(3, [(0, 2)]), [0.2, 0.2, 0.2])
    P = sys.to_dense()
    assert P[0, 0] == P[2, 2] == pytest.approx(0.8, abs=1e-15)
    assert P[0, 2] == P[2, 0] == 0.2 and P[1, 1] == 1.0
    assert sys.q[0] * P[0, 2] == sys.q[2] * P[2, 0] == 1.0


def test_symmetrize_path():
    x0 = np.array([[0.3, 0.1, 0.2], [0.5, 0.4, 0.6], [0.9, 0.7, 0.8]])
    sym = symmetrize(WeightedGraph.path(3), [1], x0)
    assert sym.nu == 5
    assert sym.graph.n_edges == 4 and sym.graph.n_components == 1
    X = sym.x0[:, 0]
    assert X[1] == 0
    assert np.array_equal(X, -X[sym.mirror])
    assert np.array_equal(sym.x0[:, 1:], sym.x0[sym.mirror, 1:])
    with pytest.raises(ValueError):
        symmetrize(WeightedGraph.path(3), [], x0)


def test_mirrored_mask_is_shared():
    G = WeightedGraph.grid(4, 5)
    pinned = [0, 5, 10, 15]
    sym = symmetrize(G, pinned, np.random.default_rng(0).random((20, 3)))
    rng = np.random.default_rng(1)
    for _ in range(50):
        keep = rng.random(G.n_edges) < 0.5
        kept = {tuple(e) for e in sym.masked_edges(keep).tolist()}
        mirrored = {tuple(sorted((int(sym.mirror[i]), int(sym.mirror[j])))) for i, j in kept}
        assert kept == mirrored


def test_config_validation():
    with pytest.raises(ValueError):
        SwarmConfig(WeightedGraph(4, [(0, 1), (2, 3)]), [0])
    with pytest.raises(ValueError):
        SwarmConfig(WeightedGraph.path(4), [0], p=1.5)
    # pinned endpoint gains a mirror link: degree 2 in the doubled graph, so a < 1/3
    with pytest.raises(ValueError):
        SwarmConfig(WeightedGraph.path(4), [0], a=1 / 3)
    cfg = SwarmConfig(WeightedGraph.path(4), [0])
    assert cfg.d == 2 and cfg.nu == 7 and cfg.rho == 0.25
    assert cfg.contraction_rate == pytest.approx(0.25 / (2 * 2 * 49))


def test_avg_step_matches_matrix():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        g = WeightedGraph.from_adjacency(rng.random((n, n)) < 0.2)
        a = rng.uniform(0.1, 1.0, n) / (g.degrees + 1)
        x = rng.standard_normal((n, 3))
        want = build_failure_matrix(g, a).to_dense() @ x
        assert np.abs(_avg_step(x, g.edges, a) - want).max() <= 1e-14


def test_pinned_fixed_and_antisymmetric():
    cfg = path_scenario(10, p=0.6, seed=3, steps=1000)
    run = run_swarm(cfg)
    X = run.trajectory[:, :, 0]
    sym = run.system
    assert np.abs(X[:, sym.pinned]).max() <= 1e-12
    assert np.abs(X + X[:, sym.mirror]).max() <= 1e-12
    YZ = run.trajectory[:, :, 1:]
    assert np.abs(YZ - YZ[:, sym.mirror]).max() <= 1e-12


def test_grid_pinned_fixed():
    cfg, x0 = grid_scenario(8, 8, p=0.7, seed=1, steps=50)
    run = run_swarm(cfg, x0)
    X = run.trajectory[:, :, 0]
    assert np.abs(X[:, cfg.pinned]).max() <= 1e-12
    assert np.abs(X + X[:, run.system.mirror]).max() <= 1e-12


def test_norms_nonincreasing_and_static_diameter_decay():
    for p in (1.0, 0.5):
        run = run_swarm(path_scenario(10, p=p, seed=4, steps=400))
        nrm = run.norms
        assert np.all(nrm[1:] <= nrm[:-1] * (1 + 1e-12))
    diam = run_swarm(path_scenario(10, p=1.0, seed=4, steps=400)).rows[:, 2]
    assert np.all(np.diff(diam) <= 1e-15)


def test_stats_against_independent_replay():
    cfg = path_scenario(8, p=0.5, seed=9, steps=300)
    run = run_swarm(cfg)
    # replay the stream by hand: initial positions, then one mask draw per step
    rng = replica_rng(cfg.seed, cfg.replica)
    rng.random((cfg.graph.n, 3))
    sym = run.system
    X = run.trajectory[:, :, 0]
    T = len(X) - 1
    longest, widest = [], []
    for t in range(T):
        keep = rng.random(cfg.graph.n_edges) < cfg.p
        edges = sym.masked_edges(keep)
        gaps = np.abs(X[t, edges[:, 0]] - X[t, edges[:, 1]])
        widest.append(gaps.max() if len(gaps) else 0.0)
        ivs = sorted((min(X[t, i], X[t, j]), max(X[t, i], X[t, j])) for i, j in edges)
        best, lo, hi = 0.0, None, None
        for a, b in ivs:
            if lo is None or a > hi:
                lo, hi = a, b
            else:
                hi = max(hi, b)
            best = max(best, hi - lo)
        longest.append(best)
    longest, widest = np.array(longest), np.array(widest)
    assert np.allclose(run.rows[:T, 1], longest, rtol=0, atol=1e-15)
    for alpha in (0.3, 0.1, 0.03, 0.01):
        st = run.stats(alpha)
        above = [t for t in range(T + 1) if np.ptp(X[t]) > alpha]
        assert st.N_alpha == int(np.sum(longest > alpha))
        assert st.K_alpha == int(np.sum(widest > alpha))
        assert st.T_alpha == (above[-1] if above else -1)
        assert st.K_alpha <= st.N_alpha


def test_max_edge_bounded_by_block():
    run = run_swarm(path_scenario(10, p=0.7, seed=1, steps=300))
    T = len(run.rows) - 1
    assert np.all(run.max_edge[:T] <= run.rows[:T, 1] + 1e-15)


def test_energy_is_max_block_sum():
    run = run_swarm(path_scenario(10, p=0.7, seed=2, steps=200))
    T = len(run.rows) - 1
    assert run.energy(1.0) == pytest.approx(run.rows[:T, 1].sum(), rel=1e-12)
    assert run.energy(0.5) == pytest.approx(np.sum(run.rows[:T, 1] ** 0.5), rel=1e-12)


def test_expected_contraction_small_sample():
    cfg = path_scenario(10, p=0.7, seed=0)
    c = cfg.contraction_rate
    ratios = np.concatenate([
        run_swarm(path_scenario(10, p=0.7, seed=0, replica=k, steps=500)).contraction_ratios()
        for k in range(10)
    ])
    sem = ratios.std(ddof=1) / np.sqrt(len(ratios))
    assert ratios.mean() <= 1 - c / 2 + 3 * sem


def test_zero_weight_pinning_keeps_plane():
    cfg = SwarmConfig(WeightedGraph.path(6), [0, 5], p=0.8, seed=2, pin_mode="zero-weight")
    run = run_swarm(cfg, steps=300)
    assert run.system is None
    assert np.abs(run.trajectory[:, [0, 5], 0]).max() == 0.0
    assert np.abs(run.trajectory[-1, :, 0]).max() < np.abs(run.trajectory[0, :, 0]).max()


def test_determinism():
    a = run_swarm(path_scenario(10, p=0.5, seed=11, steps=200))
    b = run_swarm(path_scenario(10, p=0.5, seed=11, steps=200))
    assert np.array_equal(a.trajectory, b.trajectory) and np.array_equal(a.rows, b.rows)
    c = run_swarm(path_scenario(10, p=0.5, seed=11, replica=1, steps=200))
    assert not np.array_equal(a.trajectory, c.trajectory)


def test_early_stop_keeps_stats():
    full = run_swarm(path_scenario(10, p=0.5, seed=3, steps=3000), keep_trajectory=False)
    short = run_swarm(path_scenario(10, p=0.5, seed=3, steps=3000), keep_trajectory=False,
                      stop_below=0.05)
    assert len(short.rows) < len(full.rows)
    for alpha in (0.05, 0.1, 0.3):
        assert short.stats(alpha) == full.stats(alpha)


def test_theorem4_bound():
    assert theorem4_bound(10, 2, 1.0, 0.1, 0.1) == pytest.approx(4e6 * np.log(1e3), rel=1e-12)
    assert theorem4_bound(10, 2, 1.0, 0.1, 0.1) == pytest.approx(2.763e7, rel=1e-3)
    assert theorem4_bound(10, 2, 0.5, 0.1, 0.1) == pytest.approx(8 * theorem4_bound(10, 2, 1.0, 0.1, 0.1))
    assert theorem4_bound(10, 2, 1.0, 0.1, 0.1, multiplier=0.5) == pytest.approx(
        0.5 * theorem4_bound(10, 2, 1.0, 0.1, 0.1))
    for bad in [(10, 2, 0.0, 0.1, 0.1), (10, 2, 1.0, 0.6, 0.1), (10, 2, 1.0, 0.1, 1.0), (0, 2, 1, .1, .1)]:
        with pytest.raises(ValueError):
            theorem4_bound(*bad)


def test_alignment_time_growth_in_inverse_p():
    eps = 0.1
    ps = np.array([1.0, 0.7, 0.5, 0.3])
    means = []
    for p in ps:
        ts = [run_swarm(path_scenario(10, p=float(p), seed=21, replica=k, steps=20000),
                        keep_trajectory=False, stop_below=eps).stats(eps).T_alpha
              for k in range(100)]
        means.append(np.mean(ts))
    slope = np.polyfit(np.log(1 / ps), np.log(means), 1)[0]
    assert 0 < slope <= 3.5
