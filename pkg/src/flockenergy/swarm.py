"""Robot pattern formation: averaging over a randomly failing network with a pinned set.

Pinned vertices are held on the plane ``X = 0`` by symmetrization: a mirror
copy of the free vertices is glued on along the pinned set and started with
negated ``X``, so antisymmetry keeps the pinned vertices fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EnergyLedger, ReversibleSystem, block_lengths, build_system, s_energy
from .graphs import WeightedGraph


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    """Counter-based stream for one replica: Philox keyed by ``SeedSequence(seed, spawn_key=(replica,))``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replica),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class SymmetrizedSystem:
    """Doubled graph on ``nu = 2n - r`` vertices.

    Vertex ``i < n`` is original; the copy of free vertex ``free[k]`` is
    ``n + k``. ``edge_source[e]`` is the base-graph edge that doubled edge
    ``e`` comes from, so one failure mask drives both copies.
    """

    base: WeightedGraph
    pinned: np.ndarray
    free: np.ndarray
    mirror: np.ndarray
    edges: np.ndarray
    edge_source: np.ndarray
    x0: np.ndarray

    @property
    def nu(self) -> int:
        return len(self.mirror)

    @property
    def graph(self) -> WeightedGraph:
        return WeightedGraph(self.nu, self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.nu)

    def masked_edges(self, keep: np.ndarray) -> np.ndarray:
        return self.edges[keep[self.edge_source]]


def symmetrize(G: WeightedGraph, R, x0: np.ndarray) -> SymmetrizedSystem:
    """Glue a mirror copy of ``G`` along the pinned set ``R``.

    ``x0`` holds ``(X, Y, Z)`` per base vertex; pinned vertices are put on
    ``X = 0``, copies get ``-X`` and the same ``Y, Z``.
    """
    R = np.unique(np.asarray(list(R), dtype=np.int64))
    if len(R) == 0:
        raise ValueError("pinned set R must be nonempty")
    if R.min() < 0 or R.max() >= G.n:
        raise ValueError("pinned vertex outside the graph")
    n = G.n
    x0 = np.array(x0, dtype=float)
    if x0.shape != (n, 3):
        raise ValueError("x0 must have shape (n, 3)")
    is_pinned = np.zeros(n, dtype=bool)
    is_pinned[R] = True
    free = np.flatnonzero(~is_pinned)
    mirror_of = np.arange(n)
    mirror_of[free] = n + np.arange(len(free))
    nu = n + len(free)
    mirror = np.empty(nu, dtype=np.int64)
    mirror[:n] = mirror_of
    mirror[n + np.arange(len(free))] = free

    e = G.edges
    twin = np.sort(mirror_of[e], axis=1)
    self_mirrored = np.all(twin == e, axis=1)
    edges = np.vstack([e, twin[~self_mirrored]])
    source = np.r_[np.arange(len(e)), np.flatnonzero(~self_mirrored)]

    x = np.empty((nu, 3))
    x[:n] = x0
    x[R, 0] = 0.0
    x[n:] = x0[free]
    x[n:, 0] = -x0[free, 0]
    return SymmetrizedSystem(G, R, free, mirror, edges, source, x)


@dataclass
class SwarmConfig:
    graph: WeightedGraph
    pinned: np.ndarray
    p: float = 1.0
    a: np.ndarray | float | None = None
    seed: int = 0
    replica: int = 0
    max_steps: int = 200
    # "mirror" (symmetrization) or "zero-weight" (freeze pinned rows).
    pin_mode: str = "mirror"

    def __post_init__(self) -> None:
        if self.graph.n_components != 1:
            raise ValueError("base graph must be connected")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.pin_mode not in ("mirror", "zero-weight"):
            raise ValueError(f"unknown pin mode {self.pin_mode!r}")
        self.pinned = np.unique(np.asarray(self.pinned, dtype=np.int64))
        deg = self.symmetrized_degrees()
        a = 1.0 / (deg.max() + 2) if self.a is None else self.a
        self.a = np.broadcast_to(np.asarray(a, dtype=float), (self.graph.n,)).copy()
        if np.any(self.a <= 0) or np.any(self.a >= 1.0 / (deg + 1)):
            raise ValueError("weights must satisfy 0 < a_i < 1/(d_i + 1)")

    def symmetrized_degrees(self) -> np.ndarray:
        """Base-vertex degrees in the doubled graph (pinned vertices gain mirror links)."""
        G = self.graph
        is_pinned = np.zeros(G.n, dtype=bool)
        is_pinned[self.pinned] = True
        e = G.edges
        both = is_pinned[e[:, 0]] & is_pinned[e[:, 1]]
        w = np.where(both, 1, 2)
        deg = G.degrees.copy()
        deg += np.bincount(e[:, 0], weights=(w - 1) * is_pinned[e[:, 0]], minlength=G.n).astype(int)
        deg += np.bincount(e[:, 1], weights=(w - 1) * is_pinned[e[:, 1]], minlength=G.n).astype(int)
        return deg

    @property
    def rho(self) -> float:
        return float(self.a.min())

    @property
    def d(self) -> int:
        return int(self.symmetrized_degrees().max())

    @property
    def nu(self) -> int:
        return 2 * self.graph.n - len(self.pinned)

    @property
    def contraction_rate(self) -> float:
        """``c = rho p / (2 d nu^2)``: guaranteed expected shrink of the squared q-norm."""
        return self.rho * self.p / (2 * self.d * self.nu ** 2)


def sample_failures(G: WeightedGraph, p: float, rng: np.random.Generator,
                    return_mask: bool = False):
    """Keep each edge of ``G`` independently with probability ``p``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    keep = rng.random(G.n_edges) < p
    return keep if return_mask else G.subgraph_mask(keep)


def build_failure_matrix(subgraph: WeightedGraph, a) -> ReversibleSystem:
    """Matrix of a failure realization: ``a_i`` per surviving link, the rest on the diagonal."""
    return build_system(subgraph, a)


def _avg_step(x: np.ndarray, edges: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``P x`` for the matrix with ``P_ij = a_i`` on ``edges``; avoids building the sparse matrix."""
    i, j = edges[:, 0], edges[:, 1]
    d = x[j] - x[i]
    nv, k = x.shape
    cols = np.arange(k)
    size = nv * k
    flow = np.bincount((i[:, None] * k + cols).ravel(), (a[i, None] * d).ravel(), size)
    flow -= np.bincount((j[:, None] * k + cols).ravel(), (a[j, None] * d).ravel(), size)
    return x + flow.reshape(nv, k)


@dataclass(frozen=True)
class ConvergenceStats:
    alpha: float
    N_alpha: int
    K_alpha: int
    T_alpha: int


@dataclass
class SwarmRun:
    config: SwarmConfig
    system: SymmetrizedSystem | None
    q: np.ndarray
    trajectory: np.ndarray
    rows: np.ndarray
    max_edge: np.ndarray
    ledger: EnergyLedger = field(repr=False)

    COLUMNS = ("t", "max_block", "diameter", "qnorm2", "edges_kept")

    @property
    def norms(self) -> np.ndarray:
        return self.rows[:, 3]

    def stats(self, alpha: float) -> ConvergenceStats:
        T = len(self.rows) - 1
        blocks = self.rows[:T, 1]
        diam = self.rows[:, 2]
        above = np.flatnonzero(diam > alpha)
        return ConvergenceStats(
            alpha=alpha,
            N_alpha=int(np.sum(blocks > alpha)),
            K_alpha=int(np.sum(self.max_edge[:T] > alpha)),
            T_alpha=int(above[-1]) if len(above) else -1,
        )

    def energy(self, s: float) -> float:
        return s_energy(self.ledger, s)

    def contraction_ratios(self) -> np.ndarray:
        """``|x(t+1)|_q^2 / |x(t)|_q^2`` along the ``X`` axis."""
        nrm = self.norms
        return nrm[1:] / nrm[:-1]

    def base_positions(self) -> np.ndarray:
        """Final positions of the ``n`` base robots (copies dropped)."""
        return self.trajectory[-1, : self.config.graph.n]


def initial_positions(config: SwarmConfig, rng: np.random.Generator) -> np.ndarray:
    """Free robots uniform in the unit cube; pinned robots on ``X = 0``."""
    x0 = rng.random((config.graph.n, 3))
    x0[config.pinned, 0] = 0.0
    return x0


def run_swarm(config: SwarmConfig, x0: np.ndarray | None = None,
              steps: int | None = None, keep_trajectory: bool = True,
              stop_below: float | None = None) -> SwarmRun:
    """Run the failure-driven averaging dynamics and record per-step rows.

    Each step draws one keep/drop decision per base edge from the replica's
    stream; mirrored edges share the decision. Only the ``X`` axis feeds the
    block ledger (longest block per step) and the statistics.

    The ``X`` diameter never grows, so with ``stop_below`` the run ends at the
    first time the diameter is at most that value; statistics for any
    ``alpha >= stop_below`` are unaffected.
    """
    rng = replica_rng(config.seed, config.replica)
    if x0 is None:
        x0 = initial_positions(config, rng)
    steps = config.max_steps if steps is None else steps
    G = config.graph
    if config.pin_mode == "mirror":
        sym = symmetrize(G, config.pinned, x0)
        x = sym.x0.copy()
        a = np.r_[config.a, config.a[sym.free]]
    else:
        sym = None
        x = np.array(x0, dtype=float)
        x[config.pinned, 0] = 0.0
        a = config.a.copy()
        a[config.pinned] = 0.0
    q = 1.0 / np.r_[config.a, config.a[sym.free]] if sym is not None else 1.0 / config.a
    traj = np.empty((steps + 1,) + x.shape) if keep_trajectory else x[None].copy()
    rows = np.empty((steps + 1, 5))
    max_edge = np.zeros(steps + 1)
    ledger = EnergyLedger(mode="max")
    for t in range(steps + 1):
        if keep_trajectory:
            traj[t] = x
        X = x[:, 0]
        if t == steps or (stop_below is not None and np.ptp(X) <= stop_below):
            rows[t] = (t, 0.0, np.ptp(X), float(np.dot(q, X * X)), 0)
            break
        keep = sample_failures(G, config.p, rng, return_mask=True)
        edges = sym.masked_edges(keep) if sym is not None else G.edges[keep]
        lengths = block_lengths(X, edges)
        ledger.record(lengths)
        if len(edges):
            max_edge[t] = np.abs(X[edges[:, 0]] - X[edges[:, 1]]).max()
        rows[t] = (t, lengths.max() if len(lengths) else 0.0, np.ptp(X),
                   float(np.dot(q, X * X)), len(edges))
        x = _avg_step(x, edges, a)
    rows, max_edge = rows[: t + 1], max_edge[: t + 1]
    traj = traj[: t + 1] if keep_trajectory else x[None]
    return SwarmRun(config, sym, q, traj, rows, max_edge, ledger)


def theorem4_bound(n: int, d: int, p: float, rho: float, eps: float,
                   multiplier: float = 1.0) -> float:
    """``multiplier * d^2 n^4 / (p^3 rho^2) * log(n / (rho eps))``."""
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if not 0 < rho <= 0.5:
        raise ValueError("rho must lie in (0, 1/2]")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return multiplier * d * d * n ** 4 / (p ** 3 * rho * rho) * np.log(n / (rho * eps))


def grid_scenario(rows: int = 30, cols: int = 30, p: float = 0.7, seed: int = 0,
                  steps: int = 200, a=None) -> tuple[SwarmConfig, np.ndarray]:
    """Grid with its first and last columns pinned; pinned Y/Z on a regular lattice."""
    G = WeightedGraph.grid(rows, cols)
    idx = np.arange(rows * cols).reshape(rows, cols)
    pinned = np.r_[idx[:, 0], idx[:, -1]]
    cfg = SwarmConfig(G, pinned, p=p, a=a, seed=seed, max_steps=steps)
    x0 = initial_positions(cfg, replica_rng(seed, 10**6))
    rr, cc = np.divmod(pinned, cols)
    x0[pinned, 1] = rr / max(rows - 1, 1)
    x0[pinned, 2] = cc / max(cols - 1, 1)
    return cfg, x0


def path_scenario(n: int = 10, p: float = 1.0, seed: int = 0, replica: int = 0,
                  steps: int = 500, a=None) -> SwarmConfig:
    """Path on ``n`` robots with vertex 0 pinned."""
    return SwarmConfig(WeightedGraph.path(n), [0], p=p, a=a, seed=seed,
                       replica=replica, max_steps=steps)
