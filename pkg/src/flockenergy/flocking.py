"""Discrete-time Vicsek-Cucker-Smale flocking with a hysteresis link rule.

Velocities are averaged over the current flocking network and positions
advance by the new velocity. A pair of birds gains a link only when they are
within distance ``r`` *and* their velocities differ by more than ``eps_o``;
an existing link survives while the pair stays within ``r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ReversibleSystem, block_intervals, build_system, q_mean
from .graphs import WeightedGraph


@dataclass
class FlockConfig:
    n: int
    r: float = 0.5
    eps_o: float = 0.05
    a: np.ndarray | float | None = None
    max_steps: int = 5000
    # Link lock: an edge is only dropped if the velocity gap also exceeds theta.
    theta: float | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.r <= 1:
            raise ValueError("r must lie in (0, 1]")
        if self.eps_o <= 0:
            raise ValueError("eps_o must be positive")
        a = 1.0 / max(self.n, 2) if self.a is None else self.a
        self.a = np.broadcast_to(np.asarray(a, dtype=float), (self.n,)).copy()
        if np.any(self.a <= 0) or np.any(self.a > 0.5):
            raise ValueError("weights must lie in (0, 1/2]")

    @property
    def rho(self) -> float:
        return float(self.a.min())

    @property
    def q(self) -> np.ndarray:
        return 1.0 / self.a


def sample_initial(config: FlockConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform positions in the unit ball and velocities in the ball of radius sqrt(rho/n)."""

    def ball(radius: float) -> np.ndarray:
        d = rng.standard_normal((config.n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return d * (radius * rng.random((config.n, 1)) ** (1 / 3))

    x0 = ball(1.0)
    v0 = ball(np.sqrt(config.rho / config.n))
    return x0, v0


def check_initial(config: FlockConfig, x0: np.ndarray, v0: np.ndarray) -> None:
    if x0.shape != (config.n, 3) or v0.shape != (config.n, 3):
        raise ValueError("initial positions and velocities must have shape (n, 3)")
    if np.linalg.norm(x0, axis=1).max() > 1 + 1e-12:
        raise ValueError("initial positions must lie in the unit ball")
    vmax = np.sqrt(config.rho / config.n)
    if np.linalg.norm(v0, axis=1).max() > vmax * (1 + 1e-12):
        raise ValueError(f"initial speeds must not exceed sqrt(rho/n) = {vmax:.6g}")


def _pairwise(z: np.ndarray) -> np.ndarray:
    diff = z[:, None, :] - z[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def update_network(x: np.ndarray, v: np.ndarray, prev: np.ndarray, config: FlockConfig):
    """Apply the link rule to boolean adjacency ``prev``.

    Returns ``(adjacency, created, deleted)`` where the edge arrays list
    ``(i, j)`` pairs with ``i < j``.
    """
    near = _pairwise(x) <= config.r
    np.fill_diagonal(near, False)
    gap = _pairwise(v)
    keep = near if config.theta is None else near | (gap <= config.theta)
    kept = prev & keep
    created = ~prev & near & (gap > config.eps_o)
    adj = kept | created
    gone = prev & ~kept
    return adj, _upper_pairs(created), _upper_pairs(gone)


def _upper_pairs(mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return np.zeros((0, 2), dtype=np.int64)
    i, j = np.nonzero(np.triu(mask, 1))
    return np.column_stack([i, j])


@dataclass
class FlockState:
    x: np.ndarray
    v: np.ndarray
    adj: np.ndarray = field(repr=False)
    t: int = 0
    created: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int), repr=False)
    deleted: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int), repr=False)
    _graph: WeightedGraph | None = field(default=None, repr=False)

    @property
    def graph(self) -> WeightedGraph:
        if self._graph is None:
            self._graph = WeightedGraph.from_adjacency(self.adj)
        return self._graph

    @property
    def flocks(self) -> list[np.ndarray]:
        return self.graph.components

    @property
    def switched(self) -> bool:
        return len(self.created) + len(self.deleted) > 0


def initial_state(config: FlockConfig, x0: np.ndarray, v0: np.ndarray) -> FlockState:
    """State at time 0.

    The network before time 0 is taken to be empty, so ``G_0`` comes from the
    same link rule and its edges are logged as creations at ``t = 0``.
    """
    x0 = np.array(x0, dtype=float)
    v0 = np.array(v0, dtype=float)
    check_initial(config, x0, v0)
    empty = np.zeros((config.n, config.n), dtype=bool)
    adj, cr, _ = update_network(x0, v0, empty, config)
    return FlockState(x0, v0, adj, 0, cr)


def vcs_step(state: FlockState, config: FlockConfig,
             system: ReversibleSystem | None = None) -> FlockState:
    """Advance one step: average velocities over ``G_t``, move, then relink."""
    sys = build_system(state.graph, config.a) if system is None else system
    v = sys.apply(state.v)
    x = state.x + v
    adj, cr, de = update_network(x, v, state.adj, config)
    nxt = FlockState(x, v, adj, state.t + 1, cr, de)
    if len(cr) + len(de) == 0:
        nxt._graph = state.graph
    return nxt


@dataclass
class SwitchLog:
    times: list[int] = field(default_factory=list)
    created: dict[int, np.ndarray] = field(default_factory=dict)
    deleted: dict[int, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def record(self, state: FlockState) -> None:
        if state.switched:
            self.times.append(state.t)
            self.created[state.t] = state.created
            self.deleted[state.t] = state.deleted


@dataclass
class FlockRun:
    """Full history: ``x[t]``, ``v[t]`` and ``graphs[t] = G_t`` for ``t = 0..T``."""

    config: FlockConfig
    x: np.ndarray
    v: np.ndarray
    graphs: list[WeightedGraph]
    switches: SwitchLog

    @property
    def T(self) -> int:
        return len(self.graphs) - 1


def simulate(config: FlockConfig, x0: np.ndarray, v0: np.ndarray,
             steps: int | None = None) -> FlockRun:
    steps = config.max_steps if steps is None else steps
    state = initial_state(config, x0, v0)
    n = config.n
    xs = np.empty((steps + 1, n, 3))
    vs = np.empty((steps + 1, n, 3))
    xs[0], vs[0] = state.x, state.v
    graphs = [state.graph]
    log = SwitchLog()
    log.record(state)
    sys = None
    for t in range(steps):
        if sys is None or sys.graph is not state.graph:
            sys = build_system(state.graph, config.a)
        state = vcs_step(state, config, sys)
        xs[t + 1], vs[t + 1] = state.x, state.v
        graphs.append(state.graph)
        log.record(state)
    return FlockRun(config, xs, vs, graphs, log)


def velocity_diameter(v: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Largest per-coordinate spread of ``v[..., members, :]``; works on stacked time."""
    sub = v[..., members, :]
    return (sub.max(axis=-2) - sub.min(axis=-2)).max(axis=-1)


def fit_exponential(series: np.ndarray, floor: float = 1e-13) -> tuple[float, float]:
    """Fit ``series[t] ~ C exp(rate t)`` by least squares on the log of values above ``floor``.

    A series that reaches the floor after at most one sample collapsed in
    finite time; its rate is ``-inf``.
    """
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        return float("nan"), float("nan")
    t = np.flatnonzero(series > floor)
    if len(t) < 2:
        return float("-inf"), float(series[0])
    slope, icept = np.polyfit(t, np.log(series[t]), 1)
    return float(slope), float(np.exp(icept))


@dataclass
class Stabilization:
    t_stable: int
    flocks: list[np.ndarray]
    limit_velocities: np.ndarray
    diameters: np.ndarray
    quiet: bool
    certified: bool

    @property
    def stabilized(self) -> bool:
        return self.quiet and self.certified

    @property
    def status(self) -> str:
        return "stabilized" if self.stabilized else "not stabilized within budget"

    def decay_rates(self) -> list[float]:
        """Fitted exponential rate of each multi-bird flock's velocity diameter."""
        return [fit_exponential(self.diameters[:, k])[0]
                for k, f in enumerate(self.flocks) if len(f) > 1]


def detect_stabilization(run: FlockRun, quiet: int | None = None,
                         align_tol: float = 1e-8) -> Stabilization:
    """Locate the last switch and summarize the flocks that follow it.

    The run counts as stabilized when at least ``quiet`` switch-free steps
    follow the last switch and a linear extrapolation of the final state,
    with every flock moving at its limit velocity, admits no new link.
    """
    T = run.T
    quiet = max(10, T // 4) if quiet is None else quiet
    t_s = run.switches.times[-1] if run.switches.times else 0
    g = run.graphs[T]
    flocks = g.components
    q = run.config.q
    limits = np.array([q_mean(run.v[t_s, f], q[f]) for f in flocks])
    diam = np.column_stack([velocity_diameter(run.v[t_s:], f) for f in flocks])
    certified = _no_future_links(run, flocks, limits, diam[-1], align_tol)
    return Stabilization(t_s, flocks, limits, diam, T - t_s >= quiet, certified)


def _no_future_links(run: FlockRun, flocks, limits, final_diam, align_tol) -> bool:
    cfg = run.config
    if any(len(f) > 1 and d > align_tol for f, d in zip(flocks, final_diam)):
        return False
    label = np.empty(cfg.n, dtype=int)
    for k, f in enumerate(flocks):
        label[f] = k
    x = run.x[-1]
    vbar = limits[label]
    adj = run.graphs[-1].adjacency.toarray() > 0
    for i in range(cfg.n):
        for j in range(i + 1, cfg.n):
            dx, dv = x[i] - x[j], vbar[i] - vbar[j]
            if adj[i, j]:
                if np.linalg.norm(dx) > cfg.r:
                    return False
                continue
            if np.linalg.norm(dv) <= cfg.eps_o:
                continue
            tau = max(0.0, -float(dx @ dv) / float(dv @ dv))
            if np.linalg.norm(dx + tau * dv) <= cfg.r:
                return False
    return True


@dataclass
class FlightLine:
    beta: np.ndarray
    gamma: np.ndarray
    times: np.ndarray
    residual: np.ndarray


def fit_flight_line(run: FlockRun, start: int = 0, stop: int | None = None,
                    fit_fraction: float = 0.5) -> FlightLine:
    """Fit ``x_i(t) = beta_i t + gamma_i`` on a switch-free suffix.

    The line is fitted on the last ``fit_fraction`` of ``[start, stop]`` and
    the sup-norm residual is returned over the whole window.
    """
    stop = run.T if stop is None else stop
    if stop - start + 1 < 4:
        raise ValueError("suffix must contain at least 4 steps")
    times = np.arange(start, stop + 1)
    k0 = start + int((1 - fit_fraction) * (stop - start))
    tf = np.arange(k0, stop + 1)
    Y = run.x[k0:stop + 1].reshape(len(tf), -1)
    A = np.column_stack([tf - tf[0], np.ones(len(tf))])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    beta = coef[0].reshape(run.config.n, 3)
    gamma = (coef[1] - coef[0] * tf[0]).reshape(run.config.n, 3)
    pred = times[:, None, None] * beta + gamma
    resid = np.abs(run.x[start:stop + 1] - pred).max(axis=(1, 2))
    return FlightLine(beta, gamma, times, resid)


def block_length_at(values: np.ndarray, graph: WeightedGraph, bird: int) -> float:
    """Length of the block holding ``bird``'s edges; 0 for an isolated bird."""
    nbrs = graph.neighbors(bird)
    if len(nbrs) == 0:
        return 0.0
    lo, hi = block_intervals(values, graph.edges)
    edge_lo = min(values[bird], values[nbrs[0]])
    k = int(np.searchsorted(lo, edge_lo, side="right")) - 1
    return float(hi[k] - lo[k])


@dataclass
class TraceResult:
    t: int
    wbar: np.ndarray
    path: np.ndarray
    R: list[int]
    u: float
    delta: float
    l_final: int
    sbp_lhs: float
    sbp_rhs: float
    start_gap: float
    chain_bound: float

    @property
    def sbp_residual(self) -> float:
        return abs(self.sbp_lhs - self.sbp_rhs)

    def monotone_on_R(self, tol: float = 1e-12) -> bool:
        return all(self.wbar[k + 1] >= self.wbar[k] - tol for k in self.R)


def backward_trace(run: FlockRun, alpha: float, t: int | None = None,
                   bird: int = 0, axis: int = 0) -> TraceResult:
    """Trace a bird's flock backwards along one velocity coordinate.

    Walking ``k = t-1 .. 1``, whenever the block holding the current bird is
    longer than ``alpha`` the focus moves to the slowest member of its closed
    neighbourhood in ``G_k`` (lowest index on ties). ``wbar[k]`` is the
    velocity of the bird in focus at time ``k``; index 0 is unused.
    """
    t = run.T if t is None else t
    if t < 1 or t > run.T:
        raise ValueError(f"trace time {t} outside recorded history 1..{run.T}")
    if not 0 < alpha <= run.config.eps_o:
        raise ValueError("alpha must lie in (0, eps_o]")
    w = run.v[:, :, axis]
    y = run.x[:, :, axis]
    wbar = np.full(t + 1, np.nan)
    path = np.full(t + 1, -1, dtype=int)
    l = bird
    wbar[t], path[t] = w[t, l], l
    R = []
    for k in range(t - 1, 0, -1):
        g = run.graphs[k]
        if block_length_at(w[k], g, l) > alpha:
            R.append(k)
            closed = np.sort(np.r_[l, g.neighbors(l)])
            l = int(closed[np.argmin(w[k, closed])])
        wbar[k], path[k] = w[k, l], l
    u = (y[t, bird] - y[0, bird]) / t
    ks = np.arange(1, t)
    lhs = float(wbar[1:].sum())
    rhs = float(t * wbar[t] - np.sum(ks * (wbar[2:] - wbar[1:-1])))
    l_final = int(path[1]) if t > 1 else bird
    return TraceResult(
        t=t, wbar=wbar, path=path, R=sorted(R), u=float(u),
        delta=float(u - w[t, bird]), l_final=l_final,
        sbp_lhs=lhs, sbp_rhs=rhs,
        start_gap=float(y[0, l_final] - y[0, bird]),
        chain_bound=float(t * u - lhs - run.config.r * len(R)),
    )


@dataclass
class SwitchStats:
    n_switches: int
    n_R: int
    n_alpha: int
    intervals: list[tuple[int, int, int, int]]
    creations_ok: bool

    @property
    def intervals_ok(self) -> bool:
        return all(r <= nk for _, _, r, nk in self.intervals)


def _exceeds(v_t: np.ndarray, graph: WeightedGraph, alpha: float) -> bool:
    for c in range(v_t.shape[1]):
        lo, hi = block_intervals(v_t[:, c], graph.edges)
        if len(lo) and (hi - lo).max() > alpha:
            return True
    return False


def count_switch_stats(run: FlockRun, alpha: float) -> SwitchStats:
    """Switch count, test-passing times and block-exceedance counts of a run.

    ``intervals`` lists ``(start, end, |R in I|, N_I)`` for each maximal
    switch-free interval ``I = [start, end)``, where ``N_I`` counts the times
    in ``I`` at which some velocity block exceeds ``alpha``.
    """
    T = run.T
    exceed = np.array([_exceeds(run.v[t], run.graphs[t], alpha) for t in range(T)], dtype=bool)
    trace = backward_trace(run, alpha) if T >= 1 else None
    R = set(trace.R) if trace else set()
    bounds = sorted({0, T, *(s for s in run.switches.times if s < T)})
    intervals = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b > a:
            intervals.append((a, b, sum(1 for k in R if a <= k < b), int(exceed[a:b].sum())))
    thr = run.config.eps_o / np.sqrt(3)
    ok = True
    for t, edges in run.switches.created.items():
        g = run.graphs[t]
        for i, j in edges:
            longest = 0.0
            for c in range(3):
                vals = run.v[t, :, c]
                lo, hi = block_intervals(vals, g.edges)
                k = int(np.searchsorted(lo, min(vals[i], vals[j]), side="right")) - 1
                longest = max(longest, hi[k] - lo[k])
            ok &= bool(longest >= thr)
    return SwitchStats(len(run.switches), len(R), int(exceed.sum()), intervals, ok)


def line_of_sight_gap(run: FlockRun, i: int, t: int) -> float:
    """``|v_i(t) - (x_i(t) - x_i(0)) / t|``."""
    if t <= 1:
        raise ValueError("t must exceed 1")
    u = (run.x[t, i] - run.x[0, i]) / t
    return float(np.linalg.norm(run.v[t, i] - u))


def sight_pair_gap(run: FlockRun, i: int, j: int, t: int) -> tuple[float, float, float]:
    """Return ``(|u_i - u_j|, triangle bound, (1 + r)/t)`` at time ``t``.

    The triangle bound is ``(|x_i(t)-x_j(t)| + |x_i(0)-x_j(0)|)/t``; it falls
    under ``(1 + r)/t`` when the pair is within ``r`` now and within 1 at start.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x = run.x
    ui = (x[t, i] - x[0, i]) / t
    uj = (x[t, j] - x[0, j]) / t
    tri = (np.linalg.norm(x[t, i] - x[t, j]) + np.linalg.norm(x[0, i] - x[0, j])) / t
    return float(np.linalg.norm(ui - uj)), float(tri), (1 + run.config.r) / t
