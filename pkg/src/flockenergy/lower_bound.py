"""Adversarial reversible systems with large s-energy.

Two constructions: the static path ``P = I - rho L`` started from
``(1, 0, ..., 0)``, whose diameter has a closed spectral form, and a
recursive schedule over ``m`` clusters that keeps at most ``m`` components
while spending energy at every scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EnergyLedger, block_lengths, build_system, s_energy
from .graphs import WeightedGraph

TAIL_DIAMETER = 1e-13


@dataclass(frozen=True)
class PathSpectralModel:
    n: int
    rho: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("path model needs n >= 2")
        if not 0 < self.rho < 0.25:
            raise ValueError("rho must lie in (0, 1/4) for P to be positive semidefinite")

    @property
    def eigenvalues(self) -> np.ndarray:
        k = np.arange(self.n)
        return 1.0 - 2.0 * self.rho * (1.0 - np.cos(k * np.pi / self.n))

    @property
    def eigenvectors(self) -> np.ndarray:
        """Column ``k`` holds ``cos((i - 1/2) k pi / n)`` for ``i = 1..n``."""
        i = np.arange(self.n)[:, None] + 0.5
        k = np.arange(self.n)[None, :]
        return np.cos(i * k * np.pi / self.n)

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues[1])

    def system(self):
        return build_system(WeightedGraph.path(self.n), self.rho)

    def coefficients(self) -> np.ndarray:
        """``v_k(1) (v_k(1) - v_k(n)) / |v_k|^2`` for each mode."""
        V = self.eigenvectors
        norms = (V * V).sum(axis=0)
        return V[0] * (V[0] - V[-1]) / norms


def path_diameter(model: PathSpectralModel, t) -> np.ndarray | float:
    """Diameter at time ``t >= 1`` from the spectral sum (``t = 1`` is the start)."""
    t_arr = np.atleast_1d(np.asarray(t))
    if np.any(t_arr < 1):
        raise ValueError("t must be >= 1")
    lam = model.eigenvalues
    coef = model.coefficients()
    out = np.empty(t_arr.shape, dtype=float)
    for lo in range(0, len(t_arr), 4096):
        tt = t_arr[lo:lo + 4096, None] - 1
        out[lo:lo + 4096] = (lam[None, :] ** tt * coef[None, :]).sum(axis=1)
    return float(out[0]) if np.ndim(t) == 0 else out


def path_diameter_bound(model: PathSpectralModel, t) -> np.ndarray:
    return 2.0 / model.n * model.lambda1 ** (np.asarray(t) - 1.0)


def path_energy_bound(model: PathSpectralModel, s: float) -> float:
    """``(2/n)^s / (1 - lambda_1^s)``."""
    return (2.0 / model.n) ** s / (1.0 - model.lambda1 ** s)


def _horizon(model: PathSpectralModel) -> int:
    return int(np.ceil(np.log(TAIL_DIAMETER) / np.log(model.lambda1))) + 2


def path_s_energy(model: PathSpectralModel, s: float, horizon: int | None = None) -> float:
    """Spectral ``sum_t Delta_t^s`` plus a geometric estimate of the tail past ``horizon``."""
    horizon = _horizon(model) if horizon is None else horizon
    d = path_diameter(model, np.arange(1, horizon + 1))
    d = np.maximum(d, 0.0)
    lam_s = model.lambda1 ** s
    return float(np.sum(d ** s) + d[-1] ** s * lam_s / (1.0 - lam_s))


def simulate_path(model: PathSpectralModel, horizon: int | None = None,
                  stop_below: float | None = TAIL_DIAMETER) -> np.ndarray:
    """Run the path system from ``(1, 0, ..., 0)`` and return the block length per step.

    Stops early once the diameter falls below ``stop_below`` (if given).
    """
    horizon = _horizon(model) if horizon is None else horizon
    sys = model.system()
    edges = sys.graph.edges
    x = np.zeros(model.n)
    x[0] = 1.0
    out = np.empty(horizon)
    for t in range(horizon):
        lengths = block_lengths(x, edges)
        out[t] = lengths.sum()
        if stop_below is not None and out[t] < stop_below:
            return out[: t + 1]
        x = sys.apply(x)
    return out


def measured_path_energy(model: PathSpectralModel, s: float, lengths: np.ndarray | None = None) -> float:
    """s-energy of the simulated path orbit with the same geometric tail estimate.

    ``lengths`` reuses a ``simulate_path`` output when several exponents are wanted.
    """
    d = simulate_path(model) if lengths is None else lengths
    lam_s = model.lambda1 ** s
    return float(np.sum(d ** s) + d[-1] ** s * lam_s / (1.0 - lam_s))


def theorem3_bound(n: int, m: int, rho: float, s: float, c: float = 1.0) -> float:
    """``(c / (s rho^{1-s}))^m (n/m)^{(1-s) m + 1}``."""
    if n < 1 or not 1 <= m <= n:
        raise ValueError("need n >= 1 and 1 <= m <= n")
    if not 0 < rho <= 0.5:
        raise ValueError("rho must lie in (0, 1/2]")
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    if c <= 0:
        raise ValueError("c must be positive")
    return (c / (s * rho ** (1 - s))) ** m * (n / m) ** ((1 - s) * m + 1)


def fit_theorem3_constant(energy: float, n: int, m: int, rho: float, s: float) -> float:
    """Largest ``c`` with ``theorem3_bound(n, m, rho, s, c) <= energy``."""
    return float((energy / (n / m) ** ((1 - s) * m + 1)) ** (1.0 / m) * s * rho ** (1 - s))


def unit_variance_scale(n: int, rho: float, s: float) -> float:
    """Factor ``(rho/n)^{s/2}`` taking a unit-diameter bound to unit variance."""
    return (rho / n) ** (s / 2)


@dataclass(frozen=True)
class Phase:
    """One phase of a round.

    ``kind`` is ``"link"`` or ``"contract"`` (repeat ``graph`` for ``steps``
    steps, then snap each cluster in ``snap`` to its mean) or ``"recurse"``
    (run ``sub`` on the vertices from ``offset`` on, keeping ``graph`` as a
    static frame).
    """

    kind: str
    graph: WeightedGraph
    steps: int = 1
    snap: tuple[tuple[int, int], ...] = ()
    sub: "RecursiveSchedule | None" = None
    offset: int = 0


@dataclass(frozen=True)
class RecursiveSchedule:
    """One round of the m-cluster construction at unit scale.

    A round starts with cluster ``C_1`` at 0 and every other vertex at 1 and
    ends with ``C_1`` at ``rho/nu`` and the rest at ``1 - rho/(n - nu)``, so
    the next round is the same round shrunk by ``shrink``.
    """

    n: int
    m: int
    rho: float
    s: float
    rel_cutoff: float
    phases: tuple[Phase, ...] = field(repr=False)

    @property
    def nu(self) -> int:
        return self.n // self.m

    @property
    def shrink(self) -> float:
        return 1.0 - self.rho / self.nu - self.rho / (self.n - self.nu)

    def initial_state(self) -> np.ndarray:
        x = np.ones(self.n)
        x[: self.nu] = 0.0
        return x

    def to_config(self) -> dict[str, object]:
        return {"mode": "lower-bound", "n": self.n, "m": self.m, "rho": self.rho,
                "s_values": [self.s], "rel_cutoff": self.rel_cutoff}


def _cluster_paths(nu: int, clusters: range, total: int) -> np.ndarray:
    edges = [WeightedGraph.path(nu, c * nu, total).edges for c in clusters]
    return np.vstack(edges) if edges else np.zeros((0, 2), dtype=np.int64)


def contraction_steps(nu: int, rho: float, rel_cutoff: float) -> int:
    """Steps for a ``nu``-path started from one displaced end to shrink below ``rel_cutoff``."""
    if nu == 1:
        return 0
    d = simulate_path(PathSpectralModel(nu, rho), horizon=10**7, stop_below=rel_cutoff)
    return len(d) - 1


def build_recursive_schedule(n: int, m: int, rho: float, s: float = 1.0,
                             rel_cutoff: float = 1e-10) -> RecursiveSchedule:
    """Build one round of the construction on ``n = m nu`` vertices.

    Phase ``link`` joins ``C_1`` and ``C_2`` through the edge ``(nu, nu+1)``
    for a single step; ``contract`` runs every cluster path until ``C_1`` and
    ``C_2`` have shrunk below ``rel_cutoff`` of their starting spread and then
    snaps them to their means; ``recurse`` (``m >= 3``) runs the construction
    for ``m - 1`` clusters on ``C_2 .. C_m`` while ``C_1`` waits.
    """
    if m < 2:
        raise ValueError("recursive schedule needs m >= 2")
    if n % m:
        raise ValueError(f"n/m must be an integer, got n={n}, m={m}")
    if not 0 < rho < 0.25:
        raise ValueError("rho must lie in (0, 1/4)")
    if not 0 < s <= 1:
        raise ValueError("s must lie in (0, 1]")
    nu = n // m
    paths = _cluster_paths(nu, range(m), n)
    bridge = np.array([[nu - 1, nu]])
    link = WeightedGraph(n, np.vstack([paths, bridge]))
    contract = WeightedGraph(n, paths)
    k = contraction_steps(nu, rho, rel_cutoff)
    phases = [
        Phase("link", link, 1),
        Phase("contract", contract, k, snap=((0, nu), (nu, 2 * nu))),
    ]
    if m >= 3:
        sub = build_recursive_schedule(n - nu, m - 1, rho, s, rel_cutoff)
        frame = WeightedGraph(n, _cluster_paths(nu, range(1), n))
        phases.append(Phase("recurse", frame, sub=sub, offset=nu))
    return RecursiveSchedule(n, m, rho, s, rel_cutoff, tuple(phases))


@dataclass
class ScheduleReplay:
    """Literal execution record of a schedule."""

    ledger: EnergyLedger
    final: np.ndarray
    max_components: int
    phase1_energy: float
    center_drift: float
    steps: int

    def energy(self, s: float) -> float:
        return s_energy(self.ledger, s)


def _shift(graph: WeightedGraph, off: int) -> np.ndarray:
    return graph.edges + off


def replay_schedule(schedule: RecursiveSchedule, rounds: int = 1, x0: np.ndarray | None = None,
                    gap_cutoff: float = 0.0) -> ScheduleReplay:
    """Execute ``rounds`` rounds literally (sub-schedules get the same round count).

    Every averaging step goes through the reversible-system builder with the
    uniform weight ``rho``; blocks are charged to one ledger. A sub-system is
    snapped to its mean once its rounds are exhausted or its spread falls
    below ``gap_cutoff`` times the starting spread.
    """
    n = schedule.n
    x = schedule.initial_state() if x0 is None else np.array(x0, dtype=float)
    ledger = EnergyLedger()
    stats = {"max_comp": 0, "drift": 0.0, "steps": 0, "phase1": None}
    cache: dict = {}

    def averaging(edges: np.ndarray, steps: int, members: np.ndarray) -> None:
        key = edges.tobytes()
        if key not in cache:
            g = WeightedGraph(n, edges)
            sys = build_system(g, schedule.rho)
            cache[key] = (g, sys)
        g, sys = cache[key]
        stats["max_comp"] = max(stats["max_comp"], g.n_components)
        nonlocal x
        before = x[members].mean()
        for _ in range(steps):
            e = ledger.record(block_lengths(x, g.edges))
            if stats["phase1"] is None:
                stats["phase1"] = e
            x = sys.apply(x)
            stats["steps"] += 1
        stats["drift"] = max(stats["drift"], abs(x[members].mean() - before))

    def run(sched: RecursiveSchedule, off: int, frame: np.ndarray) -> None:
        members = np.arange(off, off + sched.n)
        start = np.ptp(x[members])
        for _ in range(rounds):
            if np.ptp(x[members]) <= gap_cutoff * start:
                break
            for ph in sched.phases:
                if ph.kind == "recurse":
                    run(ph.sub, off + ph.offset, np.vstack([frame, _shift(ph.graph, off)]))
                    sub = np.arange(off + ph.offset, off + sched.n)
                    x[sub] = x[sub].mean()
                    continue
                averaging(np.vstack([frame, _shift(ph.graph, off)]), ph.steps, members)
                for a, b in ph.snap:
                    x[off + a:off + b] = x[off + a:off + b].mean()
        x[members] = x[members].mean()

    run(schedule, 0, np.zeros((0, 2), dtype=np.int64))
    return ScheduleReplay(ledger, x, stats["max_comp"], stats["phase1"] or 0.0,
                          stats["drift"], stats["steps"])


@dataclass(frozen=True)
class ScheduleEnergy:
    total: float
    round_energy: float
    phase1: float
    phase2: float
    phase3: float


def schedule_energy(schedule: RecursiveSchedule, s: float | None = None) -> ScheduleEnergy:
    """s-energy of the full (infinitely repeated) construction.

    Phases ``link`` and ``contract`` of one unit-scale round are replayed
    through the simulator; the ``recurse`` phase contributes the sub-system
    energy scaled by ``(rho/nu)^s``; rounds shrink geometrically by
    ``schedule.shrink`` so their energies form a geometric series.
    """
    s = schedule.s if s is None else s
    flat = RecursiveSchedule(schedule.n, schedule.m, schedule.rho, s, schedule.rel_cutoff,
                             tuple(p for p in schedule.phases if p.kind != "recurse"))
    rep = replay_schedule(flat, rounds=1)
    phase1 = rep.phase1_energy ** s if rep.phase1_energy else 0.0
    flat_energy = rep.energy(s)
    phase3 = 0.0
    for ph in schedule.phases:
        if ph.kind == "recurse":
            phase3 = (schedule.rho / schedule.nu) ** s * schedule_energy(ph.sub, s).total
    round_energy = flat_energy + phase3
    total = round_energy / (1.0 - schedule.shrink ** s)
    return ScheduleEnergy(total, round_energy, phase1, flat_energy - phase1, phase3)
