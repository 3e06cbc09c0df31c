"""Reversible averaging systems: matrices, orbits, blocks and s-energy.

A reversible system is ``P = Q^{-1} M`` with ``Q = diag(q)``, ``q_i = 1/a_i``,
``M_ij = 1`` on edges and ``M_ii = 1/a_i - deg_i``. Each row of ``P`` puts
weight ``a_i`` on every neighbour and the rest on the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graphs import WeightedGraph, cumulative_drop_times

BLOCK_MERGE_TOL = 1e-12
DENSE_LIMIT = 64


@dataclass(frozen=True, eq=False)
class ReversibleSystem:
    graph: WeightedGraph
    a: np.ndarray
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def q(self) -> np.ndarray:
        return 1.0 / self.a

    @property
    def rho(self) -> float:
        return float(self.a.min())

    def symmetric_part(self) -> sp.csr_matrix:
        """``M = Q P``; symmetric with unit off-diagonal entries."""
        return sp.diags(self.q) @ self.matrix

    def to_dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise ValueError(f"dense form is only built for n <= {DENSE_LIMIT}")
        return self.matrix.toarray()

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"state has {x.shape[0]} agents, system has {self.n}")
        return self.matrix @ x

    def check(self, tol: float = 1e-12) -> None:
        """Raise AssertionError if a structural invariant fails."""
        P = self.matrix
        rows = np.asarray(P.sum(axis=1)).ravel()
        assert np.all(np.abs(rows - 1.0) <= tol), "rows do not sum to 1"
        assert P.min() >= -tol, "negative entry"
        flux = sp.diags(self.q) @ P
        assert abs(flux - flux.T).max() <= tol if flux.nnz else True, "detailed balance"
        M = self.symmetric_part().tocoo()
        off = M.row != M.col
        assert np.all(M.data[off] >= 1 - tol), "off-diagonal M entry below 1"
        assert np.all(M.diagonal() >= 1 - tol), "diagonal of M below 1"
        assert np.all(self.q <= 1 / self.rho + tol)


def build_system(graph: WeightedGraph, a) -> ReversibleSystem:
    """Build the reversible matrix of ``graph`` with influence weights ``a``.

    ``a`` may be a scalar or per-agent array; each entry must lie in
    ``(0, 1/(deg_i + 1)]``.
    """
    n = graph.n
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,)).copy()
    deg = graph.degrees
    limit = 1.0 / (deg + 1)
    bad = (a <= 0) | (a > limit * (1 + 1e-12))
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"weight a[{i}]={a[i]!r} outside (0, 1/(deg+1)] = (0, {limit[i]!r}]")
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    diag = np.arange(n)
    rows = np.r_[i, j, diag]
    cols = np.r_[j, i, diag]
    vals = np.r_[a[i], a[j], 1.0 - a * deg]
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    a.setflags(write=False)
    return ReversibleSystem(graph, a, P)


@dataclass(frozen=True)
class EmbeddedState:
    """Agent values along one axis (or several stacked columns) with weights ``q``."""

    values: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if self.values.shape[0] != self.q.shape[0]:
            raise ValueError("values and q disagree on agent count")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def q_norm2(self) -> float:
        return q_norm2(self.values, self.q)

    def q_mean(self):
        return q_mean(self.values, self.q)

    def variance(self) -> float:
        return q_norm2(self.values - self.q_mean(), self.q)


def q_norm2(x: np.ndarray, q: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(np.dot(q, x * x))
    return float(np.einsum("i,ij,ij->", q, x, x))


def q_mean(x: np.ndarray, q: np.ndarray):
    x = np.asarray(x, dtype=float)
    return np.tensordot(q, x, axes=(0, 0)) / q.sum()


def step(state: EmbeddedState, sys: ReversibleSystem) -> EmbeddedState:
    if state.n != sys.n:
        raise ValueError(f"dimension mismatch: state {state.n}, system {sys.n}")
    return EmbeddedState(sys.apply(state.values), state.q)


@dataclass(frozen=True)
class Block:
    lo: float
    hi: float

    @property
    def length(self) -> float:
        return self.hi - self.lo


def block_intervals(values: np.ndarray, edges: np.ndarray,
                    tol: float = BLOCK_MERGE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Sorted ``(lo, hi)`` arrays of the maximal intervals covered by embedded edges."""
    if len(edges) == 0:
        return np.zeros(0), np.zeros(0)
    xi, xj = values[edges[:, 0]], values[edges[:, 1]]
    lo, hi = np.minimum(xi, xj), np.maximum(xi, xj)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    starts = np.flatnonzero(np.concatenate(([True], lo[1:] > reach[:-1] + tol)))
    return lo[starts], np.maximum.reduceat(hi, starts)


def block_lengths(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    lo, hi = block_intervals(values, edges)
    return hi - lo


def compute_blocks(state: EmbeddedState | np.ndarray, graph: WeightedGraph) -> list[Block]:
    values = state.values if isinstance(state, EmbeddedState) else np.asarray(state, dtype=float)
    lo, hi = block_intervals(values, graph.edges)
    return [Block(float(a), float(b)) for a, b in zip(lo, hi)]


def dirichlet_form(state: EmbeddedState | np.ndarray, graph: WeightedGraph) -> float:
    """Sum over agents of the largest squared gap to a neighbour."""
    x = state.values if isinstance(state, EmbeddedState) else np.asarray(state, dtype=float)
    if graph.n_edges == 0:
        return 0.0
    i, j = graph.edges[:, 0], graph.edges[:, 1]
    gap2 = (x[i] - x[j]) ** 2
    best = np.zeros(graph.n)
    np.maximum.at(best, i, gap2)
    np.maximum.at(best, j, gap2)
    return float(best.sum())


def _check_s(s: float) -> None:
    if not 0 < s <= 1:
        raise ValueError(f"s must lie in (0, 1], got {s!r}")


@dataclass
class EnergyLedger:
    """Per-step block lengths with a running s-energy total.

    ``mode="sum"`` charges every block of a step; ``mode="max"`` charges only
    the longest, which is the variant used for pinned swarms.
    """

    s: float = 1.0
    mode: str = "sum"
    per_step: list[np.ndarray] = field(default_factory=list)
    total: float = 0.0

    def __post_init__(self) -> None:
        _check_s(self.s)
        if self.mode not in ("sum", "max"):
            raise ValueError(f"unknown ledger mode {self.mode!r}")

    def record(self, lengths) -> float:
        lengths = np.asarray(lengths, dtype=float)
        self.per_step.append(lengths)
        e = _step_energy(lengths, self.s, self.mode)
        self.total += e
        return e

    def recompute(self) -> float:
        return s_energy(self, self.s)

    def __len__(self) -> int:
        return len(self.per_step)


def _step_energy(lengths: np.ndarray, s: float, mode: str) -> float:
    if lengths.size == 0:
        return 0.0
    if mode == "max":
        return float(lengths.max() ** s)
    return float(np.sum(lengths ** s))


def s_energy(ledger: EnergyLedger, s: float) -> float:
    _check_s(s)
    return float(sum(_step_energy(l, s, ledger.mode) for l in ledger.per_step))


def _check_common(n, m, rho, s, c) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1 <= m <= n:
        raise ValueError("m must lie in [1, n]")
    if not 0 < rho <= 0.5:
        raise ValueError("rho must lie in (0, 1/2]")
    _check_s(s)
    if c <= 0:
        raise ValueError("c must be positive")


def theorem2_bound(n: int, m: int, rho: float, s: float, c: float = 1.0) -> float:
    """Upper bound ``(c n^2 / (rho s))^m`` on the s-energy of unit-variance systems."""
    _check_common(n, m, rho, s, c)
    return (c * n * n / (rho * s)) ** m


def u_recurrence(n: int, m: int, rho: float, s: float) -> float:
    """Iterate ``U(m) = 2 (U(m-1) + m) / (1 - alpha^{s/2})`` from ``U(0) = 0``.

    ``alpha = 1 - rho / (2 n^2)`` is the guaranteed shrink factor of the
    squared norm once the cumulative graph reconnects.
    """
    _check_common(n, m, rho, s, 1.0)
    alpha = 1.0 - rho / (2.0 * n * n)
    factor = 2.0 / -np.expm1(0.5 * s * np.log(alpha))
    u = 0.0
    for k in range(1, m + 1):
        u = factor * (u + k)
    return float(u)


def fit_bound_constant(energy: float, n: int, m: int, rho: float, s: float) -> float:
    """Smallest ``c`` with ``theorem2_bound(n, m, rho, s, c) >= energy``."""
    return float(energy ** (1.0 / m) * rho * s / (n * n))


@dataclass
class AgreementRun:
    """Orbit of a reversible system driven by a graph sequence."""

    graphs: list[WeightedGraph]
    a: np.ndarray
    states: np.ndarray
    ledger: EnergyLedger

    @property
    def q(self) -> np.ndarray:
        return 1.0 / self.a

    @property
    def rho(self) -> float:
        return float(self.a.min())

    def history(self) -> list[tuple[WeightedGraph, EmbeddedState]]:
        return [(g, EmbeddedState(self.states[t], self.q)) for t, g in enumerate(self.graphs)]

    def energy(self, s: float) -> float:
        return s_energy(self.ledger, s)


def run_agreement(graphs: Sequence[WeightedGraph], a, x0) -> AgreementRun:
    """Drive ``x0`` through ``P_t`` for each graph, recording blocks before each step."""
    x = np.asarray(x0, dtype=float)
    states = np.empty((len(graphs) + 1, x.shape[0]))
    states[0] = x
    ledger = EnergyLedger()
    a_arr = None
    for t, g in enumerate(graphs):
        sys = build_system(g, a)
        a_arr = sys.a
        ledger.record(block_lengths(x, g.edges))
        x = sys.apply(x)
        states[t + 1] = x
    if a_arr is None:
        a_arr = np.broadcast_to(np.asarray(a, dtype=float), x.shape[:1]).copy()
    return AgreementRun(list(graphs), a_arr, states, ledger)


def connection_time(graphs: Sequence[WeightedGraph]) -> tuple[int, bool]:
    """Return ``(t_c, connected)`` for the cumulative union of ``graphs``.

    ``t_c`` is the last ``t >= 1`` at which the cumulative union loses a
    component, or 1 when there is none. ``connected`` refers to
    ``G_{<= t_c}`` restricted to the supplied prefix.
    """
    drops, _ = cumulative_drop_times(graphs)
    later = [t for t in drops if t >= 1]
    t_c = max(later) if later else 1
    upto = min(t_c, len(graphs) - 1)
    _, uf = cumulative_drop_times(graphs[: upto + 1])
    return t_c, uf.count == 1


@dataclass(frozen=True)
class CoverLengthReport:
    t_c: int
    applicable: bool
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool | None:
        return self.lhs >= self.rhs - 1e-12 if self.applicable else None

    @property
    def status(self) -> str:
        if not self.applicable:
            return "not applicable"
        return "holds" if self.holds else "violated"


def check_cover_length(history: Sequence[tuple[WeightedGraph, EmbeddedState]],
                       rho: float | None = None) -> CoverLengthReport:
    """Compare ``sum_{t<=t_c} D_t`` with ``rho n^-2`` times the initial variance."""
    if not history:
        raise ValueError("empty history")
    graphs = [g for g, _ in history]
    t_c, connected = connection_time(graphs)
    x0 = history[0][1]
    n = x0.n
    rho = float(1.0 / x0.q.max()) if rho is None else rho
    lhs = sum(dirichlet_form(st, g) for g, st in history[: t_c + 1])
    rhs = rho / n**2 * x0.variance()
    return CoverLengthReport(t_c, connected, float(lhs), float(rhs))


@dataclass(frozen=True)
class TelescopeReport:
    t_c: int
    applicable: bool
    norm_drop: float
    half_dirichlet: float
    variance_term: float

    @property
    def holds(self) -> bool | None:
        if not self.applicable:
            return None
        return (self.norm_drop >= self.half_dirichlet - 1e-9
                and self.half_dirichlet >= self.variance_term - 1e-9)


def check_telescope(run: AgreementRun) -> TelescopeReport:
    """Check ``|x|^2 - |x(t_c+1)|^2 >= D/2 summed >= rho/(2n^2) var`` on a run."""
    t_c, connected = connection_time(run.graphs)
    q = run.q
    n = len(q)
    applicable = connected and t_c + 1 < len(run.states)
    if not applicable:
        return TelescopeReport(t_c, False, np.nan, np.nan, np.nan)
    x = run.states
    drop = q_norm2(x[0], q) - q_norm2(x[t_c + 1], q)
    half = 0.5 * sum(dirichlet_form(x[t], run.graphs[t]) for t in range(t_c + 1))
    var = q_norm2(x[0] - q_mean(x[0], q), q)
    return TelescopeReport(t_c, True, float(drop), float(half), float(run.rho / (2 * n * n) * var))
