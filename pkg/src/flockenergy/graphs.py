"""Undirected loopless graphs over ``n`` agents and incremental connectivity."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size.

    Tracks the number of sets so cumulative-union connectivity can be
    replayed one edge at a time.
    """

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        """Merge the sets of ``i`` and ``j``; return True if they were distinct."""
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        if self.size[ri] < self.size[rj]:
            ri, rj = rj, ri
        self.parent[rj] = ri
        self.size[ri] += self.size[rj]
        self.count -= 1
        return True

    def labels(self) -> np.ndarray:
        roots = [self.find(i) for i in range(len(self.parent))]
        _, lab = np.unique(roots, return_inverse=True)
        return lab


def _normalize_edges(n: int, edges) -> np.ndarray:
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if np.any(arr[:, 0] == arr[:, 1]):
        raise ValueError("self-loops are not allowed")
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError(f"edge endpoint outside [0, {n})")
    arr = np.sort(arr, axis=1)
    return np.unique(arr, axis=0)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Symmetric loopless graph on ``n`` vertices.

    ``edges`` is an ``(E, 2)`` integer array with ``i < j`` rows, sorted and
    unique. Components are computed lazily and cached.
    """

    n: int
    edges: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", _normalize_edges(self.n, self.edges))
        self.edges.setflags(write=False)

    @classmethod
    def empty(cls, n: int) -> "WeightedGraph":
        return cls(n, np.zeros((0, 2), dtype=np.int64))

    @classmethod
    def path(cls, n: int, offset: int = 0, total: int | None = None) -> "WeightedGraph":
        total = n + offset if total is None else total
        i = np.arange(offset, offset + n - 1)
        return cls(total, np.column_stack([i, i + 1]))

    @classmethod
    def grid(cls, rows: int, cols: int) -> "WeightedGraph":
        """Grid graph; vertex ``(r, c)`` has index ``r * cols + c``."""
        idx = np.arange(rows * cols).reshape(rows, cols)
        horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
        vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
        return cls(rows * cols, np.vstack([horiz, vert]))

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> "WeightedGraph":
        i, j = np.nonzero(np.triu(adj, 1))
        return cls(adj.shape[0], np.column_stack([i, j]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges.tobytes()))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.bincount(self.edges.ravel(), minlength=self.n)
        deg.setflags(write=False)
        return deg

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        i, j = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * len(i))
        return sp.csr_matrix((data, (np.r_[i, j], np.r_[j, i])), shape=(self.n, self.n))

    def neighbors(self, i: int) -> np.ndarray:
        adj = self.adjacency
        return adj.indices[adj.indptr[i]:adj.indptr[i + 1]]

    @cached_property
    def component_labels(self) -> np.ndarray:
        _, labels = connected_components(self.adjacency, directed=False)
        return labels

    @property
    def n_components(self) -> int:
        return int(self.component_labels.max()) + 1 if self.n else 0

    @property
    def components(self) -> list[np.ndarray]:
        lab = self.component_labels
        return [np.flatnonzero(lab == c) for c in range(self.n_components)]

    def union(self, other: "WeightedGraph") -> "WeightedGraph":
        return WeightedGraph(self.n, np.vstack([self.edges, other.edges]))

    def subgraph_mask(self, keep: np.ndarray) -> "WeightedGraph":
        return WeightedGraph(self.n, self.edges[np.asarray(keep, dtype=bool)])


def union_find_components(graph: WeightedGraph) -> int:
    """Component count via union-find; independent of the cached scipy route."""
    uf = UnionFind(graph.n)
    for i, j in graph.edges:
        uf.union(int(i), int(j))
    return uf.count


def cumulative_drop_times(graphs: Iterable[WeightedGraph]) -> tuple[list[int], UnionFind]:
    """Times ``t`` at which adding ``G_t`` lowers the component count of ``G_{<=t-1}``.

    ``G_{<=-1}`` is the edgeless graph, so time 0 is reported whenever ``G_0``
    has an edge.
    """
    uf = None
    times = []
    for t, g in enumerate(graphs):
        if uf is None:
            uf = UnionFind(g.n)
        before = uf.count
        for i, j in g.edges:
            uf.union(int(i), int(j))
        if uf.count < before:
            times.append(t)
    if uf is None:
        raise ValueError("empty graph sequence")
    return times, uf


def random_component_graph(n: int, m: int, rng: np.random.Generator,
                           extra: float = 0.1) -> WeightedGraph:
    """Random graph with between 1 and ``m`` connected components.

    Vertices are split into ``k <= m`` random nonempty groups; each group gets
    a random spanning tree plus extra intra-group edges with probability
    ``extra``.
    """
    k = int(rng.integers(1, min(m, n) + 1))
    perm = rng.permutation(n)
    cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    edges = []
    for group in np.split(perm, cuts):
        for idx in range(1, len(group)):
            edges.append((group[idx], group[rng.integers(0, idx)]))
        if len(group) > 2 and extra > 0:
            gi, gj = np.triu_indices(len(group), 1)
            pick = rng.random(len(gi)) < extra
            edges.extend(zip(group[gi[pick]], group[gj[pick]]))
    return WeightedGraph(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
