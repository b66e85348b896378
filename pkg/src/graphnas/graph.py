"""Undirected simple graphs and the traversal / flow primitives built on them."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np
from numba import njit

from ._io import atomic_write_text

# Distinguished value for unreachable pairs in a distance matrix.
INF = np.inf


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    Edges are stored as a frozenset of ``(u, v)`` pairs with ``u < v``.
    Instances are immutable; every modifier returns a new graph.
    """

    n: int
    edges: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be positive, got {self.n}")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            norm.add((u, v) if u < v else (v, u))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable) -> "Graph":
        return cls(n, frozenset(tuple(e) for e in edges))

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        a = np.asarray(adj, dtype=bool)
        if a.shape[0] != a.shape[1] or not np.array_equal(a, a.T):
            raise ValueError("adjacency must be square and symmetric")
        iu, ju = np.nonzero(np.triu(a, 1))
        return cls(a.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        if self.edges:
            e = np.array(sorted(self.edges), dtype=np.int64)
            a[e[:, 0], e[:, 1]] = True
            a[e[:, 1], e[:, 0]] = True
        a.flags.writeable = False
        return a

    @cached_property
    def neighbors(self) -> tuple:
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in self.adjacency)

    @cached_property
    def _csr(self) -> tuple:
        deg = self.adjacency.sum(axis=1)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        indices = np.nonzero(self.adjacency)[1].astype(np.int64)
        return indptr, indices

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u, v])

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def with_changes(self, add=(), remove=()) -> "Graph":
        """Return a copy with ``remove`` edges deleted and ``add`` edges inserted."""
        es = set(self.edges)
        for u, v in remove:
            es.discard((min(u, v), max(u, v)))
        for u, v in add:
            es.add((min(u, v), max(u, v)))
        return Graph(self.n, frozenset(es))

    def subgraph(self, nodes) -> "Graph":
        """Induced subgraph, relabelled to ``0..len(nodes)-1`` in the given order."""
        nodes = list(nodes)
        sub = self.adjacency[np.ix_(nodes, nodes)]
        return Graph.from_adjacency(sub)


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset((u, v) for u in range(n) for v in range(u + 1, n)))


def cycle_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def star_graph(leaves: int) -> Graph:
    """Star with centre 0 and ``leaves`` leaf nodes."""
    return Graph(leaves + 1, frozenset((0, i) for i in range(1, leaves + 1)))


def degree_sequence(g: Graph) -> list[int]:
    return g.adjacency.sum(axis=1).astype(int).tolist()


@dataclass(frozen=True)
class DistanceMatrix:
    """Hop distances; unreachable pairs hold ``INF``."""

    d: np.ndarray

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def reachable(self) -> np.ndarray:
        return np.isfinite(self.d)

    def __getitem__(self, ij):
        return self.d[ij]


def _bfs_levels(adj: np.ndarray) -> np.ndarray:
    """All-sources level-synchronous BFS over a dense adjacency matrix."""
    n = adj.shape[0]
    a = adj.astype(np.float64)
    dist = np.full((n, n), INF)
    np.fill_diagonal(dist, 0.0)
    reached = np.eye(n, dtype=bool)
    frontier = reached.copy()
    level = 0
    while frontier.any():
        level += 1
        frontier = ((frontier.astype(np.float64) @ a) > 0) & ~reached
        reached |= frontier
        dist[frontier] = level
    return dist


def all_pairs_shortest_paths(g: Graph) -> DistanceMatrix:
    d = _bfs_levels(g.adjacency)
    d.flags.writeable = False
    return DistanceMatrix(d)


def is_connected(g: Graph) -> bool:
    seen = bytearray(g.n)
    seen[0] = 1
    queue = deque([0])
    count = 1
    nbrs = g.neighbors
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if not seen[v]:
                seen[v] = 1
                count += 1
                queue.append(v)
    return count == g.n


def bridges(g: Graph) -> set:
    """Edges whose removal disconnects their component (iterative Tarjan)."""
    n = g.n
    nbrs = g.neighbors
    disc = [-1] * n
    low = [0] * n
    out = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(nbrs[root]))]
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v in it:
                if v == parent:
                    continue
                if disc[v] == -1:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, u, iter(nbrs[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if advanced:
                continue
            stack.pop()
            if parent != -1:
                low[parent] = min(low[parent], low[u])
                if low[u] > disc[parent]:
                    out.add((min(u, parent), max(u, parent)))
    return out


# -- max-flow kernels -------------------------------------------------------
#
# Node splitting: node v becomes v_in (state 2v) and v_out (state 2v+1) joined
# by a unit arc; each undirected edge {u, v} gives unit arcs u_out->v_in and
# v_out->u_in. Flow from s_out to t_in counts internally node-disjoint paths,
# the direct s-t edge included.


@njit(cache=True)
def _vertex_disjoint_paths(indptr, indices, adj, s, t):
    n = indptr.shape[0] - 1
    flow = np.zeros((n, n), np.int8)
    through = np.zeros(n, np.int8)
    total = 0
    if adj[s, t]:
        flow[s, t] = 1
        total += 1
    # paths s-w-t through common neighbours are disjoint; seed them directly
    for k in range(indptr[s], indptr[s + 1]):
        w = indices[k]
        if w != t and adj[w, t]:
            flow[s, w] = 1
            through[w] = 1
            flow[w, t] = 1
            total += 1
    bound = min(indptr[s + 1] - indptr[s], indptr[t + 1] - indptr[t])
    # then greedy s-a-b-t paths over still-unused nodes
    for k in range(indptr[s], indptr[s + 1]):
        if total >= bound:
            break
        a = indices[k]
        if a == t or flow[s, a] == 1:
            continue
        for kk in range(indptr[a], indptr[a + 1]):
            b = indices[kk]
            if b != s and b != t and through[b] == 0 and adj[b, t]:
                flow[s, a] = 1
                through[a] = 1
                flow[a, b] = 1
                through[b] = 1
                flow[b, t] = 1
                total += 1
                break
    parent = np.empty(2 * n, np.int64)
    queue = np.empty(2 * n, np.int64)
    src = 2 * s + 1
    snk = 2 * t
    while total < bound:
        parent[:] = -1
        parent[src] = src
        parent[2 * s] = src
        parent[2 * t + 1] = src
        head = 0
        tail = 1
        queue[0] = src
        found = False
        while head < tail and not found:
            x = queue[head]
            head += 1
            v = x // 2
            if x % 2 == 1:
                for k in range(indptr[v], indptr[v + 1]):
                    w = indices[k]
                    y = 2 * w
                    if parent[y] == -1 and flow[v, w] == 0:
                        parent[y] = x
                        queue[tail] = y
                        tail += 1
                        if y == snk:
                            found = True
                            break
                if not found:
                    y = 2 * v
                    if parent[y] == -1 and through[v] == 1:
                        parent[y] = x
                        queue[tail] = y
                        tail += 1
            else:
                y = 2 * v + 1
                if parent[y] == -1 and through[v] == 0:
                    parent[y] = x
                    queue[tail] = y
                    tail += 1
                for k in range(indptr[v], indptr[v + 1]):
                    u = indices[k]
                    y = 2 * u + 1
                    if parent[y] == -1 and flow[u, v] == 1:
                        parent[y] = x
                        queue[tail] = y
                        tail += 1
        if not found:
            break
        y = snk
        while y != src:
            x = parent[y]
            xv = x // 2
            yv = y // 2
            if xv == yv:
                through[xv] = 1 if x % 2 == 0 else 0
            elif x % 2 == 1:
                flow[xv, yv] = 1
            else:
                flow[yv, xv] = 0
            y = x
        total += 1
    return total


@njit(cache=True)
def _edge_disjoint_paths(indptr, indices, s, t):
    n = indptr.shape[0] - 1
    net = np.zeros((n, n), np.int8)
    parent = np.empty(n, np.int64)
    queue = np.empty(n, np.int64)
    total = 0
    while True:
        parent[:] = -1
        parent[s] = s
        head = 0
        tail = 1
        queue[0] = s
        while head < tail and parent[t] == -1:
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if parent[v] == -1 and net[u, v] < 1:
                    parent[v] = u
                    queue[tail] = v
                    tail += 1
        if parent[t] == -1:
            break
        v = t
        while v != s:
            u = parent[v]
            net[u, v] += 1
            net[v, u] -= 1
            v = u
        total += 1
    return total


@njit(cache=True)
def _all_pairs_vertex_connectivity(indptr, indices, adj):
    n = indptr.shape[0] - 1
    out = np.zeros((n, n), np.int64)
    for s in range(n):
        for t in range(s + 1, n):
            k = _vertex_disjoint_paths(indptr, indices, adj, s, t)
            out[s, t] = k
            out[t, s] = k
    return out


def max_flow_vertex_connectivity(g: Graph, s: int, t: int) -> int:
    """Number of internally node-disjoint ``s``-``t`` paths (direct edge counts)."""
    if s == t:
        raise ValueError("s and t must differ")
    indptr, indices = g._csr
    return int(_vertex_disjoint_paths(indptr, indices, g.adjacency, s, t))


def max_flow_edge_connectivity(g: Graph, s: int, t: int) -> int:
    """Number of edge-disjoint ``s``-``t`` paths."""
    if s == t:
        raise ValueError("s and t must differ")
    indptr, indices = g._csr
    return int(_edge_disjoint_paths(indptr, indices, s, t))


def pairwise_vertex_connectivity(g: Graph) -> np.ndarray:
    """Symmetric matrix of local node connectivities (zero diagonal)."""
    indptr, indices = g._csr
    return _all_pairs_vertex_connectivity(indptr, indices, g.adjacency)


def edge_connectivity(g: Graph) -> int:
    """Global edge connectivity: min over t of lambda(0, t)."""
    if g.n < 2:
        return 0
    indptr, indices = g._csr
    return min(int(_edge_disjoint_paths(indptr, indices, 0, t)) for t in range(1, g.n))


# -- edge-list text format --------------------------------------------------


def format_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in g.sorted_edges())
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Graph:
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("edge list needs a 'n m' header")
    n, m = int(tokens[0]), int(tokens[1])
    body = tokens[2:]
    if len(body) != 2 * m:
        raise ValueError(f"header declares {m} edges, found {len(body) // 2}")
    edges = [(int(body[2 * i]), int(body[2 * i + 1])) for i in range(m)]
    g = Graph.from_edges(n, edges)
    if g.m != m:
        raise ValueError("duplicate edges in edge list")
    return g


def write_edge_list(g: Graph, path) -> None:
    atomic_write_text(path, format_edge_list(g))


def read_edge_list(path) -> Graph:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))
