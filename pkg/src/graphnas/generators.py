"""Graph generators and the WS-flex search-space sweep."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, derive_seed
from .graph import Graph, format_edge_list, is_connected, read_edge_list

KINDS = ("WS", "WS_FLEX", "ER", "BA", "HARARY", "COMPLETE")
MAX_ATTEMPTS = 100


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GeneratorSpec:
    """What to generate. ``params`` keys by kind:

    WS / WS_FLEX: ``k`` (average degree target), ``p`` (rewiring probability);
    ER: ``p``; BA: ``m`` (attachment count); HARARY: ``k`` (connectivity);
    COMPLETE: none.
    """

    kind: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind: unknown generator {self.kind!r}")
        if self.n < 2:
            raise ValueError(f"n: need at least 2 nodes, got {self.n}")
        p = self.params
        if self.kind in ("WS", "WS_FLEX"):
            k = p.get("k")
            if k is None or not (2 <= k <= self.n - 1):
                raise ValueError(f"k: average degree must lie in [2, {self.n - 1}], got {k}")
            if self.kind == "WS" and k != int(k):
                raise ValueError(f"k: WS needs an integer degree, got {k}")
        if self.kind in ("WS", "WS_FLEX", "ER"):
            if not (0.0 <= p.get("p", -1) <= 1.0):
                raise ValueError(f"p: probability must lie in [0, 1], got {p.get('p')}")
        if self.kind == "BA":
            m = p.get("m")
            if m is None or not (1 <= m < self.n):
                raise ValueError(f"m: attachment count must satisfy 1 <= m < n, got {m}")
        if self.kind == "HARARY":
            k = p.get("k")
            if k is None or not (1 <= k < self.n):
                raise ValueError(f"k: connectivity must satisfy 1 <= k < n, got {k}")


def _ring_lattice(n: int, k: float, flex: bool, rng) -> list:
    """Ring lattice with ``k // 2`` neighbours per side.

    With ``flex`` the total is topped up to ``round(k n / 2)`` edges: each extra
    edge joins a random minimum-degree node to its ring-nearest non-neighbour
    of lowest degree. A final repair pass moves edge ends from the fullest to
    the emptiest node, so degrees end within one of each other.
    """
    half = int(k // 2)
    edges = [(i, (i + j) % n) for j in range(1, half + 1) for i in range(n)]
    if not flex:
        return edges
    extra = int(math.floor(k * n / 2 + 0.5)) - len(edges)
    if extra <= 0:
        return edges
    adj = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        adj[u, v] = adj[v, u] = True
    deg = adj.sum(axis=1)
    idx = np.arange(n)
    for _ in range(extra):
        lows = np.flatnonzero(deg == deg.min())
        u = int(lows[int(rng.integers(len(lows)))])
        free = np.flatnonzero(~adj[u] & (idx != u))
        if len(free) == 0:
            break
        free = free[deg[free] == deg[free].min()]
        ring = np.minimum((free - u) % n, (u - free) % n)
        near = free[ring == ring.min()]
        v = int(near[int(rng.integers(len(near)))])
        adj[u, v] = adj[v, u] = True
        deg[u] += 1
        deg[v] += 1
    # repair: move an edge end from a max-degree to a min-degree node until balanced
    while deg.max() - deg.min() >= 2:
        a, b = int(np.argmax(deg)), int(np.argmin(deg))
        xs = np.flatnonzero(adj[a] & ~adj[b] & (idx != b))
        ring = np.minimum((xs - b) % n, (b - xs) % n)
        x = int(xs[np.argmin(ring)])
        adj[a, x] = adj[x, a] = False
        adj[b, x] = adj[x, b] = True
        deg[a] -= 1
        deg[b] += 1
    iu, ju = np.nonzero(np.triu(adj, 1))
    return list(zip(iu.tolist(), ju.tolist()))


def _rewire(n: int, edges: list, p: float, rng) -> set:
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    for u, v in edges:
        if rng.random() >= p:
            continue
        free = [w for w in range(n) if w != u and w not in adj[u]]
        if not free:
            continue
        w = free[int(rng.integers(len(free)))]
        adj[u].discard(v)
        adj[v].discard(u)
        adj[u].add(w)
        adj[w].add(u)
    return {(u, v) for u in range(n) for v in adj[u] if u < v}


def _harary(n: int, k: int) -> set:
    half = k // 2
    edges = {tuple(sorted((i, (i + j) % n))) for i in range(n) for j in range(1, half + 1)}
    if k % 2 == 1:
        if n % 2 == 0:
            edges |= {(i, i + n // 2) for i in range(n // 2)}
        else:
            edges |= {tuple(sorted((i, (i + (n + 1) // 2) % n))) for i in range((n + 1) // 2)}
    return edges


def _barabasi_albert(n: int, m: int, rng) -> set:
    edges = set()
    targets = list(range(m))
    repeated: list[int] = []
    for source in range(m, n):
        for t in targets:
            edges.add((t, source))
        repeated.extend(targets)
        repeated.extend([source] * m)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(repeated[int(rng.integers(len(repeated)))])
        targets = sorted(chosen)
    return edges


def _generate_once(spec: GeneratorSpec, rng) -> Graph:
    n, p = spec.n, spec.params
    if spec.kind in ("WS", "WS_FLEX"):
        lattice = _ring_lattice(n, float(p["k"]), spec.kind == "WS_FLEX", rng)
        return Graph(n, frozenset(_rewire(n, lattice, float(p["p"]), rng)))
    if spec.kind == "ER":
        upper = np.triu(rng.random((n, n)) < p["p"], 1)
        iu, ju = np.nonzero(upper)
        return Graph(n, frozenset(zip(iu.tolist(), ju.tolist())))
    if spec.kind == "BA":
        return Graph(n, frozenset(_barabasi_albert(n, int(p["m"]), rng)))
    if spec.kind == "HARARY":
        return Graph(n, frozenset(_harary(n, int(p["k"]))))
    return Graph(n, frozenset((u, v) for u in range(n) for v in range(u + 1, n)))


def generate(spec: GeneratorSpec) -> Graph:
    """Build the graph described by ``spec``; deterministic in ``spec.seed``.

    WS-type output is regenerated from a fresh sub-seed until connected.
    """
    spec.validate()
    needs_connected = spec.kind in ("WS", "WS_FLEX")
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([spec.seed, attempt])
        g = _generate_once(spec, rng)
        if not needs_connected or is_connected(g):
            return g
    raise GenerationError(f"no connected graph for {spec} after {MAX_ATTEMPTS} attempts")


# -- pools ------------------------------------------------------------------


@dataclass(frozen=True)
class PoolRecord:
    graph_id: int
    graph: Graph
    kind: str
    params: dict
    seed: int


@dataclass
class GraphPool:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def graphs(self) -> list:
        return [r.graph for r in self.records]


def ws_flex_sweep(
    n: int,
    degree_lo: float,
    degree_hi: float,
    degree_steps: int,
    p_steps: int,
    seeds_per_cell: int,
    base_seed: int,
) -> GraphPool:
    """WS-flex graphs over a (degree x p x seed) grid.

    Degrees are spaced geometrically in ``[degree_lo, degree_hi]``, rewiring
    probabilities uniformly in ``[0, 1]``. Cells whose generator cannot reach a
    connected graph are dropped.
    """
    if not (2 <= degree_lo < degree_hi <= n - 1):
        raise ValueError(f"degree range [{degree_lo}, {degree_hi}] must lie within [2, {n - 1}]")
    degrees = np.geomspace(degree_lo, degree_hi, degree_steps)
    probs = np.linspace(0.0, 1.0, p_steps)
    records = []
    cell = 0
    for k in degrees:
        for p in probs:
            for _ in range(seeds_per_cell):
                spec = GeneratorSpec(
                    "WS_FLEX", n, {"k": float(k), "p": float(p)}, derive_seed(base_seed, cell)
                )
                cell += 1
                try:
                    g = generate(spec)
                except GenerationError:
                    continue
                records.append(PoolRecord(len(records), g, spec.kind, dict(spec.params), spec.seed))
    return GraphPool(records)


def _move_endpoints(g: Graph, moves: int, rng, tries: int = 50) -> Graph:
    n = g.n
    adj = [set(nb) for nb in g.neighbors]
    edges = g.sorted_edges()
    done = 0
    for _ in range(moves):
        for _ in range(tries):
            u, v = edges[int(rng.integers(len(edges)))]
            if rng.random() < 0.5:
                u, v = v, u
            free = [w for w in range(n) if w != u and w not in adj[u]]
            if not free:
                continue
            w = free[int(rng.integers(len(free)))]
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
            if _connected_sets(adj):
                edges = sorted((a, b) for a in range(n) for b in adj[a] if a < b)
                done += 1
                break
            adj[u].discard(w)
            adj[w].discard(u)
            adj[u].add(v)
            adj[v].add(u)
    return Graph(n, frozenset(edges))


def _connected_sets(adj) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(adj)


def heterogeneity_augment(
    pool: GraphPool, rounds: int, rewires_per_round: int, seed: int, max_size: int | None = None
) -> GraphPool:
    """Append rewired variants of every pool graph.

    Round ``r`` gives each original graph one variant made by ``r *
    rewires_per_round`` endpoint moves (an edge keeps one end and reattaches
    the other to a random non-neighbour). Moves that would disconnect the
    graph are resampled. ``max_size`` caps the total pool size.
    """
    if len(pool) == 0:
        raise ValueError("pool must be non-empty")
    records = list(pool.records)
    originals = list(pool.records)
    for r in range(1, rounds + 1):
        for rec in originals:
            if max_size is not None and len(records) >= max_size:
                return GraphPool(records)
            sub = derive_seed(seed, r, rec.graph_id)
            g = _move_endpoints(rec.graph, r * rewires_per_round, np.random.default_rng(sub))
            records.append(
                PoolRecord(len(records), g, "REWIRED", {"parent": rec.graph_id, "moves": r * rewires_per_round}, sub)
            )
    return GraphPool(records)


# -- persistence ------------------------------------------------------------

MANIFEST = "pool.manifest"


def save_pool(pool: GraphPool, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for rec in pool.records:
        params = json.dumps(rec.params, sort_keys=True, separators=(",", ":"))
        lines.append(f"{rec.graph_id}\t{rec.kind}\t{params}\t{rec.seed}")
        atomic_write_text(d / f"{rec.graph_id}.edges", format_edge_list(rec.graph))
    atomic_write_text(d / MANIFEST, "".join(line + "\n" for line in lines))


def load_pool(directory) -> GraphPool:
    d = Path(directory)
    records = []
    for line in (d / MANIFEST).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        gid, kind, params, seed = line.split("\t")
        g = read_edge_list(d / f"{gid}.edges")
        records.append(PoolRecord(int(gid), g, kind, json.loads(params), int(seed)))
    return GraphPool(records)
