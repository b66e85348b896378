"""Topological features of a relational graph.

Every feature is a plain function of an immutable :class:`Graph`; the
:func:`featurize` entry point assembles them in the canonical order used by
feature tables and surrogate models.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import community
from ._io import atomic_write_text
from .graph import (
    DistanceMatrix,
    Graph,
    _bfs_levels,
    all_pairs_shortest_paths,
    edge_connectivity,
    is_connected,
    pairwise_vertex_connectivity,
)

FEATURE_NAMES = (
    "average_degree",
    "clustering_coefficient",
    "heterogeneity",
    "average_path_length",
    "bimodularity",
    "greedy_modularity",
    "resilience",
    "degree_entropy",
    "wedge_count",
    "gini_index",
    "average_node_connectivity",
    "edge_connectivity",
    "average_closeness",
    "average_closeness_wf",
    "average_eccentricity",
    "diameter",
    "radius",
    "average_edge_betweenness",
    "average_node_betweenness",
    "central_point_of_dominance",
    "core_number",
    "laplacian_min",
    "laplacian_max",
    "transitivity",
    "local_efficiency",
    "global_efficiency",
)


class DisconnectedGraphError(ValueError):
    pass


def _require_connected(g: Graph):
    if not is_connected(g):
        raise DisconnectedGraphError("feature requires a connected graph")


def degree_statistics(g: Graph):
    """(average_degree, heterogeneity, resilience, degree_entropy, wedge_count, gini_index)."""
    if g.m == 0:
        raise ValueError("degree statistics need at least one edge")
    k = g.adjacency.sum(axis=1).astype(np.float64)
    n, m = g.n, g.m
    mean_k = k.mean()
    mean_k2 = (k * k).mean()
    heterogeneity = (mean_k2 - mean_k**2) / mean_k
    resilience = mean_k2 / mean_k
    p = k[k > 0] / m
    entropy = float(-(p * np.log(p)).sum() / n)
    wedges = float((k * (k - 1) / 2).sum())
    ks = np.sort(k)
    ranks = np.arange(1, n + 1)
    gini = 2.0 * (ranks * ks).sum() / (n * ks.sum()) - (n + 1) / n
    return float(mean_k), float(heterogeneity), float(resilience), entropy, wedges, float(gini)


def distance_metrics(g: Graph, d: DistanceMatrix):
    """(average_path_length, average_eccentricity, diameter, radius, average_closeness, average_closeness_wf)."""
    n = g.n
    if n < 2:
        raise ValueError("distance metrics need n >= 2")
    if not d.reachable.all():
        raise DisconnectedGraphError("distance metrics require a connected graph")
    dist = d.d
    apl = dist.sum() / (n * (n - 1))
    ecc = dist.max(axis=1)
    reach = d.reachable.sum(axis=1)
    finite = np.where(d.reachable, dist, 0.0)
    totals = finite.sum(axis=1)
    closeness = np.where(totals > 0, (reach - 1) / np.where(totals > 0, totals, 1.0), 0.0)
    closeness_wf = closeness * (reach - 1) / (n - 1)
    return (
        float(apl),
        float(ecc.mean()),
        float(ecc.max()),
        float(ecc.min()),
        float(closeness.mean()),
        float(closeness_wf.mean()),
    )


def clustering_and_transitivity(g: Graph):
    a = g.adjacency.astype(np.float64)
    k = a.sum(axis=1)
    tri = np.einsum("ij,jk,ki->i", a, a, a) / 2.0
    pairs = k * (k - 1) / 2.0
    local = np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)
    wedges = pairs.sum()
    trans = tri.sum() / wedges if wedges > 0 else 0.0
    return float(local.mean()), float(trans)


def _brandes(g: Graph, dist: np.ndarray):
    """Ordered-pair node and edge dependency sums, all sources at once."""
    n = g.n
    a = g.adjacency.astype(np.float64)
    finite = np.isfinite(dist)
    depth = int(dist[finite].max())
    level = np.where(finite, dist, -1).astype(np.int64)
    sigma = np.eye(n)
    for lv in range(1, depth + 1):
        sigma += ((sigma * (level == lv - 1)) @ a) * (level == lv)
    delta = np.zeros((n, n))
    safe_sigma = np.where(sigma > 0, sigma, 1.0)
    for lv in range(depth, 0, -1):
        c = np.where(level == lv, (1.0 + delta) / safe_sigma, 0.0)
        delta += np.where(level == lv - 1, sigma * (c @ a), 0.0)
    node = delta.sum(axis=0) - np.diag(delta)
    coef = np.where(finite, (1.0 + delta) / safe_sigma, 0.0)
    edge_dir = np.zeros((n, n))
    for lv in range(1, depth + 1):
        edge_dir += (sigma * (level == lv - 1)).T @ (coef * (level == lv))
    edge_dir *= a
    return node, edge_dir + edge_dir.T


def node_betweenness(g: Graph, d: DistanceMatrix | None = None) -> np.ndarray:
    """Normalised node betweenness, 2/((n-1)(n-2)) times the unordered-pair sum."""
    d = d or all_pairs_shortest_paths(g)
    node, _ = _brandes(g, d.d)
    if g.n < 3:
        return np.zeros(g.n)
    return node / ((g.n - 1) * (g.n - 2))


def edge_betweenness(g: Graph, d: DistanceMatrix | None = None) -> dict:
    """Normalised edge betweenness keyed by ``(u, v)``, u < v."""
    d = d or all_pairs_shortest_paths(g)
    _, edge = _brandes(g, d.d)
    scale = 1.0 / (g.n * (g.n - 1))
    return {(u, v): float(edge[u, v] * scale) for u, v in g.sorted_edges()}


def betweenness_metrics(g: Graph, d: DistanceMatrix | None = None):
    """(average_node_betweenness, average_edge_betweenness, central_point_of_dominance)."""
    if g.n < 3:
        raise ValueError("central point of dominance needs n >= 3")
    d = d or all_pairs_shortest_paths(g)
    if not d.reachable.all():
        raise DisconnectedGraphError("betweenness metrics require a connected graph")
    node, edge = _brandes(g, d.d)
    n = g.n
    nb = node / ((n - 1) * (n - 2))
    iu, ju = np.nonzero(np.triu(g.adjacency, 1))
    eb = edge[iu, ju] / (n * (n - 1))
    cpd = (nb.max() - nb).sum() / (n - 1)
    return float(nb.mean()), float(eb.mean()) if len(eb) else 0.0, float(cpd)


def connectivity_metrics(g: Graph):
    """(average_node_connectivity, edge_connectivity)."""
    n = g.n
    if n < 2:
        raise ValueError("connectivity needs n >= 2")
    kappa = pairwise_vertex_connectivity(g)
    avg = kappa[np.triu_indices(n, 1)].mean()
    return float(avg), float(edge_connectivity(g))


def community_metrics(g: Graph, seed: int):
    """(bimodularity, greedy_modularity)."""
    if g.m == 0:
        raise ValueError("community metrics need at least one edge")
    qb = community.bimodularity(g, seed)
    qg, _ = community.greedy_modularity(g)
    return float(qb), float(qg)


def laplacian_spectrum(g: Graph) -> np.ndarray:
    a = g.adjacency.astype(np.float64)
    lap = np.diag(a.sum(axis=1)) - a
    return np.linalg.eigvalsh(lap)


def spectral_metrics(g: Graph):
    """(laplacian_min, laplacian_max): algebraic connectivity and spectral radius of L."""
    if g.n < 2:
        raise ValueError("spectral metrics need n >= 2")
    ev = laplacian_spectrum(g)
    return float(ev[1]), float(ev[-1])


def _global_efficiency(dist: np.ndarray) -> float:
    n = dist.shape[0]
    if n < 2:
        return 0.0
    inv = np.zeros_like(dist)
    off = np.isfinite(dist) & (dist > 0)
    inv[off] = 1.0 / dist[off]
    return float(inv.sum() / (n * (n - 1)))


def efficiency_metrics(g: Graph, d: DistanceMatrix | None = None):
    """(local_efficiency, global_efficiency)."""
    if g.n < 2:
        raise ValueError("efficiency needs n >= 2")
    d = d or all_pairs_shortest_paths(g)
    glob = _global_efficiency(d.d)
    local = np.zeros(g.n)
    adj = g.adjacency
    for i, nb in enumerate(g.neighbors):
        if len(nb) >= 2:
            local[i] = _global_efficiency(_bfs_levels(adj[np.ix_(nb, nb)]))
    return float(local.mean()), glob


def core_numbers(g: Graph) -> list[int]:
    deg = g.adjacency.sum(axis=1).astype(int).tolist()
    alive = set(range(g.n))
    core = [0] * g.n
    k = 0
    nbrs = g.neighbors
    while alive:
        v = min(alive, key=lambda x: (deg[x], x))
        k = max(k, deg[v])
        core[v] = k
        alive.remove(v)
        for u in nbrs[v]:
            if u in alive:
                deg[u] -= 1
    return core


def core_number_metric(g: Graph) -> float:
    return float(np.mean(core_numbers(g)))


# -- assembly ---------------------------------------------------------------

_GROUPS = {
    "degree": ("average_degree", "heterogeneity", "resilience", "degree_entropy", "wedge_count", "gini_index"),
    "distance": (
        "average_path_length",
        "average_eccentricity",
        "diameter",
        "radius",
        "average_closeness",
        "average_closeness_wf",
    ),
    "clustering": ("clustering_coefficient", "transitivity"),
    "betweenness": ("average_node_betweenness", "average_edge_betweenness", "central_point_of_dominance"),
    "connectivity": ("average_node_connectivity", "edge_connectivity"),
    "community": ("bimodularity", "greedy_modularity"),
    "spectral": ("laplacian_min", "laplacian_max"),
    "efficiency": ("local_efficiency", "global_efficiency"),
    "core": ("core_number",),
}
_GROUP_OF = {name: grp for grp, names in _GROUPS.items() for name in names}
assert sorted(_GROUP_OF) == sorted(FEATURE_NAMES)


def compute_features(g: Graph, names=FEATURE_NAMES, seed: int = 0) -> dict:
    """Compute only the requested features (and the groups they belong to)."""
    unknown = set(names) - set(FEATURE_NAMES)
    if unknown:
        raise KeyError(f"unknown features: {sorted(unknown)}")
    _require_connected(g)
    groups = {_GROUP_OF[n] for n in names}
    d = all_pairs_shortest_paths(g) if groups & {"distance", "betweenness", "efficiency"} else None
    out = {}
    if "degree" in groups:
        out.update(zip(_GROUPS["degree"], degree_statistics(g)))
    if "distance" in groups:
        out.update(zip(_GROUPS["distance"], distance_metrics(g, d)))
    if "clustering" in groups:
        out.update(zip(_GROUPS["clustering"], clustering_and_transitivity(g)))
    if "betweenness" in groups:
        out.update(zip(_GROUPS["betweenness"], betweenness_metrics(g, d)))
    if "connectivity" in groups:
        out.update(zip(_GROUPS["connectivity"], connectivity_metrics(g)))
    if "community" in groups:
        out.update(zip(_GROUPS["community"], community_metrics(g, seed)))
    if "spectral" in groups:
        out.update(zip(_GROUPS["spectral"], spectral_metrics(g)))
    if "efficiency" in groups:
        out.update(zip(_GROUPS["efficiency"], efficiency_metrics(g, d)))
    if "core" in groups:
        out["core_number"] = core_number_metric(g)
    return {name: out[name] for name in names}


@dataclass(frozen=True)
class FeatureVector:
    values: tuple

    def __post_init__(self):
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(self.values)}")

    def __getitem__(self, name: str) -> float:
        return self.values[FEATURE_NAMES.index(name)]

    def as_dict(self) -> dict:
        return dict(zip(FEATURE_NAMES, self.values))

    def to_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)


def featurize(g: Graph, seed: int = 0) -> FeatureVector:
    feats = compute_features(g, FEATURE_NAMES, seed)
    return FeatureVector(tuple(feats[n] for n in FEATURE_NAMES))


# -- feature table CSV ------------------------------------------------------


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


@dataclass
class FeatureTable:
    graph_ids: list
    vectors: list  # FeatureVector per row
    targets: list | None = None  # top1_error per row, None entries allowed
    timings: list | None = None  # seconds per row

    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((0, len(FEATURE_NAMES)))
        return np.array([v.values for v in self.vectors], dtype=np.float64)

    def __len__(self):
        return len(self.graph_ids)


def write_feature_table(table: FeatureTable, path) -> None:
    header = ["graph_id", *FEATURE_NAMES]
    if table.targets is not None:
        header.append("top1_error")
    if table.timings is not None:
        header.append("feature_time_s")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i, gid in enumerate(table.graph_ids):
        row = [gid, *(_fmt(x) for x in table.vectors[i].values)]
        if table.targets is not None:
            row.append(_fmt(table.targets[i]))
        if table.timings is not None:
            row.append(_fmt(table.timings[i]))
        w.writerow(row)
    atomic_write_text(path, buf.getvalue())


def read_feature_table(path) -> FeatureTable:
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty feature table")
    header = rows[0]
    if tuple(header[1 : 1 + len(FEATURE_NAMES)]) != FEATURE_NAMES or header[0] != "graph_id":
        raise ValueError(f"{path}: header does not match the canonical feature columns")
    extra = header[1 + len(FEATURE_NAMES) :]
    has_t = "top1_error" in extra
    has_time = "feature_time_s" in extra
    ids, vecs, targets, timings = [], [], [], []
    for r in rows[1:]:
        ids.append(int(r[0]))
        vecs.append(FeatureVector(tuple(float(x) for x in r[1 : 1 + len(FEATURE_NAMES)])))
        tail = dict(zip(extra, r[1 + len(FEATURE_NAMES) :]))
        if has_t:
            targets.append(float(tail["top1_error"]) if tail["top1_error"] != "" else None)
        if has_time:
            timings.append(float(tail["feature_time_s"]))
    return FeatureTable(ids, vecs, targets if has_t else None, timings if has_time else None)
