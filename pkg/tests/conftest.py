import sys
from pathlib import Path

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from graphnas.graph import Graph, is_connected  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def graphs(draw, min_n=1, max_n=10):
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Graph.from_edges(n, chosen)


@st.composite
def connected_graphs(draw, min_n=2, max_n=10):
    """Random spanning tree plus random extra edges."""
    n = draw(st.integers(min_n, max_n))
    edges = set()
    for v in range(1, n):
        u = draw(st.integers(0, v - 1))
        edges.add((u, v))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in edges]
    if pairs:
        edges |= set(draw(st.lists(st.sampled_from(pairs), unique=True)))
    perm = draw(st.permutations(range(n)))
    return Graph.from_edges(n, [tuple(sorted((perm[u], perm[v]))) for u, v in edges])


def random_connected(rng, n, p):
    while True:
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        g = Graph.from_edges(n, edges)
        if is_connected(g):
            return g


def fuzz_corpus(count, seed=0, n_range=(3, 10)):
    """Deterministic corpus of connected graphs mixing densities and a few structured families."""
    from graphnas.graph import complete_graph, cycle_graph, path_graph, star_graph

    rng = np.random.default_rng(seed)
    out = [complete_graph(4), cycle_graph(5), cycle_graph(6), path_graph(3), star_graph(4), complete_graph(10)]
    while len(out) < count:
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        out.append(random_connected(rng, n, float(rng.uniform(0.15, 0.95))))
    return out


# (criterion, passed, detail) rows collected by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
