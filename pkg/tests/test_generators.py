import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from graphnas.generators import (
    KINDS,
    GeneratorSpec,
    GraphPool,
    PoolRecord,
    generate,
    heterogeneity_augment,
    load_pool,
    save_pool,
    ws_flex_sweep,
)
from graphnas.graph import complete_graph, cycle_graph, degree_sequence, edge_connectivity, is_connected
from graphnas.metrics import degree_statistics


def test_er_with_p_one_is_complete():
    for seed in range(3):
        assert generate(GeneratorSpec("ER", 5, {"p": 1.0}, seed)) == complete_graph(5)


def test_harary_2_6():
    g = generate(GeneratorSpec("HARARY", 6, {"k": 2}))
    assert g.m == math.ceil(2 * 6 / 2) == 6
    assert edge_connectivity(g) >= 2
    assert oracles.edge_connectivity(g.n, g.edges) >= 2


@pytest.mark.parametrize("n,k", [(6, 3), (7, 3), (9, 4), (10, 5), (11, 6)])
def test_harary_connectivity_and_size(n, k):
    g = generate(GeneratorSpec("HARARY", n, {"k": k}))
    assert g.m == math.ceil(k * n / 2)
    assert edge_connectivity(g) == k


def test_ws_flex_lattice_degree_accounting():
    g = generate(GeneratorSpec("WS_FLEX", 64, {"k": 4.0, "p": 0.0}, seed=1))
    assert abs(2 * g.m / 64 - 4) <= 1 / 64


@pytest.mark.parametrize("k", [2.0, 2.5, 3.3, 4.0, 5.75, 10.1, 31.5, 62.9])
def test_ws_flex_average_degree_within_one_over_n(k):
    n = 64
    g = generate(GeneratorSpec("WS_FLEX", n, {"k": k, "p": 0.0}, seed=2))
    assert abs(2 * g.m / n - k) <= 1 / n + 1e-12
    deg = degree_sequence(g)
    assert max(deg) - min(deg) <= 1


@pytest.mark.parametrize("n,k", [(10, 2), (10, 4), (12, 6), (9, 4)])
def test_ws_flex_integer_degree_equals_ws_lattice(n, k):
    flex = generate(GeneratorSpec("WS_FLEX", n, {"k": float(k), "p": 0.0}))
    ws = generate(GeneratorSpec("WS", n, {"k": k, "p": 0.0}))
    assert flex == ws
    assert set(degree_sequence(ws)) == {k}


@given(st.sampled_from(["WS", "WS_FLEX", "ER", "BA", "HARARY"]), st.integers(6, 20), st.integers(0, 2**32))
def test_generation_is_deterministic_and_simple(kind, n, seed):
    params = {
        "WS": {"k": 4, "p": 0.3},
        "WS_FLEX": {"k": 3.7, "p": 0.3},
        "ER": {"p": 0.4},
        "BA": {"m": 2},
        "HARARY": {"k": 3},
    }[kind]
    spec = GeneratorSpec(kind, n, params, seed)
    a, b = generate(spec), generate(spec)
    assert a == b and a.n == n
    if kind in ("WS", "WS_FLEX"):
        assert is_connected(a)


@pytest.mark.parametrize(
    "spec,field",
    [
        (GeneratorSpec("WS_FLEX", 8, {"k": 1.5, "p": 0.1}), "k"),
        (GeneratorSpec("WS_FLEX", 8, {"k": 8.0, "p": 0.1}), "k"),
        (GeneratorSpec("WS", 8, {"k": 3.5, "p": 0.1}), "k"),
        (GeneratorSpec("WS", 8, {"k": 4, "p": 1.5}), "p"),
        (GeneratorSpec("BA", 5, {"m": 5}), "m"),
        (GeneratorSpec("HARARY", 5, {"k": 5}), "k"),
        (GeneratorSpec("GRID", 5, {}), "kind"),
        (GeneratorSpec("COMPLETE", 1, {}), "n"),
    ],
)
def test_invalid_specs_name_the_field(spec, field):
    with pytest.raises(ValueError, match=f"^{field}:"):
        generate(spec)


def test_all_kinds_generate():
    params = {"WS": {"k": 2, "p": 0.1}, "WS_FLEX": {"k": 2.5, "p": 0.1}, "ER": {"p": 0.5}, "BA": {"m": 1}, "HARARY": {"k": 2}, "COMPLETE": {}}
    for kind in KINDS:
        assert generate(GeneratorSpec(kind, 7, params[kind], 0)).n == 7


def test_ba_tail_exponent_in_power_law_band():
    g = generate(GeneratorSpec("BA", 2000, {"m": 2}, seed=7))
    k = np.array(degree_sequence(g), dtype=float)
    kmin = 10
    tail = k[k >= kmin]
    gamma = 1 + len(tail) / np.log(tail / (kmin - 0.5)).sum()
    assert 1.5 <= gamma <= 4.5


def test_sweep_single_cell():
    pool = ws_flex_sweep(16, 2, 15, 1, 1, 1, base_seed=0)
    assert len(pool) == 1


def test_sweep_small_grid():
    pool = ws_flex_sweep(8, 2, 7, 3, 3, 2, base_seed=11)
    assert len(pool) == 18
    assert [r.graph_id for r in pool] == list(range(18))
    for rec in pool:
        assert is_connected(rec.graph)
        assert abs(2 * rec.graph.m / 8 - rec.params["k"]) <= 1 + 1e-12


def test_sweep_rejects_bad_range():
    with pytest.raises(ValueError):
        ws_flex_sweep(8, 1.5, 7, 2, 2, 1, 0)
    with pytest.raises(ValueError):
        ws_flex_sweep(8, 2, 8, 2, 2, 1, 0)


def test_sweep_deterministic():
    a = ws_flex_sweep(10, 2, 9, 3, 3, 1, base_seed=5)
    b = ws_flex_sweep(10, 2, 9, 3, 3, 1, base_seed=5)
    assert [r.graph for r in a] == [r.graph for r in b]


def test_augment_zero_rounds_is_identity():
    pool = ws_flex_sweep(8, 2, 7, 2, 2, 1, base_seed=0)
    out = heterogeneity_augment(pool, rounds=0, rewires_per_round=5, seed=1)
    assert out.records == pool.records


def test_augmented_cycle_variants():
    c8 = cycle_graph(8)
    pool = GraphPool([PoolRecord(0, c8, "WS", {"k": 2, "p": 0.0}, 0)])
    out = heterogeneity_augment(pool, rounds=3, rewires_per_round=4, seed=2)
    assert len(out) == 4 and out.records[0].graph == c8
    irregular = 0
    for rec in out.records[1:]:
        g = rec.graph
        assert g.n == 8 and g.m == 8 and is_connected(g)
        assert degree_statistics(g)[1] >= 0
        irregular += len(set(degree_sequence(g))) > 1
        assert rec.kind == "REWIRED" and rec.params["parent"] == 0
    assert irregular >= 1


def test_augment_respects_max_size():
    pool = ws_flex_sweep(10, 2, 9, 3, 3, 1, base_seed=0)
    out = heterogeneity_augment(pool, rounds=5, rewires_per_round=3, seed=0, max_size=len(pool) + 4)
    assert len(out) == len(pool) + 4
    assert [r.graph_id for r in out] == list(range(len(out)))


def test_pool_round_trip(tmp_path):
    pool = heterogeneity_augment(ws_flex_sweep(8, 2, 7, 2, 2, 1, base_seed=3), 1, 3, seed=4)
    save_pool(pool, tmp_path / "pool")
    back = load_pool(tmp_path / "pool")
    assert back.records == pool.records
    lines = (tmp_path / "pool" / "pool.manifest").read_text().splitlines()
    assert len(lines) == len(pool)
    assert all((tmp_path / "pool" / f"{r.graph_id}.edges").exists() for r in pool)


@given(st.integers(4, 40), st.floats(0, 1), st.integers(0, 2**32))
def test_ws_flex_lattice_is_near_regular(n, frac, seed):
    k = 2 + frac * (n - 3)
    g = generate(GeneratorSpec("WS_FLEX", n, {"k": k, "p": 0.0}, seed))
    deg = degree_sequence(g)
    assert max(deg) - min(deg) <= 1
    assert abs(2 * g.m / n - k) <= 1 / n + 1e-12
