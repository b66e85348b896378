import numpy as np
import pytest
from conftest import connected_graphs, random_connected
from hypothesis import given
from hypothesis import strategies as st

from graphnas.graph import Graph, complete_graph, cycle_graph, degree_sequence, is_connected, path_graph
from graphnas.metrics import featurize
from graphnas.search import (
    COMPLETED,
    CONVERGED_LOCAL,
    MAXIMIZE,
    MINIMIZE,
    NotApplicable,
    RewireOp,
    SearchConfig,
    accepts,
    apply_op,
    bucket_summary,
    load_trace,
    multi_seed_statistics,
    path_csv,
    propose,
    save_trace,
    search,
    trace_from_jsonl,
    trace_to_jsonl,
    validate_trace,
)
from graphnas.surrogate import RegressionModel, constant_model


def linear(feature, slope=1.0, intercept=0.0):
    return RegressionModel((feature,), np.array([slope]), intercept, np.zeros(1), np.ones(1))


AVG_DEGREE = linear("average_degree")


def test_add_edge_not_applicable_on_complete_graph():
    with pytest.raises(NotApplicable):
        propose(complete_graph(5), "ADD_EDGE", np.random.default_rng(0))


def test_remove_edge_not_applicable_on_tree():
    with pytest.raises(NotApplicable):
        propose(path_graph(6), "REMOVE_EDGE", np.random.default_rng(0))


def test_remove_edge_on_c4_gives_a_path():
    g, op = propose(cycle_graph(4), "REMOVE_EDGE", np.random.default_rng(1))
    assert g.m == 3 and is_connected(g)
    assert sorted(degree_sequence(g)) == [1, 1, 2, 2]
    assert op.kind == "REMOVE_EDGE"


def test_unknown_operator_rejected():
    with pytest.raises(ValueError):
        propose(cycle_graph(5), "TELEPORT", np.random.default_rng(0))
    with pytest.raises(ValueError):
        apply_op(cycle_graph(5), RewireOp("TELEPORT", ()))


@given(connected_graphs(min_n=4, max_n=12), st.integers(0, 2**32))
def test_double_swap_preserves_degrees_and_connectivity(g, seed):
    try:
        h, op = propose(g, "DOUBLE_SWAP", np.random.default_rng(seed))
    except NotApplicable:
        return
    assert degree_sequence(h) == degree_sequence(g)
    assert h.m == g.m and is_connected(h) and h != g


@given(connected_graphs(min_n=3, max_n=12), st.sampled_from(["ADD_EDGE", "REMOVE_EDGE", "DOUBLE_SWAP", "RANDOM_REWIRE"]), st.integers(0, 2**32))
def test_operators_change_edge_count_by_at_most_one(g, kind, seed):
    try:
        h, op = propose(g, kind, np.random.default_rng(seed))
    except NotApplicable:
        return
    delta = {"ADD_EDGE": 1, "REMOVE_EDGE": -1, "DOUBLE_SWAP": 0, "RANDOM_REWIRE": 0}[kind]
    assert h.m - g.m == delta
    assert is_connected(h) and h.n == g.n
    assert apply_op(g, op) == h


def test_accepts_relative_epsilon():
    assert accepts(1.0, 0.99, 0.01, MINIMIZE)
    assert not accepts(1.0, 0.995, 0.01, MINIMIZE)
    assert not accepts(1.0, 1.0, 0.01, MINIMIZE)
    assert accepts(2.0, 2.02, 0.01, MAXIMIZE)
    assert not accepts(2.0, 1.5, 0.01, MAXIMIZE)
    assert accepts(-1.0, -1.02, 0.01, MINIMIZE)


def test_config_validation():
    for bad in ({"epsilon": 0.0}, {"epsilon": 1.0}, {"max_steps": 0}, {"mode": "SIDEWAYS"}, {"kinds": ("FOO",)}, {"kinds": ()}):
        with pytest.raises(ValueError):
            SearchConfig(**bad)


def test_constant_model_converges_immediately():
    trace = search(cycle_graph(8), constant_model(0.3), SearchConfig(max_steps=5, max_proposals_per_step=20))
    assert trace.status == CONVERGED_LOCAL and trace.steps == []
    assert trace.final_graph == cycle_graph(8)


def test_maximizing_average_degree_only_adds_edges():
    trace = search(cycle_graph(8), AVG_DEGREE, SearchConfig(mode=MAXIMIZE, max_steps=6, seed=4))
    assert trace.status == COMPLETED and len(trace.steps) == 6
    assert {s.op.kind for s in trace.steps} == {"ADD_EDGE"}
    assert trace.final_graph.m == 8 + 6
    assert trace.predicted_path() == pytest.approx([2 * (8 + i) / 8 for i in range(7)])


def test_minimizing_on_tree_cannot_remove():
    trace = search(path_graph(6), AVG_DEGREE, SearchConfig(mode=MINIMIZE, max_steps=3, max_proposals_per_step=30))
    assert trace.status == CONVERGED_LOCAL and not trace.steps


def test_every_accepted_step_clears_epsilon():
    rng = np.random.default_rng(3)
    g0 = random_connected(rng, 14, 0.3)
    model = linear("global_efficiency", slope=-1.0, intercept=2.0)
    cfg = SearchConfig(epsilon=0.02, max_steps=8, seed=5)
    trace = search(g0, model, cfg)
    path = trace.predicted_path()
    for prev, new in zip(path, path[1:]):
        assert prev - new >= cfg.epsilon * abs(prev)
    for s, g in zip(trace.steps, trace.graphs()[1:]):
        assert is_connected(g)
        assert s.predicted == pytest.approx(model.predict_features(featurize(g).as_dict()))
        assert 0 <= s.rejected_count < cfg.max_proposals_per_step
    steps = [s.cumulative_feature_time_ms for s in trace.steps]
    assert steps == sorted(steps)


def test_search_is_deterministic():
    g0 = random_connected(np.random.default_rng(8), 12, 0.3)
    cfg = SearchConfig(mode=MAXIMIZE, max_steps=5, seed=9)
    model = linear("transitivity")
    assert search(g0, model, cfg) == search(g0, model, cfg)


def test_disconnected_start_rejected():
    with pytest.raises(ValueError):
        search(Graph.from_edges(4, [(0, 1), (2, 3)]), AVG_DEGREE, SearchConfig())


def test_validate_identity_measure_tracks_prediction():
    trace = search(cycle_graph(10), AVG_DEGREE, SearchConfig(mode=MAXIMIZE, max_steps=5, seed=1))
    checked = validate_trace(trace, lambda g: 2 * g.m / g.n)
    assert checked.measured_path() == pytest.approx(checked.predicted_path())


def test_validate_noisy_measure_has_expected_mean_abs_gap():
    sigma = 0.5
    noise = np.random.default_rng(0)
    trace = search(path_graph(40), AVG_DEGREE, SearchConfig(epsilon=1e-3, mode=MAXIMIZE, max_steps=300, seed=2))
    assert len(trace.steps) == 300
    checked = validate_trace(trace, lambda g: 2 * g.m / g.n + sigma * noise.standard_normal())
    gaps = np.abs(np.array(checked.measured_path()) - np.array(checked.predicted_path()))
    assert gaps.mean() == pytest.approx(sigma * np.sqrt(2 / np.pi), rel=0.2)


def test_validate_empty_trace():
    trace = search(cycle_graph(6), constant_model(1.0), SearchConfig(max_steps=2, max_proposals_per_step=5))
    checked = validate_trace(trace, lambda g: 0.5)
    assert checked.initial_measured == 0.5 and checked.steps == []


def test_validate_records_callback_errors_and_continues():
    trace = search(cycle_graph(10), AVG_DEGREE, SearchConfig(mode=MAXIMIZE, max_steps=4, seed=3))
    calls = []

    def flaky(g):
        calls.append(g)
        if len(calls) == 3:
            raise RuntimeError("boom")
        return 1.0

    checked = validate_trace(trace, flaky)
    assert len(calls) == 5
    assert checked.steps[1].measured is None and "boom" in checked.steps[1].error
    assert all(s.measured == 1.0 for i, s in enumerate(checked.steps) if i != 1)


def test_multi_seed_single_seed_matches_plain_search():
    from graphnas._io import derive_seed

    g0 = cycle_graph(9)
    cfg = SearchConfig(mode=MAXIMIZE, max_steps=4, seed=7)
    rows, traces = multi_seed_statistics(g0, AVG_DEGREE, cfg, n_seeds=1, bucket=2)
    assert traces[0] == search(g0, AVG_DEGREE, SearchConfig(mode=MAXIMIZE, max_steps=4, seed=derive_seed(7, 0)))
    assert [r.runs for r in rows] == [1, 1]
    with pytest.raises(ValueError):
        multi_seed_statistics(g0, AVG_DEGREE, cfg, n_seeds=0, bucket=2)


def test_multi_seed_constant_model_has_no_buckets():
    rows, traces = multi_seed_statistics(cycle_graph(8), constant_model(0.0), SearchConfig(max_proposals_per_step=5), 3, 5)
    assert rows == [] and all(t.status == CONVERGED_LOCAL for t in traces)


def test_bucket_quartiles():
    traces = []
    for seed in range(5):
        traces.append(search(cycle_graph(12), AVG_DEGREE, SearchConfig(mode=MAXIMIZE, max_steps=6, seed=seed)))
    rows = bucket_summary(traces, 3)
    assert [(r.step_lo, r.step_hi) for r in rows] == [(1, 3), (4, 6)]
    # every run adds one edge per step, so all runs agree
    assert rows[0].median == pytest.approx(2 * 14 / 12) and rows[0].q1 == rows[0].q3
    assert rows[1].median > rows[0].median


def test_jsonl_round_trip(tmp_path):
    g0 = random_connected(np.random.default_rng(2), 10, 0.4)
    trace = search(g0, linear("transitivity"), SearchConfig(mode=MAXIMIZE, max_steps=4, seed=1))
    trace = validate_trace(trace, lambda g: g.m / 10)
    text = trace_to_jsonl(trace)
    first = text.splitlines()[0]
    assert '"step":0' in first and '"edges"' in first
    assert trace_from_jsonl(text) == trace
    save_trace(trace, tmp_path / "t.jsonl")
    assert load_trace(tmp_path / "t.jsonl") == trace
    rows = path_csv(trace).splitlines()
    assert rows[0] == "step,predicted,measured,cumulative_feature_time_ms"
    assert len(rows) == 2 + len(trace.steps)
