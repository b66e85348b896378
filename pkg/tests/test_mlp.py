import numpy as np
import pytest
from conftest import connected_graphs, random_connected
from hypothesis import given, settings

from gradcheck import gradient_check
from graphnas.graph import Graph, complete_graph, cycle_graph, path_graph
from graphnas.mlp import (
    FlopBudget,
    MaskedMlpSpec,
    TrainingDiverged,
    TrainSchedule,
    backward,
    balanced_groups,
    build_masked_mlp,
    concentric_rings,
    count_flops,
    dense_flops,
    forward,
    gaussian_blobs,
    history_csv,
    init_params,
    match_flop_budget,
    save_spec,
    softmax_cross_entropy,
    spec_from_json,
    spec_to_json,
    train_toy,
)


@settings(max_examples=10)
@given(connected_graphs(min_n=2, max_n=6))
def test_gradients_match_finite_differences(g):
    spec = MaskedMlpSpec(g, balanced_groups(2 * g.n + 1, g.n), 3, 3, 4)
    worst, compared, failing = gradient_check(spec, seed=g.m)
    assert compared > 0 and failing == 0, worst


def test_masked_gradients_are_zero():
    spec = MaskedMlpSpec(path_graph(4), (2, 2, 2, 2), 3, 2, 4)
    params = init_params(spec, 1)
    x = np.random.default_rng(0).standard_normal((5, 3))
    logits, cache = forward(spec, params, x)
    base = tuple((z > 0).tobytes() for _, z in cache[:-1])
    grads = backward(spec, params, cache, softmax_cross_entropy(logits, np.array([0, 1, 0, 1, 1]))[1])
    for layer in (1, 2):
        assert np.all(grads[layer][0][spec.mask == 0] == 0)
        assert np.all(params[layer][0][spec.mask == 0] == 0)


def test_complete_mask_equals_dense_mlp():
    spec = build_masked_mlp(complete_graph(6), 24, n_layers=5, input_dim=7, output_dim=4)
    assert np.all(spec.mask == 1)
    rng = np.random.default_rng(2)
    params = [(rng.standard_normal(s), rng.standard_normal(s[0])) for s in spec.layer_shapes()]
    x = rng.standard_normal((9, 7))
    h = x
    for i, (w, b) in enumerate(params):
        h = h @ w.T + b
        if i < len(params) - 1:
            h = np.maximum(h, 0)
    np.testing.assert_allclose(forward(spec, params, x)[0], h, atol=1e-12, rtol=0)


@given(connected_graphs(min_n=2, max_n=7))
def test_hidden_unit_sees_only_neighbour_groups(g):
    sizes = balanced_groups(2 * g.n, g.n)
    spec = MaskedMlpSpec(g, sizes, 2, 2, 3)
    rng = np.random.default_rng(g.m)
    w = rng.standard_normal((spec.hidden_width, spec.hidden_width)) * spec.mask
    group = np.repeat(np.arange(g.n), sizes)
    h = rng.standard_normal(spec.hidden_width)
    base = w @ h
    for j in range(g.n):
        bumped = h.copy()
        bumped[group == j] += 1.0
        changed = set(group[np.abs(w @ bumped - base) > 1e-12].tolist())
        allowed = {j} | {i for i in range(g.n) if g.has_edge(i, j)}
        assert changed <= allowed


def test_identity_weights_reproduce_positive_inputs():
    spec = build_masked_mlp(complete_graph(3), 3, n_layers=3, input_dim=3, output_dim=3)
    params = [(np.eye(3), np.zeros(3)) for _ in range(3)]
    x = np.abs(np.random.default_rng(0).standard_normal((4, 3)))
    np.testing.assert_allclose(forward(spec, params, x)[0], x, atol=1e-15)
    x[:, 1] = -1.0
    assert np.all(forward(spec, params, x)[0][:, 1] == 0)


def test_zero_input_and_zero_bias_give_zero_logits():
    spec = build_masked_mlp(cycle_graph(5), 10, n_layers=4, input_dim=3, output_dim=3)
    logits, _ = forward(spec, init_params(spec, 0), np.zeros((2, 3)))
    assert np.all(logits == 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        MaskedMlpSpec(cycle_graph(4), (1, 1, 1), 2, 2)
    with pytest.raises(ValueError):
        MaskedMlpSpec(cycle_graph(4), (1, 0, 1, 1), 2, 2)
    with pytest.raises(ValueError):
        build_masked_mlp(cycle_graph(5), 12)
    spec = build_masked_mlp(cycle_graph(4), 8, input_dim=3, output_dim=2)
    with pytest.raises(ValueError):
        forward(spec, init_params(spec), np.zeros((1, 4)))
    with pytest.raises(ValueError):
        forward(spec, init_params(spec)[:-1], np.zeros((1, 3)))


def test_flop_counts():
    assert dense_flops(3, 5) == 30
    w = 16
    dense = count_flops(build_masked_mlp(complete_graph(4), w, n_layers=3, input_dim=3, output_dim=2))
    assert dense.per_layer == (2 * 3 * w, 2 * w * w, 2 * w * 2)
    # two disjoint edges on 4 nodes: 4 self blocks + 4 edge blocks = half of 16
    half = Graph.from_edges(4, [(0, 1), (2, 3)])
    spec = build_masked_mlp(half, w, n_layers=3, input_dim=3, output_dim=2)
    assert count_flops(spec).per_layer[1] == w * w


def test_flops_grow_with_edges():
    g = cycle_graph(8)
    prev = count_flops(build_masked_mlp(g, 32)).flops
    for e in [(0, 2), (0, 4), (1, 5), (3, 7)]:
        g = g.with_changes(add=[e])
        now = count_flops(build_masked_mlp(g, 32)).flops
        assert now > prev
        prev = now


def test_flop_match_on_own_graph_keeps_width():
    ref = count_flops(build_masked_mlp(complete_graph(8), 64))
    spec = match_flop_budget(complete_graph(8), ref)
    assert spec.units_per_node == 8 and count_flops(spec).flops == ref.flops


@pytest.mark.parametrize("seed", range(5))
def test_flop_match_on_sparse_graph_within_five_percent(seed):
    ref = count_flops(build_masked_mlp(complete_graph(16), 128))
    g = random_connected(np.random.default_rng(seed), 16, 0.2)
    spec = match_flop_budget(g, ref)
    assert abs(count_flops(spec).flops - ref.flops) <= 0.05 * ref.flops
    assert spec.hidden_width > 128
    assert max(spec.group_sizes) - min(spec.group_sizes) <= 1


def test_flop_match_is_deterministic_on_two_nodes():
    g = path_graph(2)
    ref = FlopBudget(10_000)
    a, b = match_flop_budget(g, ref, input_dim=4, output_dim=3), match_flop_budget(g, ref, input_dim=4, output_dim=3)
    assert a == b and a.hidden_width >= 2


def test_training_separates_easy_blobs():
    data = gaussian_blobs(600, n_classes=3, separation=6.0, noise=0.5, seed=1)
    spec = build_masked_mlp(cycle_graph(4), 16, n_layers=3, input_dim=2, output_dim=3)
    result = train_toy(spec, data, TrainSchedule(epochs=15, lr=0.05, batch_size=32), seed=0)
    assert result.top1_error <= 0.05
    assert len(result.history) == 15
    for layer, (w, _) in enumerate(result.params):
        mask = spec.layer_mask(layer)
        if mask is not None:
            assert np.all(w[mask == 0] == 0)


def test_rings_are_learnable():
    data = concentric_rings(800, 2, noise=0.05, seed=3)
    spec = build_masked_mlp(complete_graph(4), 32, n_layers=4, input_dim=2, output_dim=2)
    assert train_toy(spec, data, TrainSchedule(epochs=30, lr=0.05, batch_size=32), seed=1).top1_error < 0.1


def test_zero_learning_rate_leaves_parameters_unchanged():
    data = gaussian_blobs(100, seed=0)
    spec = build_masked_mlp(cycle_graph(4), 8, n_layers=3, input_dim=2, output_dim=2)
    start = init_params(spec, 5)
    out = train_toy(spec, data, TrainSchedule(epochs=2, lr=0.0), params=start)
    for (w0, b0), (w1, b1) in zip(start, out.params):
        assert np.array_equal(w0, w1) and np.array_equal(b0, b1)


def test_training_is_deterministic():
    data = gaussian_blobs(200, n_classes=3, seed=2)
    spec = build_masked_mlp(cycle_graph(5), 10, n_layers=4, input_dim=2, output_dim=3)
    sched = TrainSchedule(epochs=3)
    a, b = train_toy(spec, data, sched, seed=7), train_toy(spec, data, sched, seed=7)
    assert a.history == b.history
    assert all(np.array_equal(p[0], q[0]) for p, q in zip(a.params, b.params))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises():
    data = gaussian_blobs(200, separation=50.0, seed=0)
    spec = build_masked_mlp(complete_graph(4), 16, n_layers=4, input_dim=2, output_dim=2)
    with pytest.raises(TrainingDiverged):
        train_toy(spec, data, TrainSchedule(epochs=20, lr=1e6, momentum=0.99), seed=0)


def test_single_class_rejected():
    data = gaussian_blobs(50, n_classes=2, seed=0)
    data.y_train[:] = 0
    data.y_val[:] = 0
    spec = build_masked_mlp(cycle_graph(4), 8, n_layers=3, input_dim=2, output_dim=2)
    with pytest.raises(ValueError):
        train_toy(spec, data)


def test_spec_json_round_trip(tmp_path):
    spec = MaskedMlpSpec(cycle_graph(5), (2, 3, 2, 2, 2), 3, 4, 4)
    params = init_params(spec, 3)
    back, back_params = spec_from_json(spec_to_json(spec, params))
    assert back == spec
    for (w0, b0), (w1, b1) in zip(params, back_params):
        assert np.array_equal(w0, w1) and np.array_equal(b0, b1)
    save_spec(tmp_path / "s.json", spec)
    assert spec_from_json((tmp_path / "s.json").read_text()) == (spec, None)


def test_history_csv_shape():
    text = history_csv([(0, 0.1, 1.5, 0.5), (1, 0.05, 1.0, 0.25)])
    lines = text.splitlines()
    assert lines[0] == "epoch,lr,train_loss,val_top1" and len(lines) == 3
