"""Masked MLPs realised from relational graphs, plus a small numpy trainer.

Each graph node owns a group of hidden units. Between two hidden layers the
weight block from group ``j`` to group ``i`` is trainable iff ``i == j`` or
``(i, j)`` is an edge; every other block is held at zero. Input and output
layers are dense.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._io import atomic_write_text
from .graph import Graph


@dataclass(frozen=True)
class MaskedMlpSpec:
    graph: Graph
    group_sizes: tuple
    input_dim: int
    output_dim: int
    n_layers: int = 5  # weight layers; the n_layers - 2 middle ones are masked

    def __post_init__(self):
        if len(self.group_sizes) != self.graph.n:
            raise ValueError("need one group size per graph node")
        if min(self.group_sizes) < 1:
            raise ValueError("every node needs at least one unit")
        if self.n_layers < 2:
            raise ValueError("n_layers must be >= 2")

    @property
    def hidden_width(self) -> int:
        return int(sum(self.group_sizes))

    @property
    def units_per_node(self) -> int | None:
        """The common group size, or None when groups differ."""
        s = set(self.group_sizes)
        return self.group_sizes[0] if len(s) == 1 else None

    @cached_property
    def block_mask(self) -> np.ndarray:
        return self.graph.adjacency | np.eye(self.graph.n, dtype=bool)

    @cached_property
    def mask(self) -> np.ndarray:
        sizes = np.asarray(self.group_sizes)
        m = np.repeat(np.repeat(self.block_mask, sizes, axis=0), sizes, axis=1)
        return m.astype(np.float64)

    def layer_shapes(self) -> list:
        w = self.hidden_width
        return [(w, self.input_dim)] + [(w, w)] * (self.n_layers - 2) + [(self.output_dim, w)]

    def layer_mask(self, layer: int):
        """Mask for weight layer ``layer`` (None for the dense end layers)."""
        return self.mask if 0 < layer < self.n_layers - 1 else None


def build_masked_mlp(g: Graph, baseline_width: int, n_layers: int = 5, input_dim: int = 3072, output_dim: int = 10):
    if baseline_width % g.n:
        raise ValueError(f"width {baseline_width} is not divisible by {g.n} nodes")
    return MaskedMlpSpec(g, (baseline_width // g.n,) * g.n, input_dim, output_dim, n_layers)


def balanced_groups(width: int, n: int) -> tuple:
    """Split ``width`` units over ``n`` nodes; sizes differ by at most one."""
    base, extra = divmod(width, n)
    return tuple(base + 1 if i < extra else base for i in range(n))


# -- FLOPs ------------------------------------------------------------------


@dataclass(frozen=True)
class FlopBudget:
    flops: int
    per_layer: tuple = ()


def dense_flops(fan_in: int, fan_out: int) -> int:
    return 2 * fan_in * fan_out


def count_flops(spec: MaskedMlpSpec) -> FlopBudget:
    """One multiply and one add per active weight, summed over layers."""
    sizes = np.asarray(spec.group_sizes, dtype=np.int64)
    active = int(sizes @ spec.block_mask.astype(np.int64) @ sizes)
    per = []
    for layer, (out, inp) in enumerate(spec.layer_shapes()):
        per.append(2 * active if spec.layer_mask(layer) is not None else dense_flops(inp, out))
    return FlopBudget(int(sum(per)), tuple(per))


def match_flop_budget(
    g: Graph, reference: FlopBudget, n_layers: int = 5, input_dim: int = 3072, output_dim: int = 10
) -> MaskedMlpSpec:
    """Hidden width whose FLOP count is closest to ``reference``.

    Units are spread over nodes as evenly as possible, so the width moves in
    steps of one unit and the match is usually far tighter than 5%.
    """

    def spec_for(w):
        return MaskedMlpSpec(g, balanced_groups(w, g.n), input_dim, output_dim, n_layers)

    def flops(w):
        return count_flops(spec_for(w)).flops

    lo, hi = g.n, g.n
    while flops(hi) < reference.flops:
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if flops(mid) < reference.flops:
            lo = mid
        else:
            hi = mid
    best = min((w for w in {lo, hi} if w >= g.n), key=lambda w: (abs(flops(w) - reference.flops), w))
    return spec_for(best)


# -- forward / backward -----------------------------------------------------


def init_params(spec: MaskedMlpSpec, seed: int = 0) -> list:
    """He-normal weights scaled by each row's active fan-in; zero biases."""
    rng = np.random.default_rng(seed)
    params = []
    for layer, (out, inp) in enumerate(spec.layer_shapes()):
        mask = spec.layer_mask(layer)
        fan_in = mask.sum(axis=1, keepdims=True) if mask is not None else np.full((out, 1), float(inp))
        w = rng.standard_normal((out, inp)) * np.sqrt(2.0 / fan_in)
        if mask is not None:
            w *= mask
        params.append((w, np.zeros(out)))
    return params


def _check(spec: MaskedMlpSpec, params):
    shapes = spec.layer_shapes()
    if len(params) != len(shapes):
        raise ValueError(f"expected {len(shapes)} layers, got {len(params)}")
    for (w, b), shp in zip(params, shapes):
        if w.shape != shp or b.shape != (shp[0],):
            raise ValueError(f"parameter shape {w.shape} does not match {shp}")


def forward(spec: MaskedMlpSpec, params, x):
    """Return (logits, cache). ReLU between layers, identity at the output."""
    _check(spec, params)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"input must be (batch, {spec.input_dim})")
    cache = []
    h = x
    last = len(params) - 1
    for layer, (w, b) in enumerate(params):
        mask = spec.layer_mask(layer)
        we = w * mask if mask is not None else w
        z = h @ we.T + b
        cache.append((h, z))
        h = z if layer == last else np.maximum(z, 0.0)
    return h, cache


def backward(spec: MaskedMlpSpec, params, cache, dlogits) -> list:
    """Gradients ``[(dW, db), ...]`` with masked positions forced to zero."""
    grads = [None] * len(params)
    dz = np.asarray(dlogits, dtype=np.float64)
    for layer in range(len(params) - 1, -1, -1):
        w, _ = params[layer]
        h, _ = cache[layer]
        mask = spec.layer_mask(layer)
        dw = dz.T @ h
        if mask is not None:
            dw *= mask
        grads[layer] = (dw, dz.sum(axis=0))
        if layer:
            we = w * mask if mask is not None else w
            dh = dz @ we
            dz = dh * (cache[layer - 1][1] > 0)
    return grads


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


# -- toy data and training --------------------------------------------------


@dataclass
class ToyData:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray

    @property
    def n_classes(self) -> int:
        return int(max(self.y_train.max(), self.y_val.max())) + 1

    @property
    def dim(self) -> int:
        return self.x_train.shape[1]


def _split(x, y, val_fraction, rng) -> ToyData:
    order = rng.permutation(len(y))
    n_val = max(1, int(round(val_fraction * len(y))))
    v, t = order[:n_val], order[n_val:]
    return ToyData(x[t], y[t], x[v], y[v])


def gaussian_blobs(
    n_samples=1000, n_classes=2, dim=2, separation=4.0, noise=1.0, seed=0, val_fraction=0.2, clusters_per_class=1
) -> ToyData:
    """Isotropic Gaussian clusters with centres drawn at scale ``separation``.

    With ``clusters_per_class > 1`` each class is a mixture of clusters, which
    makes the task non-linear.
    """
    rng = np.random.default_rng(seed)
    n_clusters = n_classes * clusters_per_class
    centres = rng.standard_normal((n_clusters, dim)) * separation
    cluster = rng.integers(n_clusters, size=n_samples)
    y = cluster % n_classes
    x = centres[cluster] + noise * rng.standard_normal((n_samples, dim))
    return _split(x, y, val_fraction, rng)


def concentric_rings(n_samples=1000, n_classes=2, noise=0.1, seed=0, val_fraction=0.2) -> ToyData:
    rng = np.random.default_rng(seed)
    y = rng.integers(n_classes, size=n_samples)
    theta = rng.uniform(0, 2 * np.pi, n_samples)
    r = 1.0 + y + noise * rng.standard_normal(n_samples)
    x = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
    return _split(x, y, val_fraction, rng)


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 50
    lr: float = 0.1
    momentum: float = 0.9
    nesterov: bool = True
    weight_decay: float = 5e-4
    batch_size: int = 128


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    params: list
    top1_error: float
    history: list = field(default_factory=list)  # (epoch, lr, train_loss, val_top1)


def top1_error(spec, params, x, y) -> float:
    logits, _ = forward(spec, params, x)
    return float(np.mean(logits.argmax(axis=1) != y))


def train_toy(spec: MaskedMlpSpec, data: ToyData, schedule: TrainSchedule = TrainSchedule(), seed: int = 0,
              params=None) -> TrainResult:
    """SGD with (Nesterov) momentum, cosine-annealed step size and weight decay.

    Returns held-out top-1 error. Masked weights stay exactly zero.
    """
    if data.n_classes < 2:
        raise ValueError("need at least two classes")
    rng = np.random.default_rng(seed)
    params = [(w.copy(), b.copy()) for w, b in (params or init_params(spec, int(rng.integers(2**63))))]
    bufs = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    masks = [spec.layer_mask(i) for i in range(len(params))]
    history = []
    n = len(data.y_train)
    mu, wd = schedule.momentum, schedule.weight_decay
    for epoch in range(schedule.epochs):
        lr = 0.5 * schedule.lr * (1.0 + math.cos(math.pi * epoch / schedule.epochs))
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            logits, cache = forward(spec, params, data.x_train[idx])
            loss, dlogits = softmax_cross_entropy(logits, data.y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
            total += loss * len(idx)
            grads = backward(spec, params, cache, dlogits)
            for i, ((w, b), (gw, gb), (vw, vb)) in enumerate(zip(params, grads, bufs)):
                for p, g, v in ((w, gw, vw), (b, gb, vb)):
                    g = g + wd * p
                    v *= mu
                    v += g
                    step = g + mu * v if schedule.nesterov else v
                    p -= lr * step
                if masks[i] is not None:
                    w *= masks[i]
        history.append((epoch, lr, total / n, top1_error(spec, params, data.x_val, data.y_val)))
    return TrainResult(params, top1_error(spec, params, data.x_val, data.y_val), history)


def history_csv(history) -> str:
    lines = ["epoch,lr,train_loss,val_top1"]
    lines += [f"{e},{lr!r},{loss!r},{err!r}" for e, lr, loss, err in history]
    return "\n".join(lines) + "\n"


# -- persistence ------------------------------------------------------------


def _mask_to_hex(block: np.ndarray) -> str:
    bits = "".join("1" if b else "0" for b in block.ravel())
    return format(int(bits, 2), "x") if bits else "0"


def _hex_to_mask(text: str, n: int) -> np.ndarray:
    bits = bin(int(text, 16))[2:].zfill(n * n)
    return np.array([c == "1" for c in bits], dtype=bool).reshape(n, n)


def spec_to_json(spec: MaskedMlpSpec, params=None) -> str:
    doc = {
        "n": spec.graph.n,
        "edges": [list(e) for e in spec.graph.sorted_edges()],
        "block_mask": _mask_to_hex(spec.block_mask),
        "group_sizes": list(spec.group_sizes),
        "input_dim": spec.input_dim,
        "output_dim": spec.output_dim,
        "n_layers": spec.n_layers,
        "params": None
        if params is None
        else [{"shape": list(w.shape), "W": w.ravel().tolist(), "b": b.tolist()} for w, b in params],
    }
    return json.dumps(doc) + "\n"


def spec_from_json(text: str):
    doc = json.loads(text)
    g = Graph.from_edges(doc["n"], [tuple(e) for e in doc["edges"]])
    spec = MaskedMlpSpec(g, tuple(doc["group_sizes"]), doc["input_dim"], doc["output_dim"], doc["n_layers"])
    if not np.array_equal(_hex_to_mask(doc["block_mask"], g.n), spec.block_mask):
        raise ValueError("stored block mask disagrees with the graph")
    params = None
    if doc["params"] is not None:
        params = [
            (np.array(p["W"], dtype=np.float64).reshape(p["shape"]), np.array(p["b"], dtype=np.float64))
            for p in doc["params"]
        ]
    return spec, params


def save_spec(path, spec, params=None) -> None:
    atomic_write_text(path, spec_to_json(spec, params))
