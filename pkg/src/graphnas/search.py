"""Surrogate-guided greedy rewiring.

Starting from a graph, repeatedly draw one of four rewiring operators, score
the rewired candidate with the surrogate, and keep it only when the predicted
score moves in the configured direction by at least a relative ``epsilon``.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, derive_seed
from .graph import Graph, bridges, is_connected
from .metrics import compute_features
from .surrogate import RegressionModel

OP_KINDS = ("ADD_EDGE", "REMOVE_EDGE", "DOUBLE_SWAP", "RANDOM_REWIRE")
MINIMIZE = "MINIMIZE"
MAXIMIZE = "MAXIMIZE"
COMPLETED = "COMPLETED"
CONVERGED_LOCAL = "CONVERGED_LOCAL"


class NotApplicable(Exception):
    """No valid operand for the operator on this graph."""


@dataclass(frozen=True)
class RewireOp:
    kind: str
    operands: tuple


def apply_op(g: Graph, op: RewireOp) -> Graph:
    o = op.operands
    if op.kind == "ADD_EDGE":
        return g.with_changes(add=[o])
    if op.kind == "REMOVE_EDGE":
        return g.with_changes(remove=[o])
    if op.kind == "DOUBLE_SWAP":
        u, v, x, y = o
        return g.with_changes(add=[(u, x), (v, y)], remove=[(u, v), (x, y)])
    if op.kind == "RANDOM_REWIRE":
        u, v, w = o
        return g.with_changes(add=[(u, w)], remove=[(u, v)])
    raise ValueError(f"unknown operator {op.kind!r}")


def propose(g: Graph, kind: str, rng, retries: int = 100) -> tuple[Graph, RewireOp]:
    """Apply one random operator of ``kind``; result is simple and connected.

    Raises :class:`NotApplicable` when no valid operand turns up.
    """
    adj = g.adjacency
    if kind == "ADD_EDGE":
        iu, ju = np.nonzero(np.triu(~adj, 1))
        if len(iu) == 0:
            raise NotApplicable("graph is complete")
        i = int(rng.integers(len(iu)))
        op = RewireOp(kind, (int(iu[i]), int(ju[i])))
        return apply_op(g, op), op
    if kind == "REMOVE_EDGE":
        safe = sorted(g.edges - bridges(g))
        if not safe:
            raise NotApplicable("every edge is a bridge")
        op = RewireOp(kind, safe[int(rng.integers(len(safe)))])
        return apply_op(g, op), op
    edges = g.sorted_edges()
    if kind == "DOUBLE_SWAP":
        if len(edges) < 2:
            raise NotApplicable("need two edges")
        for _ in range(retries):
            i, j = rng.choice(len(edges), size=2, replace=False)
            u, v = edges[i]
            x, y = edges[j]
            if rng.random() < 0.5:
                x, y = y, x
            if len({u, v, x, y}) < 4 or adj[u, x] or adj[v, y]:
                continue
            op = RewireOp(kind, (u, v, x, y))
            cand = apply_op(g, op)
            if is_connected(cand):
                return cand, op
        raise NotApplicable("no valid double swap found")
    if kind == "RANDOM_REWIRE":
        if not edges:
            raise NotApplicable("no edges")
        for _ in range(retries):
            u, v = edges[int(rng.integers(len(edges)))]
            if rng.random() < 0.5:
                u, v = v, u
            free = np.flatnonzero(~adj[u])
            free = free[free != u]
            if len(free) == 0:
                continue
            w = int(free[int(rng.integers(len(free)))])
            op = RewireOp(kind, (u, v, w))
            cand = apply_op(g, op)
            if is_connected(cand):
                return cand, op
        raise NotApplicable("no valid rewire found")
    raise ValueError(f"unknown operator {kind!r}")


@dataclass(frozen=True)
class SearchConfig:
    epsilon: float = 0.01
    max_steps: int = 10
    max_proposals_per_step: int = 200
    mode: str = MINIMIZE
    seed: int = 0
    feature_seed: int = 0
    kinds: tuple = OP_KINDS

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.mode not in (MINIMIZE, MAXIMIZE):
            raise ValueError(f"mode must be {MINIMIZE} or {MAXIMIZE}")
        bad = set(self.kinds) - set(OP_KINDS)
        if bad or not self.kinds:
            raise ValueError(f"invalid operator kinds: {sorted(bad)}")


def accepts(prev: float, new: float, epsilon: float, mode: str) -> bool:
    gain = prev - new if mode == MINIMIZE else new - prev
    return gain > 0 and gain >= epsilon * abs(prev)


@dataclass
class TraceStep:
    step: int
    op: RewireOp
    predicted: float
    rejected_count: int
    graph: Graph = field(repr=False)
    cumulative_feature_time_ms: float = field(default=0.0, compare=False)
    measured: float | None = None
    error: str | None = None


@dataclass
class SearchTrace:
    initial_graph: Graph = field(repr=False)
    initial_predicted: float
    mode: str
    steps: list = field(default_factory=list)
    status: str = COMPLETED
    graph_id: int | None = None
    initial_measured: float | None = None
    wall_time_s: float = field(default=0.0, compare=False)

    @property
    def final_graph(self) -> Graph:
        return self.steps[-1].graph if self.steps else self.initial_graph

    def graphs(self) -> list:
        return [self.initial_graph] + [s.graph for s in self.steps]

    def predicted_path(self) -> list:
        return [self.initial_predicted] + [s.predicted for s in self.steps]

    def measured_path(self) -> list:
        return [self.initial_measured] + [s.measured for s in self.steps]


def model_featurizer(model: RegressionModel, feature_seed: int = 0):
    def score(g: Graph) -> float:
        if not model.feature_subset:
            return model.intercept
        return model.predict_features(compute_features(g, model.feature_subset, feature_seed))

    return score


def search(g0: Graph, model: RegressionModel, config: SearchConfig, graph_id=None, scorer=None) -> SearchTrace:
    """Greedy first-accept rewiring under the surrogate ``model``.

    Stops after ``config.max_steps`` accepted steps, or with status
    ``CONVERGED_LOCAL`` when a step exhausts its proposal budget or no
    operator applies.
    """
    if not is_connected(g0):
        raise ValueError("start graph must be connected")
    scorer = scorer or model_featurizer(model, config.feature_seed)
    rng = np.random.default_rng(config.seed)
    t_start = time.perf_counter()
    prev = scorer(g0)
    trace = SearchTrace(g0, prev, config.mode, graph_id=graph_id)
    g = g0
    feature_ms = 0.0
    while len(trace.steps) < config.max_steps:
        applicable = list(config.kinds)
        rejected = 0
        accepted = False
        while rejected < config.max_proposals_per_step and applicable:
            kind = applicable[int(rng.integers(len(applicable)))]
            try:
                cand, op = propose(g, kind, rng)
            except NotApplicable:
                applicable.remove(kind)
                continue
            t0 = time.perf_counter()
            score = scorer(cand)
            feature_ms += (time.perf_counter() - t0) * 1e3
            if accepts(prev, score, config.epsilon, config.mode):
                trace.steps.append(TraceStep(len(trace.steps) + 1, op, score, rejected, cand, feature_ms))
                g, prev = cand, score
                accepted = True
                break
            rejected += 1
        if not accepted:
            trace.status = CONVERGED_LOCAL
            break
    trace.wall_time_s = time.perf_counter() - t_start
    return trace


def validate_trace(trace: SearchTrace, measure) -> SearchTrace:
    """Attach ``measure(graph)`` to the start graph and every accepted step.

    A failing callback marks that step with its error and leaves
    ``measured`` empty; later steps still run.
    """

    def run(g):
        try:
            return float(measure(g)), None
        except Exception as exc:  # noqa: BLE001 - reported per step
            return None, f"{type(exc).__name__}: {exc}"

    m0, _ = run(trace.initial_graph)
    steps = []
    for s in trace.steps:
        val, err = run(s.graph)
        steps.append(replace(s, measured=val, error=err))
    return replace(trace, steps=steps, initial_measured=m0)


# -- multi-seed statistics --------------------------------------------------


@dataclass(frozen=True)
class BucketRow:
    bucket: int
    step_lo: int
    step_hi: int
    runs: int
    q1: float
    median: float
    q3: float
    measured_runs: int = 0
    measured_q1: float | None = None
    measured_median: float | None = None
    measured_q3: float | None = None


def _run_seed(args):
    g0, model, config, measure = args
    trace = search(g0, model, config)
    if measure is not None:
        trace = validate_trace(trace, measure)
    return trace


def bucket_summary(traces, bucket: int) -> list:
    """Per step range: quartiles over runs of each run's mean score in that range."""
    per_bucket: dict[int, list] = {}
    per_bucket_m: dict[int, list] = {}
    for tr in traces:
        groups: dict[int, list] = {}
        groups_m: dict[int, list] = {}
        for s in tr.steps:
            b = (s.step - 1) // bucket
            groups.setdefault(b, []).append(s.predicted)
            if s.measured is not None:
                groups_m.setdefault(b, []).append(s.measured)
        for b, vals in groups.items():
            per_bucket.setdefault(b, []).append(float(np.mean(vals)))
        for b, vals in groups_m.items():
            per_bucket_m.setdefault(b, []).append(float(np.mean(vals)))
    rows = []
    for b in sorted(per_bucket):
        q1, med, q3 = np.percentile(per_bucket[b], [25, 50, 75])
        mq = per_bucket_m.get(b)
        mvals = np.percentile(mq, [25, 50, 75]) if mq else (None, None, None)
        rows.append(
            BucketRow(
                b,
                b * bucket + 1,
                (b + 1) * bucket,
                len(per_bucket[b]),
                float(q1),
                float(med),
                float(q3),
                len(mq) if mq else 0,
                *(None if v is None else float(v) for v in mvals),
            )
        )
    return rows


def multi_seed_statistics(
    g0: Graph, model: RegressionModel, config: SearchConfig, n_seeds: int, bucket: int, measure=None, workers: int = 1
) -> tuple[list, list]:
    """Run ``n_seeds`` searches with derived seeds; return (bucket rows, traces)."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    jobs = [(g0, model, replace(config, seed=derive_seed(config.seed, i)), measure) for i in range(n_seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            traces = list(ex.map(_run_seed, jobs))
    else:
        traces = [_run_seed(j) for j in jobs]
    return bucket_summary(traces, bucket), traces


# -- persistence ------------------------------------------------------------


def trace_to_jsonl(trace: SearchTrace) -> str:
    """Step 0 carries the start graph; later records carry the applied operator."""
    head = {
        "step": 0,
        "op_kind": None,
        "operands": [],
        "predicted": trace.initial_predicted,
        "measured": trace.initial_measured,
        "rejected_count": 0,
        "cumulative_feature_time_ms": 0.0,
        "mode": trace.mode,
        "status": trace.status,
        "graph_id": trace.graph_id,
        "wall_time_s": trace.wall_time_s,
        "n": trace.initial_graph.n,
        "edges": [list(e) for e in trace.initial_graph.sorted_edges()],
    }
    lines = [json.dumps(head, separators=(",", ":"))]
    for s in trace.steps:
        rec = {
            "step": s.step,
            "op_kind": s.op.kind,
            "operands": list(s.op.operands),
            "predicted": s.predicted,
            "measured": s.measured,
            "rejected_count": s.rejected_count,
            "cumulative_feature_time_ms": s.cumulative_feature_time_ms,
        }
        if s.error is not None:
            rec["error"] = s.error
        lines.append(json.dumps(rec, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def trace_from_jsonl(text: str) -> SearchTrace:
    recs = [json.loads(line) for line in text.splitlines() if line.strip()]
    head = recs[0]
    g = Graph.from_edges(head["n"], [tuple(e) for e in head["edges"]])
    trace = SearchTrace(
        g,
        head["predicted"],
        head["mode"],
        status=head["status"],
        graph_id=head["graph_id"],
        initial_measured=head["measured"],
        wall_time_s=head["wall_time_s"],
    )
    for r in recs[1:]:
        op = RewireOp(r["op_kind"], tuple(r["operands"]))
        g = apply_op(g, op)
        trace.steps.append(
            TraceStep(
                r["step"],
                op,
                r["predicted"],
                r["rejected_count"],
                g,
                r["cumulative_feature_time_ms"],
                r["measured"],
                r.get("error"),
            )
        )
    return trace


def save_trace(trace: SearchTrace, path) -> None:
    atomic_write_text(path, trace_to_jsonl(trace))


def load_trace(path) -> SearchTrace:
    return trace_from_jsonl(Path(path).read_text(encoding="utf-8"))


def path_csv(trace: SearchTrace) -> str:
    """step, predicted, measured, cumulative feature time (ms)."""
    lines = ["step,predicted,measured,cumulative_feature_time_ms"]
    m0 = "" if trace.initial_measured is None else repr(trace.initial_measured)
    lines.append(f"0,{trace.initial_predicted!r},{m0},0.0")
    for s in trace.steps:
        m = "" if s.measured is None else repr(s.measured)
        lines.append(f"{s.step},{s.predicted!r},{m},{s.cumulative_feature_time_ms!r}")
    return "\n".join(lines) + "\n"


def buckets_csv(rows) -> str:
    cols = [
        "bucket",
        "step_lo",
        "step_hi",
        "runs",
        "q1",
        "median",
        "q3",
        "measured_runs",
        "measured_q1",
        "measured_median",
        "measured_q3",
    ]
    lines = [",".join(cols)]
    for r in rows:
        vals = [getattr(r, c) for c in cols]
        lines.append(",".join("" if v is None else repr(v) for v in vals))
    return "\n".join(lines) + "\n"
