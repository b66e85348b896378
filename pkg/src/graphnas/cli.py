"""Command-line pipeline: generate -> train-toy -> featurize -> fit/sfs -> search -> export-plots.

Every command reads one manifest (YAML or JSON), accepts ``--seed``,
``--workers`` and ``--out`` overrides, and honours ``GRAPHNAS__SECTION__FIELD``
environment variables. Exit codes: 0 success, 2 invalid input, 3 search
converged before its step budget, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import search as srch
from ._io import atomic_write_text, derive_seed
from .config import ExperimentManifest, TrainConfig, load_manifest
from .generators import GraphPool, heterogeneity_augment, load_pool, save_pool, ws_flex_sweep
from .graph import Graph, is_connected, read_edge_list
from .metrics import FEATURE_NAMES, FeatureTable, featurize, read_feature_table, write_feature_table
from .mlp import MaskedMlpSpec, TrainSchedule, gaussian_blobs, history_csv, train_toy
from .surrogate import Dataset, RegressionModel, evaluate, feature_set_similarity, fit_ols, sfs

log = logging.getLogger("graphnas")

EXIT_OK, EXIT_INVALID, EXIT_CONVERGED, EXIT_INTERNAL = 0, 2, 3, 4


class InvalidInput(ValueError):
    pass


# -- artifact layout ----------------------------------------------------------


def _paths(out: Path) -> dict:
    return {
        "pool": out / "pool",
        "features": out / "features.csv",
        "targets": out / "targets.csv",
        "train": out / "train",
        "model": out / "model.json",
        "sfs": out / "sfs",
        "search": out / "search",
        "plots": out / "plots",
        "provenance": out / "provenance.json",
    }


def _record(m: ExperimentManifest, *artifacts) -> None:
    """Note the manifest hash that produced each artifact."""
    out = Path(m.out)
    prov_path = _paths(out)["provenance"]
    prov = json.loads(prov_path.read_text()) if prov_path.exists() else {}
    for a in artifacts:
        prov[str(Path(a).relative_to(out))] = m.digest()
    atomic_write_text(prov_path, json.dumps(prov, indent=2, sort_keys=True) + "\n")
    atomic_write_text(out / "manifests" / f"{m.digest()}.json", json.dumps(json.loads(m.canonical_json()), indent=2) + "\n")


# -- toy measurement ------------------------------------------------------------


@dataclass(frozen=True)
class ToyMeasure:
    """Top-1 error of the graph's masked MLP on a fixed blob dataset, averaged over repeats."""

    cfg: TrainConfig
    seed: int

    def data(self):
        c = self.cfg
        return gaussian_blobs(
            c.n_samples, c.n_classes, c.dim, c.separation, c.noise, self.seed, 0.25, c.clusters_per_class
        )

    def schedule(self) -> TrainSchedule:
        c = self.cfg
        return TrainSchedule(c.epochs, c.lr, c.momentum, True, c.weight_decay, c.batch_size)

    def run(self, g: Graph):
        data = self.data()
        spec = MaskedMlpSpec(g, (self.cfg.units_per_node,) * g.n, data.dim, data.n_classes, self.cfg.n_layers)
        results = [
            train_toy(spec, data, self.schedule(), derive_seed(self.seed, r)) for r in range(self.cfg.repeats)
        ]
        return float(np.mean([r.top1_error for r in results])), results

    def __call__(self, g: Graph) -> float:
        return self.run(g)[0]


# -- helpers ------------------------------------------------------------------------


def _read_targets(path: Path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        return {int(r["graph_id"]): float(r["top1_error"]) for r in csv.DictReader(fh)}


def _dataset(m: ExperimentManifest) -> Dataset:
    p = _paths(Path(m.out))
    if not p["features"].exists():
        raise InvalidInput(f"{p['features']}: feature table not found; run featurize first")
    table = read_feature_table(p["features"])
    targets = table.targets
    if p["targets"].exists():
        tmap = _read_targets(p["targets"])
        targets = [tmap.get(gid) for gid in table.graph_ids]
    if targets is None or all(t is None for t in targets):
        raise InvalidInput("top1_error: feature table has no targets; run train-toy or supply targets.csv")
    keep = [i for i, t in enumerate(targets) if t is not None]
    if len(keep) < 2:
        raise InvalidInput("top1_error: need at least two graphs with targets")
    X = table.matrix()[keep]
    y = np.array([targets[i] for i in keep])
    ids = [table.graph_ids[i] for i in keep]
    return Dataset.split(X, y, FEATURE_NAMES, ids, m.stream("split"))


def _featurize_one(args):
    gid, g, seed = args
    if not is_connected(g):
        return gid, None, 0.0
    t0 = time.perf_counter()
    vec = featurize(g, seed)
    return gid, vec, time.perf_counter() - t0


def _default_features(data: Dataset) -> list:
    sd = data.X[data.train].std(axis=0)
    return [n for n, s in zip(FEATURE_NAMES, sd) if s > 0]


# -- commands ---------------------------------------------------------------------


def cmd_generate(m: ExperimentManifest, args) -> int:
    g = m.generate
    pool = ws_flex_sweep(g.n, g.degree_lo, g.degree_hi, g.degree_steps, g.p_steps, g.seeds_per_cell, m.stream("generate"))
    if g.augment_rounds > 0:
        pool = heterogeneity_augment(pool, g.augment_rounds, g.rewires_per_round, m.stream("augment"), g.max_size)
    elif g.max_size is not None:
        pool = GraphPool(pool.records[: g.max_size])
    d = _paths(Path(m.out))["pool"]
    if d.exists():
        shutil.rmtree(d)
    save_pool(pool, d)
    _record(m, d)
    log.info("wrote %d graphs to %s", len(pool), d)
    return EXIT_OK


def cmd_featurize(m: ExperimentManifest, args) -> int:
    p = _paths(Path(m.out))
    pool_dir = Path(args.pool) if args.pool else p["pool"]
    if not (pool_dir / "pool.manifest").exists():
        raise InvalidInput(f"{pool_dir}: not a pool directory")
    pool = load_pool(pool_dir)
    seed = m.stream("featurize")
    jobs = [(r.graph_id, r.graph, seed) for r in pool]
    if m.workers > 1 and jobs:
        with ProcessPoolExecutor(max_workers=m.workers) as ex:
            results = list(ex.map(_featurize_one, jobs, chunksize=max(1, len(jobs) // (4 * m.workers))))
    else:
        results = [_featurize_one(j) for j in jobs]
    tmap = _read_targets(p["targets"]) if p["targets"].exists() else None
    ids, vecs, times = [], [], []
    for gid, vec, dt in results:
        if vec is None:
            log.warning("skipping disconnected graph %d", gid)
            continue
        ids.append(gid)
        vecs.append(vec)
        times.append(dt)
    targets = [tmap.get(i) for i in ids] if tmap is not None else None
    write_feature_table(FeatureTable(ids, vecs, targets, times), p["features"])
    _record(m, p["features"])
    log.info("featurised %d of %d graphs", len(ids), len(pool))
    return EXIT_OK


def cmd_train_toy(m: ExperimentManifest, args) -> int:
    p = _paths(Path(m.out))
    pool = load_pool(p["pool"])
    wanted = set(args.graph_id) if args.graph_id else None
    measure = ToyMeasure(m.train, m.stream("train"))
    rows = []
    for rec in pool:
        if wanted is not None and rec.graph_id not in wanted:
            continue
        err, results = measure.run(rec.graph)
        rows.append((rec.graph_id, err))
        atomic_write_text(p["train"] / f"{rec.graph_id}.csv", history_csv(results[0].history))
    if p["targets"].exists() and wanted is not None:
        merged = _read_targets(p["targets"])
        merged.update(dict(rows))
        rows = sorted(merged.items())
    text = "graph_id,top1_error\n" + "".join(f"{gid},{err!r}\n" for gid, err in rows)
    atomic_write_text(p["targets"], text)
    _record(m, p["targets"], p["train"])
    log.info("trained %d graphs", len(rows))
    return EXIT_OK


def cmd_fit(m: ExperimentManifest, args) -> int:
    data = _dataset(m)
    subset = m.surrogate.features or _default_features(data)
    model = fit_ols(data, subset)
    test_mse, test_r = evaluate(model, data, "test")
    train_mse, _ = evaluate(model, data, "train")
    model.metrics = {"test_mse": test_mse, "test_pearson": test_r, "train_mse": train_mse}
    out = _paths(Path(m.out))["model"]
    model.save(out)
    _record(m, out)
    log.info("fit %d features: test mse %.4g, r %.3f", len(subset), test_mse, test_r)
    return EXIT_OK


def cmd_sfs(m: ExperimentManifest, args) -> int:
    data = _dataset(m)
    s = m.surrogate
    cands = s.features or _default_features(data)
    d = _paths(Path(m.out))["sfs"]
    trace = sfs(data, cands, criterion=s.criterion)
    atomic_write_text(d / "trace.csv", trace.to_csv())
    k = min(s.k, len(trace))
    model = trace.steps[k - 1].model
    model.save(d / "model.json")
    written = [d / "trace.csv", d / "model.json"]
    if s.fixed_first_sweep:
        traces = {}
        for f in cands:
            traces[f] = sfs(data, cands, first=f, criterion=s.criterion)
            atomic_write_text(d / "fixed_first" / f"{f}.csv", traces[f].to_csv())
        labels, sim = feature_set_similarity(traces, k)
        lines = ["feature," + ",".join(labels)]
        lines += [lab + "," + ",".join(repr(float(v)) for v in row) for lab, row in zip(labels, sim)]
        atomic_write_text(d / "similarity.csv", "\n".join(lines) + "\n")
        written += [d / "fixed_first", d / "similarity.csv"]
    _record(m, *written)
    log.info("sfs order: %s", ", ".join(trace.features[:k]))
    return EXIT_OK


def _start_graph(m: ExperimentManifest, start: str):
    p = _paths(Path(m.out))
    if start.endswith(".edges"):
        return read_edge_list(start), None
    pool = {r.graph_id: r.graph for r in load_pool(p["pool"])}
    if start in ("highest", "lowest"):
        data = _dataset(m)
        order = np.argsort(data.y, kind="stable")
        i = int(order[-1] if start == "highest" else order[0])
        gid = data.graph_ids[i]
    else:
        try:
            gid = int(start)
        except ValueError:
            raise InvalidInput(f"search.start: expected highest, lowest, a graph id or an .edges path, got {start!r}")
    if gid not in pool:
        raise InvalidInput(f"search.start: graph {gid} not in pool")
    return pool[gid], gid


def cmd_search(m: ExperimentManifest, args) -> int:
    p = _paths(Path(m.out))
    model_path = Path(args.model) if args.model else p["model"]
    if not model_path.exists():
        raise InvalidInput(f"{model_path}: model not found")
    model = RegressionModel.load(model_path)
    unknown = [f for f in model.feature_subset if f not in FEATURE_NAMES]
    if unknown:
        raise InvalidInput(f"model features not produced by the featurizer: {unknown}")
    if len(model.coefficients) != len(model.feature_subset):
        raise InvalidInput("model: coefficient count does not match its feature list")
    s = m.search
    g0, gid = _start_graph(m, args.start or s.start)
    config = srch.SearchConfig(
        s.epsilon, s.max_steps, s.max_proposals_per_step, s.mode, m.stream("search"), m.stream("featurize")
    )
    measure = ToyMeasure(m.train, m.stream("train")) if args.validate == "toy" else None
    d = p["search"]
    trace = srch.search(g0, model, config, graph_id=gid)
    if measure is not None:
        trace = srch.validate_trace(trace, measure)
    srch.save_trace(trace, d / "trace.jsonl")
    atomic_write_text(d / "path.csv", srch.path_csv(trace))
    written = [d / "trace.jsonl", d / "path.csv"]
    n_seeds = args.seeds if args.seeds is not None else s.seeds
    if n_seeds > 1:
        rows, traces = srch.multi_seed_statistics(g0, model, config, n_seeds, s.bucket, measure, m.workers)
        atomic_write_text(d / "buckets.csv", srch.buckets_csv(rows))
        for i, tr in enumerate(traces):
            srch.save_trace(tr, d / "seeds" / f"seed_{i:04d}.jsonl")
        written += [d / "buckets.csv", d / "seeds"]
    _record(m, *written)
    log.info("search %s after %d steps", trace.status, len(trace.steps))
    if trace.status == srch.CONVERGED_LOCAL and n_seeds <= 1:
        return EXIT_CONVERGED
    return EXIT_OK


def _copy(src: Path, dst: Path) -> None:
    atomic_write_text(dst, src.read_text(encoding="utf-8"))


def cmd_export_plots(m: ExperimentManifest, args) -> int:
    p = _paths(Path(m.out))
    src = Path(args.artifacts) if args.artifacts else Path(m.out)
    sp = _paths(src)
    d = p["plots"]
    if d.exists():
        shutil.rmtree(d)
    d.mkdir(parents=True)
    if sp["features"].exists():
        table = read_feature_table(sp["features"])
        targets = table.targets
        if sp["targets"].exists():
            tmap = _read_targets(sp["targets"])
            targets = [tmap.get(g) for g in table.graph_ids]
        mat = table.matrix()
        for j, name in enumerate(FEATURE_NAMES):
            lines = ["graph_id,value,top1_error"]
            for i, gid in enumerate(table.graph_ids):
                t = "" if targets is None or targets[i] is None else repr(float(targets[i]))
                lines.append(f"{gid},{float(mat[i, j])!r},{t}")
            atomic_write_text(d / "scatter" / f"{name}.csv", "\n".join(lines) + "\n")
        if table.timings is not None:
            lines = ["graph_id,feature_time_s"] + [f"{g},{t!r}" for g, t in zip(table.graph_ids, table.timings)]
            atomic_write_text(d / "feature_cost.csv", "\n".join(lines) + "\n")
    if (sp["sfs"] / "trace.csv").exists():
        _copy(sp["sfs"] / "trace.csv", d / "sfs_curve.csv")
    if (sp["sfs"] / "similarity.csv").exists():
        _copy(sp["sfs"] / "similarity.csv", d / "similarity.csv")
    for f in sorted((sp["sfs"] / "fixed_first").glob("*.csv")):
        _copy(f, d / "fixed_first" / f.name)
    if sp["search"].exists():
        for f in sorted(sp["search"].rglob("*.jsonl")):
            rel = f.relative_to(sp["search"]).with_suffix("")
            tag = "_".join(rel.parts)
            atomic_write_text(d / "paths" / f"{tag}.csv", srch.path_csv(srch.load_trace(f)))
        if (sp["search"] / "buckets.csv").exists():
            _copy(sp["search"] / "buckets.csv", d / "buckets.csv")
    _record(m, d)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "featurize": cmd_featurize,
    "train-toy": cmd_train_toy,
    "fit": cmd_fit,
    "sfs": cmd_sfs,
    "search": cmd_search,
    "export-plots": cmd_export_plots,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="YAML or JSON experiment manifest")
    common.add_argument("--seed", type=int, help="manifest-level seed")
    common.add_argument("--workers", type=int, help="process pool size for featurize / multi-seed search")
    common.add_argument("--out", help="artifact directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="graphnas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="WS-flex pool")
    f = sub.add_parser("featurize", parents=[common], help="26-feature table")
    f.add_argument("--pool", help="pool directory (default: <out>/pool)")
    t = sub.add_parser("train-toy", parents=[common], help="toy top-1 errors for pool graphs")
    t.add_argument("--graph-id", type=int, nargs="*", help="restrict to these graph ids")
    sub.add_parser("fit", parents=[common], help="OLS surrogate")
    sub.add_parser("sfs", parents=[common], help="forward selection and fixed-first sweep")
    s = sub.add_parser("search", parents=[common], help="surrogate-guided rewiring")
    s.add_argument("--model", help="model JSON (default: <out>/model.json)")
    s.add_argument("--start", help="highest | lowest | graph id | .edges file")
    s.add_argument("--validate", choices=["toy"], help="train each accepted graph and record its error")
    s.add_argument("--seeds", type=int, help="independent search runs for bucketed statistics")
    e = sub.add_parser("export-plots", parents=[common], help="CSV bundle for figures")
    e.add_argument("--artifacts", help="artifact directory to read (default: <out>)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        m = load_manifest(args.manifest, {"seed": args.seed, "workers": args.workers, "out": args.out})
        return COMMANDS[args.command](m, args)
    except (ValueError, KeyError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
