"""Fixed-first SFS sweep on a 64-node pool scored by a synthetic linear "error".

Writes the similarity matrix to CSV and prints the rows for the three
distance-type features. Takes a few minutes, mostly featurization.

    python scripts/fixed_first_synthetic.py --out runs/fixed_first --k 10 --criterion cv
"""

import argparse
import time
from pathlib import Path

import numpy as np

from graphnas.generators import heterogeneity_augment, ws_flex_sweep
from graphnas.graph import is_connected
from graphnas.metrics import FEATURE_NAMES, FeatureTable, featurize, write_feature_table
from graphnas.surrogate import Dataset, feature_set_similarity, sfs

BLEND = {
    "average_path_length": 1.0,
    "clustering_coefficient": -0.6,
    "heterogeneity": 0.4,
    "laplacian_max": 0.3,
    "global_efficiency": -0.5,
}
TRIO = ("average_path_length", "average_eccentricity", "diameter")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/fixed_first")
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--criterion", choices=["test", "cv"], default="cv")
    ap.add_argument("--noise", type=float, default=0.01)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    pool = heterogeneity_augment(ws_flex_sweep(64, 2, 63, 25, 10, 5, base_seed=0), 1, 40, seed=1)
    graphs = list({r.graph.edges: r.graph for r in pool if is_connected(r.graph)}.values())
    vecs = [featurize(g, seed=0) for g in graphs]
    X = np.array([v.to_array() for v in vecs])
    print(f"featurized {len(graphs)} graphs in {time.perf_counter() - t0:.0f}s", flush=True)

    sd = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
    Z = (X - X.mean(axis=0)) / sd
    y = 0.5 + 0.05 * sum(c * Z[:, FEATURE_NAMES.index(f)] for f, c in BLEND.items())
    y = y + args.noise * np.random.default_rng(0).standard_normal(len(y))
    write_feature_table(FeatureTable(list(range(len(graphs))), vecs, list(y)), out / "features.csv")

    data = Dataset.split(X, y, FEATURE_NAMES, split_seed=2)
    traces = {f: sfs(data, first=f, criterion=args.criterion) for f in FEATURE_NAMES}
    labels, sim = feature_set_similarity(traces, args.k)
    lines = ["feature," + ",".join(labels)]
    lines += [lab + "," + ",".join(f"{v:.6f}" for v in row) for lab, row in zip(labels, sim)]
    (out / "similarity.csv").write_text("\n".join(lines) + "\n")
    for f in TRIO:
        i = labels.index(f)
        others = ", ".join(f"{g}={sim[i, labels.index(g)]:.3f}" for g in TRIO if g != f)
        print(f"{f}: {others}   set: {traces[f].features[1:args.k]}")
    print(f"done in {time.perf_counter() - t0:.0f}s; wrote {out / 'similarity.csv'}")


if __name__ == "__main__":
    main()
