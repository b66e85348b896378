"""Generate a WS-flex pool and report how much of the degree/heterogeneity plane it covers.

    python scripts/pool_coverage.py --n 64 --degree-steps 31 --p-steps 193 --rounds 1
"""

import argparse
import time

import numpy as np

from graphnas.generators import heterogeneity_augment, ws_flex_sweep
from graphnas.graph import is_connected
from graphnas.metrics import degree_statistics


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--degree-steps", type=int, default=31)
    ap.add_argument("--p-steps", type=int, default=193)
    ap.add_argument("--seeds-per-cell", type=int, default=1)
    ap.add_argument("--rounds", type=int, default=1)
    ap.add_argument("--rewires", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    pool = ws_flex_sweep(args.n, 2, args.n - 1, args.degree_steps, args.p_steps, args.seeds_per_cell, args.seed)
    swept = len(pool)
    pool = heterogeneity_augment(pool, args.rounds, args.rewires, seed=args.seed + 1)
    distinct = {r.graph.edges: r.graph for r in pool if is_connected(r.graph)}
    stats = np.array([degree_statistics(g)[:2] for g in distinct.values()])
    print(f"{swept} swept + {len(pool) - swept} rewired = {len(pool)} graphs, {len(distinct)} distinct connected")
    print(f"2m/n          {stats[:, 0].min():.3f} .. {stats[:, 0].max():.3f}")
    print(f"heterogeneity {stats[:, 1].min():.3f} .. {stats[:, 1].max():.3f}")
    hist, edges = np.histogram(stats[:, 1], bins=8)
    for c, lo, hi in zip(hist, edges, edges[1:]):
        print(f"  [{lo:5.2f}, {hi:5.2f})  {c}")
    print(f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
