"""Run the whole CLI pipeline on one manifest and print a short report.

    python scripts/desk_pipeline.py scripts/manifests/desk.yaml [--out runs/desk]
"""

import argparse
import csv
import sys
import time
from pathlib import Path

from graphnas.cli import main as graphnas
from graphnas.search import load_trace
from graphnas.surrogate import pearson

STEPS = [
    ("generate",),
    ("train-toy",),
    ("featurize",),
    ("sfs",),
    ("fit",),
    ("search", "--validate", "toy"),
    ("export-plots",),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("manifest")
    ap.add_argument("--out")
    ap.add_argument("--search-model", default="sfs/model.json", help="model path relative to the run directory")
    args = ap.parse_args()

    from graphnas.config import load_manifest

    out = Path(args.out or load_manifest(args.manifest).out)
    common = ["--manifest", args.manifest, "--out", str(out), "-v"]
    for step in STEPS:
        extra = list(step[1:])
        if step[0] == "search":
            extra += ["--model", str(out / args.search_model)]
        t0 = time.perf_counter()
        code = graphnas([step[0], *common, *extra])
        print(f"{step[0]:<13} exit {code}  {time.perf_counter() - t0:7.1f}s", flush=True)
        if code not in (0, 3):
            sys.exit(code)

    with open(out / "sfs" / "trace.csv", newline="") as fh:
        order = [r["feature"] for r in csv.DictReader(fh)]
    trace = load_trace(out / "search" / "trace.jsonl")
    pred, meas = trace.predicted_path(), trace.measured_path()
    print(f"sfs order: {', '.join(order[:5])} ...")
    print(f"search {trace.status} after {len(trace.steps)} steps")
    for i, (p, m) in enumerate(zip(pred, meas)):
        print(f"  step {i:2d}  predicted {p:.4f}  measured {m:.4f}")
    if len(pred) > 2:
        print(f"pearson(predicted, measured) = {pearson(pred, meas):.3f}")


if __name__ == "__main__":
    main()
