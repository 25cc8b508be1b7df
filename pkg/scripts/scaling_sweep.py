#!/usr/bin/env python3
"""Round-count scaling of the partition-and-merge builder and the upcast
pipeline across problem sizes.

Runs dhc2 at delta=0.5 (p = c ln n / sqrt n) and upcast (p = 3 ln n / sqrt n)
over n in {1024, 4096, 16384}, writes one CSV per algorithm, and prints
median-round growth ratios against the (n2/n1)^delta * (ln n2/ln n1)^2 shape.

Usage:
    python scripts/scaling_sweep.py [--trials 5] [--seed 100] [--out-dir out]
    python scripts/scaling_sweep.py --sizes 1024,4096 --trials 3   # quick look

Derived p = c ln n / sqrt n must stay below 1, so sizes under ~1024 need a
smaller --c.
"""

import argparse
import math
import os
import sys

from hamsim.cli import ExperimentConfig, sweep, write_csv


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=100)
    ap.add_argument("--sizes", default="1024,4096,16384")
    ap.add_argument("--c", type=float, default=4.25)
    ap.add_argument("--out-dir", default="sweep_out")
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",")]
    os.makedirs(args.out_dir, exist_ok=True)

    for algo, kw in (
        ("dhc2", dict(c=args.c, delta=0.5)),
        ("upcast", dict(c=3.0, delta=0.5, cprime=3.0)),
    ):
        cfg = ExperimentConfig(algo=algo, n=0, seed=args.seed, trials=args.trials,
                               out=os.path.join(args.out_dir, f"{algo}_sweep.csv"), **kw)
        print(f"== {algo} (p = {kw['c']} ln n / n^{kw['delta']}) ==")
        rep = sweep(cfg, sizes)
        for n, med in sorted(rep["medians"].items()):
            print(f"  n={n:6d}  median rounds = {med}")
        for r in rep["ratios"]:
            print(f"  {r['n1']} -> {r['n2']}: observed x{r['observed']:.2f}, "
                  f"shape predicts x{r['predicted']:.2f}")
    print(f"CSVs in {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
