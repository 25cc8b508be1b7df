#!/usr/bin/env python3
"""Empirical success profile of the rotation cycle builder vs density.

The rotation rule consumes one edge per step, so small member scopes need
substantially more density than the asymptotic thresholds suggest.  This
script measures per-scope success rates across (size, multiple-of-ln(s)/s)
and prints a table; it is the quickest way to pick workable constants for
the partitioned builders.

Usage:
    python scripts/density_profile.py [--sizes 16,32,64,128] [--trials 200]
"""

import argparse
import math
import sys

from hamsim.graph import GnpParams, generate_gnp
from hamsim.rotation import run_dra


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="16,32,64,128")
    ap.add_argument("--mults", default="2,3,4,6,8")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = [int(x) for x in args.sizes.split(",")]
    mults = [float(x) for x in args.mults.split(",")]

    print(f"{'size':>6} " + " ".join(f"c={m:>4g}" for m in mults))
    for s in sizes:
        cells = []
        for mult in mults:
            p = min(1.0, mult * math.log(s) / s)
            ok = 0
            for t in range(args.trials):
                g = generate_gnp(GnpParams(s, p, args.seed + t))
                rep, _ = run_dra(g, seed=args.seed + t)
                ok += rep.success
            cells.append(f"{ok / args.trials:5.2f}")
        print(f"{s:>6} " + "  ".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
