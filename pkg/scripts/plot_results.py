#!/usr/bin/env python3
"""Plot rounds vs n from harness CSVs (matplotlib needed only here).

Usage:
    python scripts/plot_results.py sweep_out/dhc2_sweep.csv [more.csv ...]
"""

import csv
import sys
from collections import defaultdict


def main() -> int:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; install it or read the CSV directly")
        return 1
    if len(sys.argv) < 2:
        print(__doc__)
        return 1
    fig, ax = plt.subplots()
    for path in sys.argv[1:]:
        by_n = defaultdict(list)
        with open(path) as fh:
            for row in csv.DictReader(fh):
                by_n[int(row["n"])].append(int(row["rounds"]))
        ns = sorted(by_n)
        med = [sorted(by_n[n])[len(by_n[n]) // 2] for n in ns]
        ax.plot(ns, med, marker="o", label=path)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("median rounds")
    ax.legend()
    out = "rounds_vs_n.png"
    fig.savefig(out, dpi=150, bbox_inches="tight")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
