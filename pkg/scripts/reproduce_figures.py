#!/usr/bin/env python3
"""Regenerate every design and pricing table (CSV plus SVG) into one directory.

    python3 scripts/reproduce_figures.py --out-dir results/figures
"""

import argparse
import time

from crowdnorms.figures import FIGURES, write_figure


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results/figures")
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.05, 0.1])
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--only", choices=FIGURES, nargs="+", default=list(FIGURES))
    ap.add_argument("--no-charts", action="store_true")
    args = ap.parse_args()

    for name in args.only:
        t0 = time.perf_counter()
        paths = write_figure(name, args.out_dir, args.alpha, charts=not args.no_charts, seed=args.seed)
        print(f"{name}: {len(paths)} files in {time.perf_counter() - t0:.1f}s")
        for p in paths:
            print(f"  {p}")


if __name__ == "__main__":
    main()
