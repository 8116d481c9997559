#!/usr/bin/env python3
"""Compare a compliant simulation against the analytic stationary law and welfare.

    python3 scripts/convergence.py --periods 100000 --K 1 --h 1 --alpha 0.1
"""

import argparse

import numpy as np

from crowdnorms import MarketParams, SimConfig, SocialNorm, run_simulation, social_welfare, stationary_distribution


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=1)
    ap.add_argument("--h", type=int, default=1)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=0.8)
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--periods", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = MarketParams(c=args.c, delta=args.delta, alpha=args.alpha)
    norm = SocialNorm(args.K, args.h)
    eta = stationary_distribution(norm, params)
    target = social_welfare(norm, params)
    print("periods  L1(eta_hat, eta)  welfare/worker  analytic  rel.err")
    for T in args.periods:
        res = run_simulation(SimConfig(params, norm, periods=T, burn_in=min(1_000, T // 10), seed=args.seed))
        l1 = np.abs(res.reputation_dist - eta).sum()
        w = res.welfare_per_worker
        print(f"{T:>7}  {l1:16.2e}  {w:14.4f}  {target:8.4f}  {abs(w - target) / target:7.1e}")


if __name__ == "__main__":
    main()
