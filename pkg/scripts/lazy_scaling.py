#!/usr/bin/env python3
"""Fit the deployments-to-accuracy exponent for lazy SGD stage schedules.

For each stage-growth exponent alpha, replays the collapsed lazy recursion
over many seeds, finds how many deployments it takes to push the mean-square
error below each accuracy delta, and fits the empirical power law. The fitted
slope should track alpha.
"""
import argparse

import numpy as np

import performative as pf

# (inner-stage scale, number of stages) tuned so every curve crosses 1e-3
PLANS = {0.5: (1.0, 120_000), 1.0: (0.3, 2_000), 2.0: (0.05, 150)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alphas", type=float, nargs="+", default=sorted(PLANS))
    ap.add_argument("--seeds", type=int, default=64, help="replays averaged into each error curve")
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--theta0", type=float, default=0.0)
    args = ap.parse_args()

    bench = pf.ScalarQuadratic(a=0.5, b=1.0, lam=1.0, s=1.0)
    deltas = np.logspace(-1, -3, 5)

    print(f"{'alpha':>6}  {'fitted':>8}  {'deployments at delta=' + ', '.join(f'{d:g}' for d in deltas)}")
    for alpha in args.alphas:
        if alpha not in PLANS:
            raise SystemExit(f"no stage plan for alpha={alpha}; known: {sorted(PLANS)}")
        scale, n_stages = PLANS[alpha]
        mse = pf.lazy_error_curve(
            bench,
            args.theta0,
            alpha=alpha,
            scale=scale,
            n_stages=n_stages,
            n_seeds=args.seeds,
            master_seed=args.master_seed,
            stop_below=2.5e-4,
        )
        deps = pf.deployments_to_accuracy(mse, deltas)
        fitted = pf.fit_power_law_exponent(deps, deltas)
        print(f"{alpha:>6.2f}  {fitted:>8.3f}  {list(map(int, deps))}")


if __name__ == "__main__":
    main()
