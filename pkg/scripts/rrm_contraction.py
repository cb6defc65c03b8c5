#!/usr/bin/env python3
"""Watch repeated risk minimization contract toward the stable point.

Prints one row per deployment with the distance to theta_ps and the
step-over-step ratio, which should hover at eps * beta / gamma until float
resolution runs out. Crank --a past 1 + lam to watch it diverge instead.
"""
import argparse

import performative as pf


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--a", type=float, default=0.5, help="mean-shift slope of the data map")
    ap.add_argument("--b", type=float, default=1.0)
    ap.add_argument("--lam", type=float, default=1.0, help="ridge weight")
    ap.add_argument("--s", type=float, default=1.0, help="outcome noise scale")
    ap.add_argument("--theta0", type=float, default=-(2.0**40))
    ap.add_argument("--steps", type=int, default=40)
    ap.add_argument("--batch", type=int, default=0, help="sample size per deployment; 0 = exact minimizer")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    bench = pf.ScalarQuadratic(a=args.a, b=args.b, lam=args.lam, s=args.s)
    cfg = pf.SolverConfig(
        space=pf.ParamSpace.unbounded(1),
        steps=args.steps,
        seed=args.seed,
        batch_size=args.batch or None,
        theorem_mode=False,
    )
    trace = pf.rrm(bench.loss(), bench.dist_map(), args.theta0, cfg)

    rho = abs(args.a) / (1.0 + args.lam)
    print(f"theta_ps = {bench.theta_ps:.12g}   predicted ratio = {rho:.6g}")
    print(f"{'k':>4}  {'theta':>22}  {'dist_ps':>12}  {'ratio':>10}")
    dist = trace.column("dist_ps")
    for i in range(trace.n_rows):
        ratio = dist[i] / dist[i - 1] if i > 0 and dist[i - 1] > 0 else float("nan")
        print(f"{trace.k[i]:>4}  {float(trace.thetas[i][0]):>22.12g}  {dist[i]:>12.4e}  {ratio:>10.6f}")


if __name__ == "__main__":
    main()
