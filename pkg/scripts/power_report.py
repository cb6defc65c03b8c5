#!/usr/bin/env python3
"""Print the ranking-platform power report for the worked example as JSON."""
import argparse
import json

import numpy as np

import performative as pf

EXAMPLE = dict(
    scores=[1.0, 0.9, 0.2],
    propensities=[[0.8, 0.4], [0.9, 0.5]],
    affinities=[[0.5, 0.3, 0.1], [0.5, 0.2, 0.4]],
    budget=0.8,
)


def random_platform(rng: np.random.Generator, n_viewers: int, n_items: int) -> pf.Platform:
    # two display slots, position 1 always at least as visible as position 2
    prop = np.sort(rng.uniform(0.05, 0.95, size=(n_viewers, 2)))[:, ::-1]
    return pf.Platform(
        scores=rng.uniform(size=n_items),
        propensities=prop,
        affinities=rng.uniform(size=(n_viewers, n_items)),
        budget=float(rng.uniform(0.2, 1.0)),
    )


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--random", action="store_true", help="draw a random platform instead of the worked example")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--viewers", type=int, default=30)
    ap.add_argument("--items", type=int, default=6)
    ap.add_argument("--mc", type=int, default=0, help="Monte-Carlo viewer draws; 0 = exact expectations")
    args = ap.parse_args()

    if args.random:
        platform = random_platform(np.random.default_rng(args.seed), args.viewers, args.items)
    else:
        platform = pf.Platform(**EXAMPLE)
    report = pf.power_report(platform, n=args.mc, seed=args.seed)
    print(json.dumps(report, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
