#!/usr/bin/env python3
"""
Delay-ratio study: how far behind a privileged rate oracle the controller
runs, as a function of how long the oracle dwells on each rate before
dropping it. Short dwells make the re-matching cost dominate; long dwells
amortize it toward the constant-schedule floor of 7/3.

Run:
  python3 scripts/delay_study.py [--samples 50]
"""

import argparse

import numpy as np

from aalr.oracle import OptSchedule, delay_ratio, simulate


def random_schedule(rng, dwell_factor):
    n_seg = int(rng.integers(2, 7))
    gammas = [int(rng.choice([2, 4, 8])) for _ in range(n_seg - 1)]
    lr = float(rng.choice([0.4, 0.2, 0.1]))
    segments = []
    for g in gammas:
        segments.append((lr, dwell_factor * g))
        lr /= g
    segments.append((lr, int(rng.integers(32, 97))))
    return OptSchedule(tuple(segments))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"floor: constant-rate tracking ratio = 7/3 = {7 / 3:.4f}")
    print(f"{'dwell':>6} {'min':>7} {'mean':>7} {'max':>7}   share over 2.5")
    for dwell_factor in (2, 4, 8, 16, 24, 32):
        rng = np.random.default_rng(args.seed)
        ratios = np.array(
            [
                delay_ratio(simulate(random_schedule(rng, dwell_factor)))
                for _ in range(args.samples)
            ]
        )
        over = (ratios > 2.5).mean()
        print(
            f"{dwell_factor:>5}x {ratios.min():7.4f} {ratios.mean():7.4f}"
            f" {ratios.max():7.4f}   {over:.0%}"
        )


if __name__ == "__main__":
    main()
