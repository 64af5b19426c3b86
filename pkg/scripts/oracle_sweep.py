#!/usr/bin/env python3
"""Sweep the brute-force oracle over many generated runs.

Checks, per seed: the adjunction between forward and backward slicing over
the full prefix lattices, exact minimality of every backward slice, and
sampled meet/join preservation.  Prints a one-line summary per batch and a
final tally; non-zero exit on any counterexample.

Usage: python scripts/oracle_sweep.py [--seeds N] [--budget B] [--cap C]
"""

import argparse
import random
import sys
import time

sys.setrecursionlimit(1_000_000)

from itml.oracle import (  # noqa: E402
    check_adjunction, check_join_preservation, check_meet_preservation,
    check_minimality_all, generate_run, input_lattice_size,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=500)
    parser.add_argument("--budget", type=int, default=3)
    parser.add_argument("--cap", type=int, default=4096)
    parser.add_argument("--batch", type=int, default=50)
    args = parser.parse_args()

    rng = random.Random(0)
    failures = 0
    sizes = []
    t0 = time.perf_counter()
    for seed in range(args.seeds):
        run = generate_run(seed, max_budget=args.budget, cap=args.cap)
        sizes.append(input_lattice_size(run))
        for check in (
            lambda: check_adjunction(run, args.cap),
            lambda: check_minimality_all(run, args.cap),
            lambda: check_meet_preservation(run, rng, 20, args.cap),
            lambda: check_join_preservation(run, rng, 15, args.cap),
        ):
            cx = check()
            if cx is not None:
                failures += 1
                print(f"seed {seed}: {cx}")
        if (seed + 1) % args.batch == 0:
            rate = (seed + 1) / (time.perf_counter() - t0)
            print(f"  ... {seed + 1}/{args.seeds} seeds, {failures} failures, "
                  f"{rate:.1f} runs/s")

    elapsed = time.perf_counter() - t0
    print(f"{args.seeds} runs, mean lattice {sum(sizes) / len(sizes):.0f} "
          f"(max {max(sizes)}), {failures} failures, {elapsed:.1f}s")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
