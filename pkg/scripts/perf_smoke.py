#!/usr/bin/env python3
"""Near-linearity smoke test for slicing long store-mutating runs.

Builds an n-element array in a while loop, then backward-slices the run
against a single-element criterion and against the loop counter.  With the
write-set membership memoization this scales close to linearly; without it
the hole rule's side condition degenerates to quadratic recomputation.

Usage: python scripts/perf_smoke.py [--sizes 1000,3000,10000]
"""

import argparse
import sys
import time

from itml.cli import run_deep
from itml.frontend import parse_and_elaborate, parse_criterion
from itml.interp import eval_comp
from itml.slicer import bwd_comp, validate_criterion
from itml.syntax import EMPTY_ENV, EMPTY_STORE


def build_program(n: int) -> str:
    return (
        f"let a = array({n}, 0) in\n"
        f"let i = ref 0 in\n"
        f"(while !i < {n} do\n"
        f"  a[!i] <- !i * 2 ;;\n"
        f"  i := !i + 1\n"
        f") ;;\n"
        f"!i\n"
    )


def measure(n: int) -> None:
    core, _emap = parse_and_elaborate(build_program(n))
    t0 = time.perf_counter()
    run = run_deep(eval_comp, EMPTY_ENV, EMPTY_STORE, core, 10 * n)
    t_eval = time.perf_counter() - t0

    mid = n // 2
    criterion = parse_criterion(f"a[{mid}] = {mid * 2}", run)
    validate_criterion(criterion, run)
    t0 = time.perf_counter()
    run_deep(bwd_comp, criterion, run.trace)
    t_elem = time.perf_counter() - t0

    criterion = parse_criterion(f"!i = {n}", run)
    t0 = time.perf_counter()
    run_deep(bwd_comp, criterion, run.trace)
    t_counter = time.perf_counter() - t0

    print(f"n={n:>6}: eval {t_eval:6.2f}s   slice[element] {t_elem:6.2f}s   "
          f"slice[counter] {t_counter:6.2f}s")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,3000,10000")
    args = parser.parse_args()
    for n in (int(s) for s in args.sizes.split(",")):
        measure(n)
    return 0


if __name__ == "__main__":
    sys.exit(main())
