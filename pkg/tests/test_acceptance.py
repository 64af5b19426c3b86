"""Acceptance suite: one test per criterion, each printing a pass line.

Golden slices are checked as exact shaded-region sets over the program
sources (whitespace-normalized); the algebraic criteria run the
brute-force oracle over a generated corpus of tiny runs.
"""

import random
import time

import pytest

from itml.cli import run_deep
from itml.frontend import parse_and_elaborate, parse_criterion, slice_regions
from itml.interp import eval_comp, replay_check
from itml.oracle import (
    check_adjunction, check_join_preservation, check_meet_preservation,
    check_minimality_all, generate_program, generate_run,
)
from itml.slicer import bwd_comp, validate_criterion
from itml.syntax import EMPTY_ENV, EMPTY_STORE, Result, VStr, EXN, VAL

from conftest import program_text

DIV_MSG = 'result = exn "division by zero"'


def _slice_text(text, criterion_text, deep=False):
    core, emap = parse_and_elaborate(text)
    if deep:
        run = run_deep(eval_comp, EMPTY_ENV, EMPTY_STORE, core)
    else:
        run = eval_comp(EMPTY_ENV, EMPTY_STORE, core)
    criterion = parse_criterion(criterion_text, run)
    validate_criterion(criterion, run)
    if deep:
        out = run_deep(bwd_comp, criterion, run.trace)
    else:
        out = bwd_comp(criterion, run.trace)
    return run, [
        " ".join(text[r.start:r.end].split()) for r in slice_regions(out.program, emap)
    ], slice_regions(out.program, emap)


def _covered(regions):
    chars = set()
    for r in regions:
        chars.update(range(r.start, r.end))
    return chars


def test_acceptance_1_golden_slice_s():
    text = program_text("loop_array.itml")
    t0 = time.perf_counter()
    _run, shaded, _ = _slice_text(text, "!s = 2")
    elapsed = time.perf_counter() - t0
    assert shaded == ["1", "3", "x[!i + 1] <- !s"]
    assert elapsed < 1.0
    print(f"ACCEPTANCE 1: PASS - !s = 2 shades exactly the two array "
          f"elements and the write-back statement ({elapsed:.2f}s)")


def test_acceptance_2_golden_slice_i():
    text = program_text("loop_array.itml")
    t0 = time.perf_counter()
    _run, shaded, _ = _slice_text(text, "!i = 4")
    elapsed = time.perf_counter() - t0
    assert shaded == [
        "[|0, 1, 2, 3|]",
        "ref 0",
        "s := !s + x[!i]",
        "x[!i + 1] <- !s",
    ]
    assert elapsed < 1.0
    print(f"ACCEPTANCE 2: PASS - !i = 4 shades the array literal, the s "
          f"initializer and both s/x statements ({elapsed:.2f}s)")


def test_acceptance_3_golden_slice_x3():
    """x[3] = 2 shades the 1 and 3 elements.  s's `ref 0` stays demanded:
    x[3] is the iteration-2 sum !s + x[2] whose chain reaches s's initial 0
    (changing the initializer provably changes x[3]), so minimality keeps
    it.  The chosen behaviour for that binding is asserted below."""
    text = program_text("loop_array.itml")
    t0 = time.perf_counter()
    _run, shaded, _ = _slice_text(text, "x[3] = 2")
    elapsed = time.perf_counter() - t0
    assert shaded == ["1", "3"]
    assert "ref 0" not in shaded  # the documented behaviour for s's binding
    assert elapsed < 1.0
    print(f"ACCEPTANCE 3: PASS - x[3] = 2 shades the two unused elements; "
          f"ref 0 stays demanded per the documented analysis ({elapsed:.2f}s)")


def test_acceptance_4_map_division():
    text = program_text("map_div.itml")
    t0 = time.perf_counter()
    run, _shaded, regions = _slice_text(text, DIV_MSG)
    elapsed = time.perf_counter() - t0
    assert run.result == Result(EXN, VStr("division by zero"))
    # within the user listing (after the map prelude), exactly `ref 1` and
    # the list element `a` are shaded
    listing = text.index("let a = ref 1")
    user_regions = sorted(
        " ".join(text[r.start:r.end].split())
        for r in regions if r.start >= listing
    )
    assert user_regions == ["a", "ref 1"]
    assert elapsed < 1.0
    print(f"ACCEPTANCE 4: PASS - the map program raises division by zero "
          f"and its slice elides exactly `ref 1` and the element `a` ({elapsed:.2f}s)")


def test_acceptance_5_gaussian_elimination():
    text = program_text("gauss.itml")
    t0 = time.perf_counter()
    run, _shaded, regions = _slice_text(text, DIV_MSG, deep=True)
    elapsed = time.perf_counter() - t0
    assert run.result == Result(EXN, VStr("division by zero"))
    covered = _covered(regions)

    # the whole "zero elements above the diagonal" block is elided
    block_start = text.index("let row = ref (n - 1)")
    block_end = text.index("return x") + len("return x")
    for pos in range(block_start, block_end):
        if not text[pos].isspace():
            assert pos in covered, f"above-diagonal block position {pos} not shaded"

    # within as': columns 1-2 of rows 1-3 are demanded, everything else holed
    as_block_start = text.index("let as' =")
    as_block_end = text.index("let bs' =")
    rows = [
        ["3.0", "-1.0", "2.0", "-1.0"],
        ["3.0", "-1.0", "1.0", "1.0"],
        ["1.0", "2.0", "-1.0", "2.0"],
        ["-1.0", "1.0", "-2.0", "-3.0"],
    ]
    pos = as_block_start
    for r, row in enumerate(rows):
        for c, item in enumerate(row):
            pos = text.index(item, pos, as_block_end)
            span = range(pos, pos + len(item))
            demanded = r < 3 and c < 2
            if demanded:
                assert not any(p in covered for p in span), \
                    f"as'[{r}][{c}] should be demanded"
            else:
                assert all(p in covered for p in span), \
                    f"as'[{r}][{c}] should be holed"
            pos += len(item)

    # the right-hand sides never matter: bs' is fully holed
    bs_start = text.index("[|", text.index("let bs' ="))
    bs_end = text.index("|]", bs_start) + 2
    assert all(p in covered for p in range(bs_start, bs_end))

    assert elapsed < 5.0
    print(f"ACCEPTANCE 5: PASS - the Gaussian run raises after one pass; "
          f"the slice keeps exactly rows 1-3 / columns 1-2 of as' and elides "
          f"the back-substitution block ({elapsed:.2f}s)")


@pytest.fixture(scope="module")
def corpus():
    return [generate_run(seed) for seed in range(200)]


def test_acceptance_6_exhaustive_adjunction(corpus):
    t0 = time.perf_counter()
    failures = [cx for run in corpus if (cx := check_adjunction(run))]
    elapsed = time.perf_counter() - t0
    assert failures == []
    assert elapsed < 120.0
    print(f"ACCEPTANCE 6: PASS - adjunction holds exhaustively on "
          f"{len(corpus)} generated runs, 0 counterexamples ({elapsed:.1f}s)")


def test_acceptance_7_exhaustive_minimality(corpus):
    failures = [cx for run in corpus if (cx := check_minimality_all(run))]
    assert failures == []
    print(f"ACCEPTANCE 7: PASS - backward slices equal the brute-force "
          f"minimum for every criterion of {len(corpus)} runs, 0 mismatches")


def test_acceptance_8_meet_join_preservation(corpus):
    rng = random.Random(2024)
    meet_samples = join_samples = 0
    failures = []
    for run in corpus:
        cx = check_meet_preservation(run, rng, 30)
        if cx:
            failures.append(cx)
        meet_samples += 30
        cx = check_join_preservation(run, rng, 25)
        if cx:
            failures.append(cx)
        join_samples += 25
    assert failures == []
    assert meet_samples + join_samples >= 10_000
    print(f"ACCEPTANCE 8: PASS - fwd preserves meets and bwd preserves joins "
          f"on {meet_samples} + {join_samples} sampled pairs, 0 violations")


def test_acceptance_9_replay_determinism():
    checked = 0
    for seed in range(1000):
        program = generate_program(seed, 1 + seed % 4)
        r1 = eval_comp(EMPTY_ENV, EMPTY_STORE, program)
        r2 = eval_comp(EMPTY_ENV, EMPTY_STORE, program)
        assert r1 == r2, f"nondeterministic run for seed {seed}"
        assert replay_check(r1), f"replay failed for seed {seed}"
        checked += 1
    print(f"ACCEPTANCE 9: PASS - {checked} generated programs replay "
          f"deterministically with structurally identical records")


def test_smoke_large_array_build():
    """Write-set caching keeps slicing near-linear: a 10^4-element build
    loop slices well under the 10 s budget."""
    n = 10_000
    text = (
        f"let a = array({n}, 0) in\n"
        f"let i = ref 0 in\n"
        f"(while !i < {n} do\n"
        f"  a[!i] <- !i * 2 ;;\n"
        f"  i := !i + 1\n"
        f") ;;\n"
        f"!i\n"
    )
    t0 = time.perf_counter()
    core, _emap = parse_and_elaborate(text)
    run = run_deep(eval_comp, EMPTY_ENV, EMPTY_STORE, core, 10**6)
    criterion = parse_criterion(f"a[5555] = 11110, !i = {n}", run)
    validate_criterion(criterion, run)
    out = run_deep(bwd_comp, criterion, run.trace)
    elapsed = time.perf_counter() - t0
    assert out.program != None  # noqa: E711 - slice exists
    assert elapsed < 10.0
    print(f"SMOKE: PASS - 10^4-element build program sliced in {elapsed:.1f}s")
