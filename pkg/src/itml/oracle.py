"""Brute-force verification of the slicing adjunction on tiny runs.

Nothing here trusts the slicer's cleverness: prefixes are enumerated
exhaustively, forward slicing is applied to every one of them, and the
backward slicer's output is compared against the meet of all sufficient
inputs.  Runs are kept small enough (product lattice below a cap) that
this is feasible, which is the point: the algebraic laws are checked on
the whole space of a run, not on sampled corners.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator, Optional

from .interp import RunRecord, eval_comp
from .lattice import (
    CapExceededError, enumerate_prefixes, lattice_size, leq, meet,
)
from .slicer import BackwardSliceOutput, Criterion, bwd_comp, fwd_comp, validate_criterion
from .syntax import (
    Comp, CApp, CArrGet, CArrMake, CArrSet, CAssign, CCase, CDeref,
    CIf, CLet, CRaise, CRef, CRet, CTry,
    EBool, EFun, EFst, EInl, EInr, ENum, EPair, EPrim, ESnd, EStr, EUnit,
    EVar, EMPTY_ENV, EMPTY_STORE,
)

DEFAULT_LATTICE_CAP = 4096
ENUM_POINT_CAP = 64


@dataclass(frozen=True)
class Counterexample:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.detail}"


def input_lattice_size(run: RunRecord) -> int:
    return (
        lattice_size(run.env)
        * lattice_size(run.store)
        * lattice_size(run.program)
        * lattice_size(run.trace)
    )


def output_lattice_size(run: RunRecord) -> int:
    return lattice_size(run.out_store) * lattice_size(run.result)


def _check_cap(run: RunRecord, cap: int) -> None:
    size = input_lattice_size(run)
    if size > cap:
        raise CapExceededError(f"input prefix lattice has {size} elements, cap {cap}")


def enumerate_inputs(run: RunRecord) -> Iterator[tuple]:
    for env in enumerate_prefixes(run.env, ENUM_POINT_CAP):
        for store in enumerate_prefixes(run.store, ENUM_POINT_CAP):
            for prog in enumerate_prefixes(run.program, ENUM_POINT_CAP):
                for trace in enumerate_prefixes(run.trace, ENUM_POINT_CAP):
                    yield env, store, prog, trace


def enumerate_outputs(run: RunRecord) -> Iterator[tuple]:
    for store in enumerate_prefixes(run.out_store, ENUM_POINT_CAP):
        for res in enumerate_prefixes(run.result, ENUM_POINT_CAP):
            yield store, res


def _leq4(a: tuple, b: tuple) -> bool:
    return all(leq(x, y) for x, y in zip(a, b))


def _leq2(a: tuple, b: tuple) -> bool:
    return leq(a[0], b[0]) and leq(a[1], b[1])


def _bwd_tuple(out: BackwardSliceOutput) -> tuple:
    return out.env, out.store, out.program, out.trace


def brute_force_bwd(run: RunRecord, criterion: Criterion,
                    cap: int = DEFAULT_LATTICE_CAP) -> BackwardSliceOutput:
    """The meet of every input prefix whose forward slice covers the
    criterion: the reference lower adjoint, computed by sheer enumeration."""
    _check_cap(run, cap)
    validate_criterion(criterion, run)
    want = (criterion.store, criterion.result)
    acc: Optional[tuple] = None
    for x in enumerate_inputs(run):
        got = fwd_comp(*x)
        if _leq2(want, got):
            acc = x if acc is None else tuple(meet(a, b) for a, b in zip(acc, x))
    if acc is None:
        raise AssertionError("full input failed to reproduce a validated criterion")
    return BackwardSliceOutput(*acc)


def check_minimality(run: RunRecord, criterion: Criterion,
                     cap: int = DEFAULT_LATTICE_CAP) -> Optional[Counterexample]:
    """bwd must agree exactly with the enumerated minimum for the criterion."""
    fast = _bwd_tuple(bwd_comp(criterion, run.trace))
    slow = _bwd_tuple(brute_force_bwd(run, criterion, cap))
    if fast != slow:
        return Counterexample(
            "minimality",
            f"criterion {criterion!r}: slicer gave {fast!r}, minimum is {slow!r}",
        )
    return None


def check_minimality_all(run: RunRecord,
                         cap: int = DEFAULT_LATTICE_CAP) -> Optional[Counterexample]:
    """Exhaustive minimality: every criterion in the output prefix lattice."""
    _check_cap(run, cap)
    inputs = [(x, fwd_comp(*x)) for x in enumerate_inputs(run)]
    for store, res in enumerate_outputs(run):
        want = (store, res)
        acc: Optional[tuple] = None
        for x, got in inputs:
            if _leq2(want, got):
                acc = x if acc is None else tuple(meet(a, b) for a, b in zip(acc, x))
        fast = _bwd_tuple(bwd_comp(Criterion(res, store), run.trace))
        if acc is None or fast != acc:
            return Counterexample(
                "minimality",
                f"criterion ({store!r}, {res!r}): slicer gave {fast!r}, minimum {acc!r}",
            )
    return None


def check_adjunction(run: RunRecord,
                     cap: int = DEFAULT_LATTICE_CAP) -> Optional[Counterexample]:
    """fwd(X) >= Y iff X >= bwd(Y), for every X and Y of the run's lattices."""
    _check_cap(run, cap)
    inputs = [(x, fwd_comp(*x)) for x in enumerate_inputs(run)]
    for store, res in enumerate_outputs(run):
        y = (store, res)
        by = _bwd_tuple(bwd_comp(Criterion(res, store), run.trace))
        for x, fx in inputs:
            lhs = _leq2(y, fx)
            rhs = _leq4(by, x)
            if lhs != rhs:
                return Counterexample(
                    "adjunction",
                    f"X={x!r} Y={y!r}: Y<=fwd(X) is {lhs} but bwd(Y)<=X is {rhs}",
                )
    return None


def check_meet_preservation(run: RunRecord, rng: random.Random, samples: int,
                            cap: int = DEFAULT_LATTICE_CAP) -> Optional[Counterexample]:
    """fwd(X meet X') == fwd(X) meet fwd(X') on sampled prefix pairs."""
    _check_cap(run, cap)
    inputs = list(enumerate_inputs(run))
    for _ in range(samples):
        x1 = rng.choice(inputs)
        x2 = rng.choice(inputs)
        xm = tuple(meet(a, b) for a, b in zip(x1, x2))
        got = fwd_comp(*xm)
        s1, r1 = fwd_comp(*x1)
        s2, r2 = fwd_comp(*x2)
        want = (meet(s1, s2), meet(r1, r2))
        if got != want:
            return Counterexample(
                "meet-preservation",
                f"X={x1!r} X'={x2!r}: fwd(meet)={got!r} but meet(fwd)={want!r}",
            )
    return None


def check_join_preservation(run: RunRecord, rng: random.Random, samples: int,
                            cap: int = DEFAULT_LATTICE_CAP) -> Optional[Counterexample]:
    """bwd(Y join Y') == bwd(Y) join bwd(Y') on sampled criterion pairs."""
    from .lattice import join

    _check_cap(run, cap)
    outputs = list(enumerate_outputs(run))
    for _ in range(samples):
        s1, r1 = rng.choice(outputs)
        s2, r2 = rng.choice(outputs)
        b1 = _bwd_tuple(bwd_comp(Criterion(r1, s1), run.trace))
        b2 = _bwd_tuple(bwd_comp(Criterion(r2, s2), run.trace))
        joined = Criterion(join(r1, r2), join(s1, s2))
        got = _bwd_tuple(bwd_comp(joined, run.trace))
        want = tuple(join(a, b) for a, b in zip(b1, b2))
        if got != want:
            return Counterexample(
                "join-preservation",
                f"Y={(s1, r1)!r} Y'={(s2, r2)!r}: bwd(join)={got!r} join(bwd)={want!r}",
            )
    return None


# ---------------------------------------------------------------------------
# Random well-formed program generation.
#
# Straight-line let sequences over a small typed context; every program
# evaluates without stuck states (exceptions are fine and deliberately
# exercised: raise, division by zero, out-of-bounds array accesses, with
# and without handlers).  Closures never capture references across more
# than one call level, keeping the prefix lattices small.

_INT, _BOOL, _UNIT, _STR = "int", "bool", "unit", "str"
_REF, _ARR, _PAIR, _SUM, _FUN = "ref", "arr", "pair", "sum", "fun"


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.vars: list = []  # (name, kind, extra)
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def of_kind(self, kind: str) -> list:
        return [(n, k, x) for n, k, x in self.vars if k == kind]

    def int_expr(self, depth: int = 2):
        rng = self.rng
        opts = ["lit"]
        ints = self.of_kind(_INT)
        pairs = self.of_kind(_PAIR)
        if ints:
            opts += ["var"] * 2
        if depth > 0:
            opts += ["arith"] * 2
            if pairs:
                opts.append("proj")
        match rng.choice(opts):
            case "lit":
                return ENum(rng.randint(0, 3))
            case "var":
                return EVar(rng.choice(ints)[0])
            case "proj":
                name = rng.choice(pairs)[0]
                return (EFst if rng.random() < 0.5 else ESnd)(EVar(name))
            case _:
                op = rng.choice(["+", "+", "-", "*"])
                return EPrim(op, (self.int_expr(depth - 1), self.int_expr(depth - 1)))

    def bool_expr(self, depth: int = 1):
        rng = self.rng
        if depth == 0 or rng.random() < 0.3:
            return EBool(rng.random() < 0.5)
        op = rng.choice(["<", "<=", "==", ">", ">="])
        return EPrim(op, (self.int_expr(1), self.int_expr(1)))

    def small_body(self) -> Comp:
        """A one-step computation for branches and handlers (int result)."""
        rng = self.rng
        refs = self.of_kind(_REF)
        opts = ["ret"]
        if refs:
            opts += ["deref", "assign-then"]
        match rng.choice(opts):
            case "deref":
                return CDeref(EVar(rng.choice(refs)[0]))
            case "assign-then":
                name = rng.choice(refs)[0]
                return CLet(
                    self.fresh(), CAssign(EVar(name), self.int_expr(1)),
                    CDeref(EVar(name)),
                )
            case _:
                return CRet(self.int_expr(1))

    def risky_body(self) -> Comp:
        """A computation that may raise (for try blocks and endings)."""
        rng = self.rng
        match rng.randrange(4):
            case 0:
                return CRaise(EStr(rng.choice(["boom", "oops"])))
            case 1:
                return CRet(EPrim("/", (self.int_expr(1), ENum(rng.choice([0, 0, 2])))))
            case 2:
                arrs = self.of_kind(_ARR)
                if arrs:
                    name, _, length = rng.choice(arrs)
                    return CArrGet(EVar(name), ENum(length + rng.randint(0, 2)))
                return CRaise(EStr("boom"))
            case _:
                return self.small_body()

    def step(self):
        """One let binding: (name, computation, kind, extra)."""
        rng = self.rng
        name = self.fresh()
        refs = self.of_kind(_REF)
        arrs = self.of_kind(_ARR)
        sums = self.of_kind(_SUM)
        funs = self.of_kind(_FUN)

        opts = ["int", "bool", "ref", "pair", "sum"]
        if refs:
            opts += ["assign", "deref"]
        if arrs:
            opts += ["arr-get", "arr-set"]
        if sums:
            opts.append("case")
        if funs:
            opts.append("call")
        opts += ["if", "try", "arr-make", "fun"]

        match rng.choice(opts):
            case "int":
                return name, CRet(self.int_expr()), _INT, None
            case "bool":
                return name, CRet(self.bool_expr()), _BOOL, None
            case "ref":
                return name, CRef(self.int_expr(1)), _REF, None
            case "pair":
                return name, CRet(EPair(self.int_expr(1), self.int_expr(1))), _PAIR, None
            case "sum":
                wrap = EInl if rng.random() < 0.5 else EInr
                return name, CRet(wrap(self.int_expr(1))), _SUM, None
            case "assign":
                target = rng.choice(refs)[0]
                return name, CAssign(EVar(target), self.int_expr(1)), _UNIT, None
            case "deref":
                return name, CDeref(EVar(rng.choice(refs)[0])), _INT, None
            case "arr-make":
                length = rng.randint(1, 2)
                comp = CArrMake(ENum(length), self.int_expr(1))
                return name, comp, _ARR, length
            case "arr-get":
                aname, _, length = rng.choice(arrs)
                return name, CArrGet(EVar(aname), ENum(rng.randrange(length))), _INT, None
            case "arr-set":
                aname, _, length = rng.choice(arrs)
                comp = CArrSet(EVar(aname), ENum(rng.randrange(length)), self.int_expr(1))
                return name, comp, _UNIT, None
            case "case":
                sname = rng.choice(sums)[0]
                lx, ry = self.fresh(), self.fresh()
                comp = CCase(EVar(sname), lx, CRet(EVar(lx)), ry, CRet(EVar(ry)))
                return name, comp, _INT, None
            case "if":
                return name, CIf(self.bool_expr(), self.small_body(), self.small_body()), _INT, None
            case "try":
                handler_var = self.fresh()
                comp = CTry(self.risky_body(), handler_var, CRet(self.int_expr(1)))
                return name, comp, _INT, None
            case "fun":
                fn, xn = self.fresh(), self.fresh()
                body = CRet(EPrim("+", (EVar(xn), self.int_expr(1))))
                return name, CRet(EFun(fn, xn, body)), _FUN, None
            case "call":
                fname = rng.choice(funs)[0]
                return name, CApp(EVar(fname), self.int_expr(1)), _INT, None
        raise AssertionError


def generate_program(seed: int, budget: int) -> Comp:
    """A random hole-free computation that evaluates without stuck states
    (possibly to an exception) within the step bound."""
    rng = random.Random(seed)
    if budget <= 0:
        return CRet(EUnit())
    gen = _Gen(rng)
    steps = []
    for _ in range(budget):
        name, comp, kind, extra = gen.step()
        steps.append((name, comp))
        gen.vars.append((name, kind, extra))

    if rng.random() < 0.15:
        final: Comp = gen.risky_body()
    elif gen.vars and rng.random() < 0.5:
        final = CRet(EVar(rng.choice(gen.vars)[0]))
    else:
        final = CRet(gen.int_expr(1))

    program = final
    for name, comp in reversed(steps):
        program = CLet(name, comp, program)
    return program


def generate_run(seed: int, max_budget: int = 3,
                 cap: int = DEFAULT_LATTICE_CAP) -> RunRecord:
    """Evaluate a generated program whose input lattice fits under the cap,
    shrinking the budget (and finally falling back to a unit program) so
    every seed yields a usable run."""
    rng = random.Random(seed ^ 0x5EED)
    budget = rng.randint(1, max_budget)
    for attempt in range(budget, -1, -1):
        program = generate_program(seed * 1000 + attempt, attempt)
        run = eval_comp(EMPTY_ENV, EMPTY_STORE, program)
        if input_lattice_size(run) <= cap:
            return run
    raise AssertionError("even the empty program exceeded the cap")
