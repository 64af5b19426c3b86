"""Traced big-step evaluation.

Evaluating a computation yields, besides the final store and result, a
*trace*: a proof term of the evaluation recording control-flow choices
(which let/try/case/if path ran), allocated and updated locations, and the
sub-derivations of every sub-computation.  Slicing consumes these traces.

Allocation is a monotone counter so runs are deterministic and traces can
be compared structurally.  Exceptions carry string values; division by
zero, array index violations and negative array lengths raise (they are
not stuck states), recorded as a `TFail` trace node since they abort a
computation before any of its store effects happen.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Union

from .syntax import (
    Comp, CApp, CArrGet, CArrMake, CArrSet, CAssign, CCase, CDeref, CHole,
    CIf, CLet, CRaise, CRef, CRet, CTry,
    Expr, EBool, EFun, EHole, ENum, EPair, EPrim, EStr, EUnit, EVar,
    EFst, ESnd, EInl, EInr,
    Env, Store, ScalarCell, ArrayCell, Result, Value, VArr, VBool, VClosure,
    VInl, VInr, VLoc, VNum, VPair, VStr, VUnit, UNIT, VAL, EXN,
    Trace, TApp, TArrGet, TArrMake, TArrSet, TAssign, TCaseInl, TCaseInr,
    TDeref, TFail, THole, TIfFalse, TIfTrue, TLetFail, TLetSucc, TRaise,
    TRef, TRet, TTryFail, TTrySucc,
)

DEFAULT_STEP_LIMIT = 10**5
STEP_LIMIT_VAR = "ITML_STEP_LIMIT"

DIV_BY_ZERO = VStr("division by zero")
OUT_OF_BOUNDS = VStr("index out of bounds")
NEG_LENGTH = VStr("negative array length")


class StuckError(Exception):
    """Evaluation reached a state no rule covers (a genuine program error)."""


class ExnSignal(Exception):
    """Internal: an exception raised during the pre-effect phase of a
    computation (division by zero, bounds violation).  Caught by eval_comp
    and turned into an exn result with a TFail trace."""

    def __init__(self, value: Value):
        super().__init__(value)
        self.value = value


def _int_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def apply_prim(op: str, vals: list) -> Value:
    """Strict primitive application; operand shapes must match exactly."""
    if op in ("not", "neg"):
        (v,) = vals
        if op == "not":
            if not isinstance(v, VBool):
                raise StuckError("not applied to non-boolean")
            return VBool(not v.value)
        if not isinstance(v, VNum):
            raise StuckError("negation of non-number")
        return VNum(-v.value)

    a, b = vals
    if op in ("&&", "||"):
        if not (isinstance(a, VBool) and isinstance(b, VBool)):
            raise StuckError(f"{op} applied to non-booleans")
        return VBool(a.value and b.value if op == "&&" else a.value or b.value)

    if op in ("==", "<>"):
        same = None
        for cls in (VNum, VStr, VBool, VUnit, VLoc):
            if isinstance(a, cls) and isinstance(b, cls):
                if cls is VNum and type(a.value) is not type(b.value):
                    raise StuckError("== on numbers of different kinds")
                same = a == b
                break
        if same is None:
            raise StuckError(f"{op} on incomparable values")
        return VBool(same if op == "==" else not same)

    if not (isinstance(a, VNum) and isinstance(b, VNum)):
        raise StuckError(f"{op} applied to non-numbers")
    if type(a.value) is not type(b.value):
        raise StuckError(f"{op} on mixed int/float operands")
    x, y = a.value, b.value
    if op == "+":
        return VNum(x + y)
    if op == "-":
        return VNum(x - y)
    if op == "*":
        return VNum(x * y)
    if op == "/":
        if y == 0:
            raise ExnSignal(DIV_BY_ZERO)
        return VNum(_int_div(x, y) if isinstance(x, int) else x / y)
    if op == "<":
        return VBool(x < y)
    if op == "<=":
        return VBool(x <= y)
    if op == ">":
        return VBool(x > y)
    if op == ">=":
        return VBool(x >= y)
    raise StuckError(f"unknown operator {op}")


def eval_expr(env: Env, e: Expr) -> Value:
    """Pure expression evaluation; deterministic, strict, left-to-right.

    May raise ExnSignal (division by zero) or StuckError; holes are stuck.
    """
    match e:
        case EVar(x):
            if x not in env:
                raise StuckError(f"unbound variable {x}")
            return env.get(x)
        case EUnit():
            return UNIT
        case EBool(b):
            return VBool(b)
        case ENum(n):
            return VNum(n)
        case EStr(s):
            return VStr(s)
        case EPair(e1, e2):
            v1 = eval_expr(env, e1)
            return VPair(v1, eval_expr(env, e2))
        case EFst(e1):
            v = eval_expr(env, e1)
            if not isinstance(v, VPair):
                raise StuckError("fst of non-pair")
            return v.fst
        case ESnd(e1):
            v = eval_expr(env, e1)
            if not isinstance(v, VPair):
                raise StuckError("snd of non-pair")
            return v.snd
        case EInl(e1):
            return VInl(eval_expr(env, e1))
        case EInr(e1):
            return VInr(eval_expr(env, e1))
        case EFun(f, x, body):
            return VClosure(env, f, x, body)
        case EPrim(op, args):
            vals = [eval_expr(env, a) for a in args]
            return apply_prim(op, vals)
        case EHole():
            raise StuckError("hole in evaluated expression")
    raise StuckError(f"not an expression: {e!r}")


@dataclass(frozen=True)
class RunRecord:
    """One complete traced run: inputs, trace, outputs, allocation order,
    and the values of top-level let bindings (for criterion resolution)."""

    env: Env
    store: Store
    program: Comp
    trace: Trace
    out_store: Store
    result: Result
    alloc_log: tuple
    top_bindings: tuple

    def binding(self, name: str) -> Optional[Value]:
        for n, v in self.top_bindings:
            if n == name:
                return v
        return None


class _Evaluator:
    def __init__(self, store: Store, step_limit: int):
        cells: dict = {}
        for loc, cell in store.cells():
            if isinstance(cell, ScalarCell):
                cells[loc] = cell.value
            else:
                items = [cell.get(i) for i in range(cell.length)]
                cells[loc] = items
        self.cells = cells
        self.next_loc = max(cells, default=-1) + 1
        self.alloc_log: list = []
        self.top_bindings: list = []
        self.depth = 0
        self.step_limit = step_limit

    def alloc(self) -> int:
        loc = self.next_loc
        self.next_loc += 1
        self.alloc_log.append(loc)
        return loc

    def snapshot(self) -> Store:
        out: dict = {}
        for loc, cell in self.cells.items():
            if isinstance(cell, list):
                out[loc] = ArrayCell(len(cell), dict(enumerate(cell)))
            else:
                out[loc] = ScalarCell(cell)
        return Store(out)

    def eval(self, env: Env, m: Comp, spine: bool = False):
        try:
            return self._eval(env, m, spine)
        except ExnSignal as sig:
            path = locate_failure(env, m)
            return TFail(m, path).with_env(env), Result(EXN, sig.value)

    def _eval(self, env: Env, m: Comp, spine: bool):
        match m:
            case CRet(e):
                v = eval_expr(env, e)
                return TRet(e).with_env(env), Result(VAL, v)

            case CLet(x, bound, body):
                t1, r1 = self.eval(env, bound)
                if r1.outcome == EXN:
                    return TLetFail(t1, x).with_env(env), r1
                if spine:
                    self.top_bindings.append((x, r1.value))
                t2, r2 = self.eval(env.bind(x, r1.value), body, spine)
                return TLetSucc(x, t1, t2).with_env(env), r2

            case CApp(e1, e2):
                v1 = eval_expr(env, e1)
                if not isinstance(v1, VClosure):
                    raise StuckError("application of a non-closure")
                v2 = eval_expr(env, e2)
                if self.depth >= self.step_limit:
                    raise StuckError(f"recursion limit {self.step_limit} exceeded")
                self.depth += 1
                try:
                    benv = v1.env.bind(v1.fname, v1).bind(v1.xname, v2)
                    t, r = self.eval(benv, v1.body)
                finally:
                    self.depth -= 1
                return TApp(e1, e2, v1.fname, v1.xname, t).with_env(env), r

            case CCase(e, lx, left, ry, right):
                v = eval_expr(env, e)
                if isinstance(v, VInl):
                    t, r = self.eval(env.bind(lx, v.arg), left)
                    return TCaseInl(e, lx, t, ry).with_env(env), r
                if isinstance(v, VInr):
                    t, r = self.eval(env.bind(ry, v.arg), right)
                    return TCaseInr(e, lx, ry, t).with_env(env), r
                raise StuckError("case scrutinee is not a sum")

            case CIf(c, then, els):
                v = eval_expr(env, c)
                if not isinstance(v, VBool):
                    raise StuckError("if condition is not a boolean")
                if v.value:
                    t, r = self.eval(env, then)
                    return TIfTrue(c, t).with_env(env), r
                t, r = self.eval(env, els)
                return TIfFalse(c, t).with_env(env), r

            case CRaise(e):
                v = eval_expr(env, e)
                return TRaise(e).with_env(env), Result(EXN, v)

            case CTry(body, x, handler):
                t1, r1 = self.eval(env, body)
                if r1.outcome == VAL:
                    return TTrySucc(t1, x).with_env(env), r1
                t2, r2 = self.eval(env.bind(x, r1.value), handler)
                return TTryFail(t1, x, t2).with_env(env), r2

            case CRef(e):
                v = eval_expr(env, e)
                loc = self.alloc()
                self.cells[loc] = v
                return TRef(loc, e).with_env(env), Result(VAL, VLoc(loc))

            case CAssign(e1, e2):
                v1 = eval_expr(env, e1)
                if not isinstance(v1, VLoc):
                    raise StuckError("assignment target is not a reference")
                v2 = eval_expr(env, e2)
                if isinstance(self.cells.get(v1.loc), list):
                    raise StuckError("assignment to an array location")
                self.cells[v1.loc] = v2
                return TAssign(e1, v1.loc, e2).with_env(env), Result(VAL, UNIT)

            case CDeref(e):
                v = eval_expr(env, e)
                if not isinstance(v, VLoc):
                    raise StuckError("dereference of a non-reference")
                if v.loc not in self.cells:
                    raise StuckError(f"dereference of unallocated location #{v.loc}")
                cell = self.cells[v.loc]
                if isinstance(cell, list):
                    raise StuckError("dereference of an array location")
                return TDeref(v.loc, e).with_env(env), Result(VAL, cell)

            case CArrMake(e1, e2):
                v1 = eval_expr(env, e1)
                if not (isinstance(v1, VNum) and isinstance(v1.value, int)):
                    raise StuckError("array length is not an integer")
                v2 = eval_expr(env, e2)
                if v1.value < 0:
                    raise ExnSignal(NEG_LENGTH)
                loc = self.alloc()
                self.cells[loc] = [v2] * v1.value
                t = TArrMake(loc, v1.value, e1, e2).with_env(env)
                return t, Result(VAL, VArr(loc, v1.value))

            case CArrGet(e1, e2):
                arr, i = self._arr_operands(env, e1, e2)
                cell = self.cells.get(arr.loc)
                if not isinstance(cell, list):
                    raise StuckError("array reference to a non-array cell")
                t = TArrGet(e1, e2, arr.loc, i).with_env(env)
                return t, Result(VAL, cell[i])

            case CArrSet(e1, e2, e3):
                arr, i = self._arr_operands(env, e1, e2, bound_check_last=False)
                v3 = eval_expr(env, e3)
                if not 0 <= i < arr.length:
                    raise ExnSignal(OUT_OF_BOUNDS)
                cell = self.cells.get(arr.loc)
                if not isinstance(cell, list):
                    raise StuckError("array reference to a non-array cell")
                cell[i] = v3
                t = TArrSet(e1, e2, arr.loc, i, e3).with_env(env)
                return t, Result(VAL, UNIT)

            case CHole():
                raise StuckError("hole in evaluated computation")

        raise StuckError(f"not a computation: {m!r}")

    def _arr_operands(self, env: Env, e1: Expr, e2: Expr, bound_check_last: bool = True):
        v1 = eval_expr(env, e1)
        if not isinstance(v1, VArr):
            raise StuckError("array operation on a non-array")
        v2 = eval_expr(env, e2)
        if not (isinstance(v2, VNum) and isinstance(v2.value, int)):
            raise StuckError("array index is not an integer")
        if bound_check_last and not 0 <= v2.value < v1.length:
            raise ExnSignal(OUT_OF_BOUNDS)
        return v1, v2.value


class _Found(Exception):
    def __init__(self, path: tuple):
        super().__init__(path)
        self.path = path


def _probe_expr(env: Env, e: Expr, path: tuple) -> Value:
    """Re-evaluate e, raising _Found at the first failing division.

    Child indices follow the structural child order, so the resulting path
    can be navigated on any prefix of e.
    """
    match e:
        case EPair(a, b):
            return VPair(_probe_expr(env, a, path + (0,)), _probe_expr(env, b, path + (1,)))
        case EFst(a):
            v = _probe_expr(env, a, path + (0,))
            if not isinstance(v, VPair):
                raise StuckError("fst of non-pair")
            return v.fst
        case ESnd(a):
            v = _probe_expr(env, a, path + (0,))
            if not isinstance(v, VPair):
                raise StuckError("snd of non-pair")
            return v.snd
        case EInl(a):
            return VInl(_probe_expr(env, a, path + (0,)))
        case EInr(a):
            return VInr(_probe_expr(env, a, path + (0,)))
        case EPrim(op, args):
            vals = [_probe_expr(env, a, path + (i,)) for i, a in enumerate(args)]
            try:
                return apply_prim(op, vals)
            except ExnSignal:
                raise _Found(path) from None
        case _:
            return eval_expr(env, e)


def locate_failure(env: Env, m: Comp) -> tuple:
    """Pinpoint the raise inside a computation whose pre-effect phase
    signalled: either a division within one of its expressions, or the
    node's own length/bounds check."""
    from .syntax import comp_exprs

    for i, e in enumerate(comp_exprs(m)):
        try:
            _probe_expr(env, e, ())
        except _Found as found:
            return ("expr", i) + found.path
    return ("check",)


def eval_comp(env: Env, store: Store, program: Comp,
              step_limit: Optional[int] = None) -> RunRecord:
    """Run a hole-free computation; deterministic given the inputs."""
    if step_limit is None:
        step_limit = int(os.environ.get(STEP_LIMIT_VAR, DEFAULT_STEP_LIMIT))
    ev = _Evaluator(store, step_limit)
    trace, result = ev.eval(env, program, spine=True)
    return RunRecord(
        env=env,
        store=store,
        program=program,
        trace=trace,
        out_store=ev.snapshot(),
        result=result,
        alloc_log=tuple(ev.alloc_log),
        top_bindings=tuple(ev.top_bindings),
    )


def replay_check(run: RunRecord) -> bool:
    """Forward-slice the full inputs along the full trace and compare with
    the recorded outputs; an honest run always reproduces them exactly."""
    from .slicer import fwd_comp

    out_store, result = fwd_comp(run.env, run.store, run.program, run.trace)
    return out_store == run.out_store and result == run.result


# ---------------------------------------------------------------------------
# Trace dump format: s-expressions, one computation node per line, nested
# sub-traces indented, embedded expressions inline.  Locations print as #k
# (array elements #k[i]).  Stable across runs: allocation is deterministic.

def _dump_str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dump_num(n: Union[int, float]) -> str:
    return repr(n) if isinstance(n, float) else str(n)


def dump_expr(e: Expr) -> str:
    match e:
        case EHole():
            return "_"
        case EVar(x):
            return f"(var {x})"
        case EUnit():
            return "(unit)"
        case EBool(b):
            return "true" if b else "false"
        case ENum(n):
            return _dump_num(n)
        case EStr(s):
            return _dump_str(s)
        case EPair(a, b):
            return f"(pair {dump_expr(a)} {dump_expr(b)})"
        case EFst(a):
            return f"(fst {dump_expr(a)})"
        case ESnd(a):
            return f"(snd {dump_expr(a)})"
        case EInl(a):
            return f"(inl {dump_expr(a)})"
        case EInr(a):
            return f"(inr {dump_expr(a)})"
        case EFun(f, x, body):
            return f"(fun {f} {x} {dump_comp(body)})"
        case EPrim(op, args):
            return f"(prim {op} {' '.join(dump_expr(a) for a in args)})"
    raise TypeError(f"not an expression: {e!r}")


def dump_comp(m: Comp) -> str:
    match m:
        case CHole():
            return "_"
        case CRet(e):
            return f"(ret {dump_expr(e)})"
        case CLet(x, b, c):
            return f"(let {x} {dump_comp(b)} {dump_comp(c)})"
        case CApp(f, a):
            return f"(app {dump_expr(f)} {dump_expr(a)})"
        case CCase(e, lx, l, ry, r):
            return f"(case {dump_expr(e)} {lx} {dump_comp(l)} {ry} {dump_comp(r)})"
        case CIf(c, t, e):
            return f"(if {dump_expr(c)} {dump_comp(t)} {dump_comp(e)})"
        case CRaise(e):
            return f"(raise {dump_expr(e)})"
        case CTry(b, x, h):
            return f"(try {dump_comp(b)} {x} {dump_comp(h)})"
        case CRef(e):
            return f"(ref {dump_expr(e)})"
        case CAssign(t, e):
            return f"(assign {dump_expr(t)} {dump_expr(e)})"
        case CDeref(e):
            return f"(deref {dump_expr(e)})"
        case CArrMake(n, i):
            return f"(arr-make {dump_expr(n)} {dump_expr(i)})"
        case CArrGet(a, i):
            return f"(arr-get {dump_expr(a)} {dump_expr(i)})"
        case CArrSet(a, i, e):
            return f"(arr-set {dump_expr(a)} {dump_expr(i)} {dump_expr(e)})"
    raise TypeError(f"not a computation: {m!r}")


def _dump_lockey(key) -> str:
    if isinstance(key, tuple):
        return f"#{key[0]}[{key[1]}]"
    return f"#{key}"


def dump_trace(t: Trace, indent: int = 0) -> str:
    pad = "  " * indent
    nxt = indent + 1

    def sub(child: Trace) -> str:
        return dump_trace(child, nxt)

    match t:
        case THole(locs, k):
            keys = " ".join(_dump_lockey(x) for x in sorted(locs, key=_lockey_sort))
            return f"{pad}(hole ({keys}) {k})"
        case TRet(e):
            return f"{pad}(ret {dump_expr(e)})"
        case TLetSucc(x, t1, t2):
            return f"{pad}(let-s {x}\n{sub(t1)}\n{sub(t2)})"
        case TLetFail(t1, x):
            return f"{pad}(let-f {x}\n{sub(t1)})"
        case TApp(e1, e2, f, x, body):
            return f"{pad}(app {dump_expr(e1)} {dump_expr(e2)} {f} {x}\n{sub(body)})"
        case TCaseInl(e, lx, body, ry):
            return f"{pad}(case-l {dump_expr(e)} {lx} {ry}\n{sub(body)})"
        case TCaseInr(e, lx, ry, body):
            return f"{pad}(case-r {dump_expr(e)} {lx} {ry}\n{sub(body)})"
        case TIfTrue(c, body):
            return f"{pad}(if-t {dump_expr(c)}\n{sub(body)})"
        case TIfFalse(c, body):
            return f"{pad}(if-f {dump_expr(c)}\n{sub(body)})"
        case TRaise(e):
            return f"{pad}(raise {dump_expr(e)})"
        case TTrySucc(body, x):
            return f"{pad}(try-s {x}\n{sub(body)})"
        case TTryFail(body, x, handler):
            return f"{pad}(try-f {x}\n{sub(body)}\n{sub(handler)})"
        case TRef(loc, e):
            return f"{pad}(ref #{loc} {dump_expr(e)})"
        case TAssign(e1, loc, e2):
            return f"{pad}(assign {dump_expr(e1)} #{loc} {dump_expr(e2)})"
        case TDeref(loc, e):
            return f"{pad}(deref #{loc} {dump_expr(e)})"
        case TArrMake(loc, n, e1, e2):
            return f"{pad}(arr-make #{loc} {n} {dump_expr(e1)} {dump_expr(e2)})"
        case TArrGet(e1, e2, loc, i):
            return f"{pad}(arr-get {dump_expr(e1)} {dump_expr(e2)} #{loc} {i})"
        case TArrSet(e1, e2, loc, i, e3):
            return f"{pad}(arr-set {dump_expr(e1)} {dump_expr(e2)} #{loc} {i} {dump_expr(e3)})"
        case TFail(m, path):
            items = " ".join(str(p) for p in path)
            return f"{pad}(fail ({items}) {dump_comp(m)})"
    raise TypeError(f"not a trace: {t!r}")


def _lockey_sort(key):
    if isinstance(key, tuple):
        return (key[0], key[1] + 1)
    return (key, 0)


# --- reader ----------------------------------------------------------------

class TraceParseError(Exception):
    pass


def _tokenize(text: str) -> list:
    out: list = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            out.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(text[j + 1], text[j + 1]))
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise TraceParseError("unterminated string")
            out.append(("str", "".join(buf)))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            out.append(("atom", text[i:j]))
            i = j
    return out


def _read_sexp(tokens: list, pos: int):
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while tokens[pos] != ")":
            item, pos = _read_sexp(tokens, pos)
            items.append(item)
        return items, pos + 1
    if tok == ")":
        raise TraceParseError("unexpected )")
    return tok, pos + 1


def _is_atom(x, name: Optional[str] = None) -> bool:
    return isinstance(x, tuple) and x[0] == "atom" and (name is None or x[1] == name)


def _atom_name(x) -> str:
    if not (isinstance(x, tuple) and x[0] == "atom"):
        raise TraceParseError(f"expected a name, got {x!r}")
    return x[1]


def _parse_num(text: str):
    if any(c in text for c in ".eE") and not text.lstrip("-").isdigit():
        return float(text)
    return int(text)


def _sexp_expr(x) -> Expr:
    if _is_atom(x, "_"):
        return EHole()
    if _is_atom(x, "true"):
        return EBool(True)
    if _is_atom(x, "false"):
        return EBool(False)
    if isinstance(x, tuple) and x[0] == "str":
        return EStr(x[1])
    if isinstance(x, tuple) and x[0] == "atom":
        return ENum(_parse_num(x[1]))
    tag = _atom_name(x[0])
    args = x[1:]
    match tag:
        case "var":
            return EVar(_atom_name(args[0]))
        case "unit":
            return EUnit()
        case "pair":
            return EPair(_sexp_expr(args[0]), _sexp_expr(args[1]))
        case "fst":
            return EFst(_sexp_expr(args[0]))
        case "snd":
            return ESnd(_sexp_expr(args[0]))
        case "inl":
            return EInl(_sexp_expr(args[0]))
        case "inr":
            return EInr(_sexp_expr(args[0]))
        case "fun":
            return EFun(_atom_name(args[0]), _atom_name(args[1]), _sexp_comp(args[2]))
        case "prim":
            return EPrim(_atom_name(args[0]), tuple(_sexp_expr(a) for a in args[1:]))
    raise TraceParseError(f"unknown expression tag {tag}")


def _sexp_comp(x) -> Comp:
    if _is_atom(x, "_"):
        return CHole()
    tag = _atom_name(x[0])
    args = x[1:]
    match tag:
        case "ret":
            return CRet(_sexp_expr(args[0]))
        case "let":
            return CLet(_atom_name(args[0]), _sexp_comp(args[1]), _sexp_comp(args[2]))
        case "app":
            return CApp(_sexp_expr(args[0]), _sexp_expr(args[1]))
        case "case":
            return CCase(_sexp_expr(args[0]), _atom_name(args[1]), _sexp_comp(args[2]),
                         _atom_name(args[3]), _sexp_comp(args[4]))
        case "if":
            return CIf(_sexp_expr(args[0]), _sexp_comp(args[1]), _sexp_comp(args[2]))
        case "raise":
            return CRaise(_sexp_expr(args[0]))
        case "try":
            return CTry(_sexp_comp(args[0]), _atom_name(args[1]), _sexp_comp(args[2]))
        case "ref":
            return CRef(_sexp_expr(args[0]))
        case "assign":
            return CAssign(_sexp_expr(args[0]), _sexp_expr(args[1]))
        case "deref":
            return CDeref(_sexp_expr(args[0]))
        case "arr-make":
            return CArrMake(_sexp_expr(args[0]), _sexp_expr(args[1]))
        case "arr-get":
            return CArrGet(_sexp_expr(args[0]), _sexp_expr(args[1]))
        case "arr-set":
            return CArrSet(_sexp_expr(args[0]), _sexp_expr(args[1]), _sexp_expr(args[2]))
    raise TraceParseError(f"unknown computation tag {tag}")


def _parse_loc(x) -> int:
    name = _atom_name(x)
    if not name.startswith("#"):
        raise TraceParseError(f"expected a location, got {name}")
    return int(name[1:])


def _parse_lockey(x):
    name = _atom_name(x)
    if not name.startswith("#"):
        raise TraceParseError(f"expected a location key, got {name}")
    if "[" in name:
        loc, idx = name[1:-1].split("[")
        return (int(loc), int(idx))
    return int(name[1:])


def _sexp_trace(x) -> Trace:
    tag = _atom_name(x[0])
    args = x[1:]
    match tag:
        case "hole":
            locs = frozenset(_parse_lockey(k) for k in args[0])
            return THole(locs, _atom_name(args[1]))
        case "ret":
            return TRet(_sexp_expr(args[0]))
        case "let-s":
            return TLetSucc(_atom_name(args[0]), _sexp_trace(args[1]), _sexp_trace(args[2]))
        case "let-f":
            return TLetFail(_sexp_trace(args[1]), _atom_name(args[0]))
        case "app":
            return TApp(_sexp_expr(args[0]), _sexp_expr(args[1]),
                        _atom_name(args[2]), _atom_name(args[3]), _sexp_trace(args[4]))
        case "case-l":
            return TCaseInl(_sexp_expr(args[0]), _atom_name(args[1]),
                            _sexp_trace(args[3]), _atom_name(args[2]))
        case "case-r":
            return TCaseInr(_sexp_expr(args[0]), _atom_name(args[1]),
                            _atom_name(args[2]), _sexp_trace(args[3]))
        case "if-t":
            return TIfTrue(_sexp_expr(args[0]), _sexp_trace(args[1]))
        case "if-f":
            return TIfFalse(_sexp_expr(args[0]), _sexp_trace(args[1]))
        case "raise":
            return TRaise(_sexp_expr(args[0]))
        case "try-s":
            return TTrySucc(_sexp_trace(args[1]), _atom_name(args[0]))
        case "try-f":
            return TTryFail(_sexp_trace(args[1]), _atom_name(args[0]), _sexp_trace(args[2]))
        case "ref":
            return TRef(_parse_loc(args[0]), _sexp_expr(args[1]))
        case "assign":
            return TAssign(_sexp_expr(args[0]), _parse_loc(args[1]), _sexp_expr(args[2]))
        case "deref":
            return TDeref(_parse_loc(args[0]), _sexp_expr(args[1]))
        case "arr-make":
            return TArrMake(_parse_loc(args[0]), int(_atom_name(args[1])),
                            _sexp_expr(args[2]), _sexp_expr(args[3]))
        case "arr-get":
            return TArrGet(_sexp_expr(args[0]), _sexp_expr(args[1]),
                           _parse_loc(args[2]), int(_atom_name(args[3])))
        case "arr-set":
            return TArrSet(_sexp_expr(args[0]), _sexp_expr(args[1]),
                           _parse_loc(args[2]), int(_atom_name(args[3])), _sexp_expr(args[4]))
        case "fail":
            path = tuple(
                int(_atom_name(p)) if _atom_name(p).isdigit() else _atom_name(p)
                for p in args[0]
            )
            return TFail(_sexp_comp(args[1]), path)
    raise TraceParseError(f"unknown trace tag {tag}")


def load_trace(text: str) -> Trace:
    tokens = _tokenize(text)
    if not tokens:
        raise TraceParseError("empty trace dump")
    sexp, pos = _read_sexp(tokens, 0)
    if pos != len(tokens):
        raise TraceParseError("trailing garbage after trace")
    return _sexp_trace(sexp)
