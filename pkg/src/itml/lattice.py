"""Prefix order, meets and joins on partial terms, plus trace annotations.

Every syntactic category (expressions, computations, values, results,
environments, stores, traces) carries the compatible partial order
generated by `hole <= t`.  The set of prefixes of a fixed term is a finite
lattice: meet is pointwise erasure-intersection, join exists for prefixes
of a common term and is partial otherwise.

Trace holes are annotated: `THole(L, k) <= T` only when `writes(T) == L`
and `outcome(T) == k`, so a fully elided trace still discloses its write
set and outcome.
"""

from __future__ import annotations

from itertools import chain
from typing import Callable, Iterator

from .syntax import (
    ArrayCell, Comp, CHole, Env, EHole, Expr, Result, ScalarCell, Store,
    Trace, THole, Value, VHole, VClosure, VPair, VInl, VInr, HOLE, LocKey,
    trace_children, trace_local_writes, _subterms,
)


class UndefinedJoinError(Exception):
    """Join requested outside a common prefix lattice: internal slicer bug."""


class UndefinedMeetError(Exception):
    """Meet of traces/results that share no full term (precondition breach)."""


class CapExceededError(Exception):
    """Enumeration request over the configured size cap."""


# ---------------------------------------------------------------------------
# Trace annotations

def outcome(t: Trace) -> str:
    """val/exn outcome of a trace; cached on the node at construction."""
    return t.k


def writes(t: Trace) -> frozenset:
    """The set of locations (or array elements) allocated or updated by t.

    Materialized iteratively and cached only on the queried node, so
    repeatedly asking about disjoint subtrees stays linear overall.
    """
    cached = t._writes
    if cached is not None:
        return cached
    acc: list = []
    stack = [t]
    while stack:
        node = stack.pop()
        if node._writes is not None:
            acc.append(node._writes)
            continue
        acc.append(trace_local_writes(node))
        stack.extend(trace_children(node))
    result = frozenset(chain.from_iterable(acc))
    object.__setattr__(t, "_writes", result)
    return result


class WritesIndex:
    """Memoized membership queries `key in writes(T)` for one slicing session.

    Avoids materializing the (possibly huge) write sets of enclosing trace
    nodes: the criterion store is sparse, so slicing asks about few keys,
    and each (node, key) pair is resolved at most once.
    """

    def __init__(self) -> None:
        self._memo: dict = {}

    def contains(self, t: Trace, key: LocKey) -> bool:
        memo_key = (id(t), key)
        hit = self._memo.get(memo_key)
        if hit is not None:
            return hit
        if t._writes is not None:
            result = key in t._writes
        elif key in trace_local_writes(t):
            result = True
        else:
            result = any(self.contains(child, key) for child in trace_children(t))
        self._memo[memo_key] = result
        return result

    def touches(self, t: Trace, store: Store) -> bool:
        """Does t write any location the (sparse) store has information on?"""
        return any(self.contains(t, key) for key in store.demanded())


# ---------------------------------------------------------------------------
# Store erasure

def erase(store: Store, locs) -> Store:
    """Store with every entry named in locs replaced by hole; idempotent."""
    return erase_by(store, lambda key: key in locs)


def erase_by(store: Store, hit: Callable[[LocKey], bool]) -> Store:
    new = {}
    for loc, cell in store.cells():
        if isinstance(cell, ScalarCell):
            if not hit(loc):
                new[loc] = cell
        else:
            kept = {i: v for i, v in cell.items.items() if not hit((loc, i))}
            if kept:
                new[loc] = ArrayCell(cell.length, kept)
    return Store(new)


# ---------------------------------------------------------------------------
# Prefix order

def leq_expr(a: Expr, b: Expr) -> bool:
    if isinstance(a, EHole):
        return True
    if type(a) is not type(b):
        return False
    if not _atoms_match(a, b):
        return False
    return all(leq(x, y) for x, y in zip(_subterms(a), _subterms(b)))


def leq_comp(a: Comp, b: Comp) -> bool:
    if isinstance(a, CHole):
        return True
    if type(a) is not type(b):
        return False
    if not _atoms_match(a, b):
        return False
    return all(leq(x, y) for x, y in zip(_subterms(a), _subterms(b)))


def _is_term_tuple(x) -> bool:
    return isinstance(x, tuple) and bool(x) and isinstance(x[0], (Expr, Comp, Value, Trace))


def _atoms_match(a, b) -> bool:
    """Non-term fields (names, operators, literals, paths) must agree exactly."""
    for name in a.__dataclass_fields__:
        if name == "span":
            continue
        x = getattr(a, name)
        if isinstance(x, (Expr, Comp, Value, Trace, Env)) or _is_term_tuple(x):
            continue
        if x != getattr(b, name):
            return False
    # literal payloads need type-exact comparison (1 vs 1.0, bool vs int)
    av = getattr(a, "value", None)
    if av is not None and type(av) is not type(getattr(b, "value", None)):
        return False
    return True


def leq_value(a: Value, b: Value) -> bool:
    if isinstance(a, VHole):
        return True
    if type(a) is not type(b):
        return False
    match a:
        case VPair(x1, y1):
            return leq_value(x1, b.fst) and leq_value(y1, b.snd)
        case VInl(x1) | VInr(x1):
            return leq_value(x1, b.arg)
        case VClosure(env1, f1, x1, m1):
            return (
                f1 == b.fname and x1 == b.xname
                and leq_env(env1, b.env) and leq_comp(m1, b.body)
            )
        case _:
            return a == b


def leq_result(a: Result, b: Result) -> bool:
    return a.outcome == b.outcome and leq_value(a.value, b.value)


def leq_env(a: Env, b: Env) -> bool:
    return all(leq_value(v, b.get(k)) for k, v in a.items())


def _cell_pairings(a: Store, b: Store) -> Iterator[tuple]:
    for loc in a.locs() | b.locs():
        yield loc, a.cell(loc), b.cell(loc)


def leq_store(a: Store, b: Store) -> bool:
    for _loc, ca, cb in _cell_pairings(a, b):
        if ca is None:
            continue
        if isinstance(ca, ScalarCell):
            if cb is None or isinstance(cb, ArrayCell):
                return False
            if not leq_value(ca.value, cb.value):
                return False
        else:
            if cb is None or isinstance(cb, ScalarCell) or cb.length != ca.length:
                return False
            if not all(leq_value(v, cb.get(i)) for i, v in ca.items.items()):
                return False
    return True


def leq_trace(a: Trace, b: Trace) -> bool:
    if isinstance(a, THole):
        return a.outcome == outcome(b) and a.locs == writes(b)
    if type(a) is not type(b):
        return False
    if not _atoms_match(a, b):
        return False
    for name in a.__dataclass_fields__:
        x = getattr(a, name)
        if isinstance(x, Expr):
            if not leq_expr(x, getattr(b, name)):
                return False
        elif isinstance(x, Comp):
            if not leq_comp(x, getattr(b, name)):
                return False
        elif isinstance(x, Trace):
            if not leq_trace(x, getattr(b, name)):
                return False
    return True


def leq(a, b) -> bool:
    """Prefix order, dispatched on category."""
    if isinstance(a, Expr):
        return leq_expr(a, b)
    if isinstance(a, Comp):
        return leq_comp(a, b)
    if isinstance(a, Value):
        return leq_value(a, b)
    if isinstance(a, Result):
        return leq_result(a, b)
    if isinstance(a, Env):
        return leq_env(a, b)
    if isinstance(a, Store):
        return leq_store(a, b)
    if isinstance(a, Trace):
        return leq_trace(a, b)
    raise TypeError(f"no prefix order on {a!r}")


# ---------------------------------------------------------------------------
# Meets.  Total on expressions/computations/values (mismatches meet at
# hole); traces and results require prefixes of a common run.

def _rebuild(node, new_children):
    """Copy of node with its term-children replaced, cached fields dropped."""
    kwargs = {}
    it = iter(new_children)
    for name in node.__dataclass_fields__:
        if name == "span":
            continue
        x = getattr(node, name)
        if isinstance(x, (Expr, Comp, Trace)):
            kwargs[name] = next(it)
        elif _is_term_tuple(x):
            kwargs[name] = tuple(next(it) for _ in x)
        else:
            kwargs[name] = x
    return type(node)(**kwargs)


def meet_expr(a: Expr, b: Expr) -> Expr:
    if isinstance(a, EHole) or isinstance(b, EHole):
        return EHole()
    if type(a) is not type(b) or not _atoms_match(a, b):
        return EHole()
    kids = [meet(x, y) for x, y in zip(_subterms(a), _subterms(b))]
    return _rebuild(a, kids)


def meet_comp(a: Comp, b: Comp) -> Comp:
    if isinstance(a, CHole) or isinstance(b, CHole):
        return CHole()
    if type(a) is not type(b) or not _atoms_match(a, b):
        return CHole()
    kids = [meet(x, y) for x, y in zip(_subterms(a), _subterms(b))]
    return _rebuild(a, kids)


def meet_value(a: Value, b: Value) -> Value:
    if isinstance(a, VHole) or isinstance(b, VHole):
        return HOLE
    if type(a) is not type(b):
        return HOLE
    match a:
        case VPair(x1, y1):
            return VPair(meet_value(x1, b.fst), meet_value(y1, b.snd))
        case VInl(x1):
            return VInl(meet_value(x1, b.arg))
        case VInr(x1):
            return VInr(meet_value(x1, b.arg))
        case VClosure(env1, f1, x1, m1):
            if f1 != b.fname or x1 != b.xname:
                return HOLE
            return VClosure(meet_env(env1, b.env), f1, x1, meet_comp(m1, b.body))
        case _:
            return a if a == b else HOLE


def meet_result(a: Result, b: Result) -> Result:
    if a.outcome != b.outcome:
        raise UndefinedMeetError(f"outcomes differ: {a.outcome} vs {b.outcome}")
    return Result(a.outcome, meet_value(a.value, b.value))


def meet_env(a: Env, b: Env) -> Env:
    common = {}
    for k, v in a.items():
        if k in b:
            common[k] = meet_value(v, b.get(k))
    return Env(common)


def meet_store(a: Store, b: Store) -> Store:
    out: dict = {}
    for loc, ca, cb in _cell_pairings(a, b):
        if ca is None or cb is None:
            continue
        if isinstance(ca, ScalarCell) and isinstance(cb, ScalarCell):
            out[loc] = ScalarCell(meet_value(ca.value, cb.value))
        elif isinstance(ca, ArrayCell) and isinstance(cb, ArrayCell) and ca.length == cb.length:
            items = {i: meet_value(v, cb.get(i)) for i, v in ca.items.items() if i in cb.items}
            out[loc] = ArrayCell(ca.length, items)
        else:
            raise UndefinedMeetError(f"cell shape mismatch at #{loc}")
    return Store(out)


def meet_trace(a: Trace, b: Trace) -> Trace:
    if isinstance(a, THole):
        return a
    if isinstance(b, THole):
        return b
    if type(a) is not type(b) or not _atoms_match(a, b):
        raise UndefinedMeetError(
            f"traces of different shapes: {type(a).__name__} vs {type(b).__name__}"
        )
    kids = []
    for name in a.__dataclass_fields__:
        x = getattr(a, name)
        if isinstance(x, (Expr, Comp, Trace)):
            kids.append(meet(x, getattr(b, name)))
    return _rebuild(a, kids)


def meet(a, b):
    if isinstance(a, Expr):
        return meet_expr(a, b)
    if isinstance(a, Comp):
        return meet_comp(a, b)
    if isinstance(a, Value):
        return meet_value(a, b)
    if isinstance(a, Result):
        return meet_result(a, b)
    if isinstance(a, Env):
        return meet_env(a, b)
    if isinstance(a, Store):
        return meet_store(a, b)
    if isinstance(a, Trace):
        return meet_trace(a, b)
    raise TypeError(f"no meet on {a!r}")


# ---------------------------------------------------------------------------
# Joins, defined inside the prefix lattice of a common term.

def join_expr(a: Expr, b: Expr) -> Expr:
    if isinstance(a, EHole):
        return b
    if isinstance(b, EHole):
        return a
    if type(a) is not type(b) or not _atoms_match(a, b):
        raise UndefinedJoinError(f"no upper bound: {a!r} vs {b!r}")
    kids = [join(x, y) for x, y in zip(_subterms(a), _subterms(b))]
    return _rebuild(a, kids)


def join_comp(a: Comp, b: Comp) -> Comp:
    if isinstance(a, CHole):
        return b
    if isinstance(b, CHole):
        return a
    if type(a) is not type(b) or not _atoms_match(a, b):
        raise UndefinedJoinError(f"no upper bound: {a!r} vs {b!r}")
    kids = [join(x, y) for x, y in zip(_subterms(a), _subterms(b))]
    return _rebuild(a, kids)


def join_value(a: Value, b: Value) -> Value:
    if isinstance(a, VHole):
        return b
    if isinstance(b, VHole):
        return a
    if type(a) is not type(b):
        raise UndefinedJoinError(f"no upper bound: {a!r} vs {b!r}")
    match a:
        case VPair(x1, y1):
            return VPair(join_value(x1, b.fst), join_value(y1, b.snd))
        case VInl(x1):
            return VInl(join_value(x1, b.arg))
        case VInr(x1):
            return VInr(join_value(x1, b.arg))
        case VClosure(env1, f1, x1, m1):
            if f1 != b.fname or x1 != b.xname:
                raise UndefinedJoinError("closures with different binders")
            return VClosure(join_env(env1, b.env), f1, x1, join_comp(m1, b.body))
        case _:
            if a != b:
                raise UndefinedJoinError(f"no upper bound: {a!r} vs {b!r}")
            return a


def join_result(a: Result, b: Result) -> Result:
    if a.outcome != b.outcome:
        raise UndefinedJoinError(f"outcomes differ: {a.outcome} vs {b.outcome}")
    return Result(a.outcome, join_value(a.value, b.value))


def join_env(a: Env, b: Env) -> Env:
    out = dict(a.items())
    for k, v in b.items():
        out[k] = join_value(out[k], v) if k in out else v
    return Env(out)


def join_store(a: Store, b: Store) -> Store:
    out: dict = {}
    for loc, ca, cb in _cell_pairings(a, b):
        if ca is None:
            out[loc] = cb
        elif cb is None:
            out[loc] = ca
        elif isinstance(ca, ScalarCell) and isinstance(cb, ScalarCell):
            out[loc] = ScalarCell(join_value(ca.value, cb.value))
        elif isinstance(ca, ArrayCell) and isinstance(cb, ArrayCell) and ca.length == cb.length:
            items = dict(ca.items)
            for i, v in cb.items.items():
                items[i] = join_value(items[i], v) if i in items else v
            out[loc] = ArrayCell(ca.length, items)
        else:
            raise UndefinedJoinError(f"cell shape mismatch at #{loc}")
    return Store(out)


def join_trace(a: Trace, b: Trace) -> Trace:
    if isinstance(a, THole):
        return b
    if isinstance(b, THole):
        return a
    if type(a) is not type(b) or not _atoms_match(a, b):
        raise UndefinedJoinError(
            f"traces of different shapes: {type(a).__name__} vs {type(b).__name__}"
        )
    kids = []
    for name in a.__dataclass_fields__:
        x = getattr(a, name)
        if isinstance(x, (Expr, Comp, Trace)):
            kids.append(join(x, getattr(b, name)))
    return _rebuild(a, kids)


def join(a, b):
    if isinstance(a, Expr):
        return join_expr(a, b)
    if isinstance(a, Comp):
        return join_comp(a, b)
    if isinstance(a, Value):
        return join_value(a, b)
    if isinstance(a, Result):
        return join_result(a, b)
    if isinstance(a, Env):
        return join_env(a, b)
    if isinstance(a, Store):
        return join_store(a, b)
    if isinstance(a, Trace):
        return join_trace(a, b)
    raise TypeError(f"no join on {a!r}")


# alias matching the operation's common-term precondition
join_within = join


# ---------------------------------------------------------------------------
# Exhaustive prefix enumeration (the oracle's workhorse).
#
# Bottom is yielded first and the full term last; the count is the product,
# over non-hole nodes, of (1 + product of child counts).

DEFAULT_POINT_CAP = 16


def _hole_points(t) -> int:
    """Number of positions where a hole can be introduced."""
    if isinstance(t, (EHole, CHole, VHole)):
        return 0
    if isinstance(t, (Expr, Comp)):
        return 1 + sum(_hole_points(c) for c in _subterms(t))
    if isinstance(t, Value):
        match t:
            case VPair(a, b):
                return 1 + _hole_points(a) + _hole_points(b)
            case VInl(a) | VInr(a):
                return 1 + _hole_points(a)
            case VClosure(env, _, _, body):
                return 1 + _hole_points(env) + _hole_points(body)
            case _:
                return 1
    if isinstance(t, Result):
        return _hole_points(t.value)
    if isinstance(t, Env):
        return sum(_hole_points(v) for _, v in t.items())
    if isinstance(t, Store):
        total = 0
        for _loc, cell in t.cells():
            if isinstance(cell, ScalarCell):
                total += _hole_points(cell.value)
            else:
                total += sum(_hole_points(v) for v in cell.items.values())
        return total
    if isinstance(t, Trace):
        n = 1
        for name in t.__dataclass_fields__:
            x = getattr(t, name)
            if isinstance(x, (Expr, Comp, Trace)):
                n += _hole_points(x)
        return n
    raise TypeError(f"cannot enumerate {t!r}")


def lattice_size(t) -> int:
    """|Prefix(t)| computed by the recursive product formula."""
    if isinstance(t, (EHole, CHole, VHole)):
        return 1
    if isinstance(t, (Expr, Comp)):
        n = 1
        for c in _subterms(t):
            n *= lattice_size(c)
        return 1 + n
    if isinstance(t, Value):
        match t:
            case VPair(a, b):
                return 1 + lattice_size(a) * lattice_size(b)
            case VInl(a) | VInr(a):
                return 1 + lattice_size(a)
            case VClosure(env, _, _, body):
                return 1 + lattice_size(env) * lattice_size(body)
            case _:
                return 2
    if isinstance(t, Result):
        return lattice_size(t.value)
    if isinstance(t, Env):
        n = 1
        for _, v in t.items():
            n *= lattice_size(v)
        return n
    if isinstance(t, Store):
        n = 1
        for _loc, cell in t.cells():
            if isinstance(cell, ScalarCell):
                n *= lattice_size(cell.value)
            else:
                for v in cell.items.values():
                    n *= lattice_size(v)
        return n
    if isinstance(t, Trace):
        n = 1
        for name in t.__dataclass_fields__:
            x = getattr(t, name)
            if isinstance(x, (Expr, Comp, Trace)):
                n *= lattice_size(x)
        return 1 + n
    raise TypeError(f"cannot size {t!r}")


def _product(iterables) -> Iterator[tuple]:
    """Lazy cartesian product of enumeration thunks, leftmost slowest."""
    if not iterables:
        yield ()
        return
    head, rest = iterables[0], iterables[1:]
    for h in head():
        for r in _product(rest):
            yield (h,) + r


def _enum(t) -> Iterator:
    if isinstance(t, (EHole, CHole)):
        yield t
        return
    if isinstance(t, Expr):
        yield EHole()
        kids = _subterms(t)
        for combo in _product([lambda c=c: _enum(c) for c in kids]):
            yield _rebuild(t, list(combo))
        return
    if isinstance(t, Comp):
        yield CHole()
        kids = _subterms(t)
        for combo in _product([lambda c=c: _enum(c) for c in kids]):
            yield _rebuild(t, list(combo))
        return
    if isinstance(t, Value):
        if isinstance(t, VHole):
            yield t
            return
        yield HOLE
        match t:
            case VPair(a, b):
                for x in _enum(a):
                    for y in _enum(b):
                        yield VPair(x, y)
            case VInl(a):
                for x in _enum(a):
                    yield VInl(x)
            case VInr(a):
                for x in _enum(a):
                    yield VInr(x)
            case VClosure(env, f, xn, body):
                for e in _enum(env):
                    for b2 in _enum(body):
                        yield VClosure(e, f, xn, b2)
            case _:
                yield t
        return
    if isinstance(t, Result):
        for v in _enum(t.value):
            yield Result(t.outcome, v)
        return
    if isinstance(t, Env):
        entries = sorted(t.items())
        for combo in _product([lambda v=v: _enum(v) for _, v in entries]):
            yield Env({k: cv for (k, _), cv in zip(entries, combo)})
        return
    if isinstance(t, Store):
        flat: list = []
        for loc, cell in sorted(t.cells()):
            if isinstance(cell, ScalarCell):
                flat.append(((loc, None, None), cell.value))
            else:
                for i, v in sorted(cell.items.items()):
                    flat.append(((loc, i, cell.length), v))
        for combo in _product([lambda v=v: _enum(v) for _, v in flat]):
            m: dict = {}
            for ((loc, i, length), _), cv in zip(flat, combo):
                if i is None:
                    m[loc] = ScalarCell(cv)
                else:
                    prev = m.get(loc) or ArrayCell(length)
                    m[loc] = prev.set(i, cv)
            yield Store(m)
        return
    if isinstance(t, Trace):
        yield THole(writes(t), outcome(t))
        kids = []
        for name in t.__dataclass_fields__:
            x = getattr(t, name)
            if isinstance(x, (Expr, Comp, Trace)):
                kids.append(x)
        for combo in _product([lambda c=c: _enum(c) for c in kids]):
            yield _rebuild(t, list(combo))
        return
    raise TypeError(f"cannot enumerate {t!r}")


def enumerate_prefixes(t, point_cap: int = DEFAULT_POINT_CAP) -> Iterator:
    """Every element of Prefix(t) exactly once, bottom first, top last."""
    points = _hole_points(t)
    if points > point_cap:
        raise CapExceededError(f"{points} hole positions exceed cap {point_cap}")
    return _enum(t)


# ---------------------------------------------------------------------------
# Prefix-with-witness convenience used by property tests.

class PrefixWitness:
    """A partial term together with the full term it is a prefix of."""

    __slots__ = ("full", "partial")

    def __init__(self, full, partial):
        if not leq(partial, full):
            raise ValueError("not a prefix")
        self.full = full
        self.partial = partial

    def __repr__(self) -> str:
        return f"PrefixWitness(partial={self.partial!r})"
