"""Untyped frame-stack reduction.

``red`` walks the rules in the order the reduction relation is usually
presented and matches on the whole stack shape at once.  ``red2`` dispatches
on the execution mode and the redex first and only looks at the evaluation
context when the redex is a value.  Both return ``None`` when no rule
applies; ``run`` tells final configurations apart from stuck ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .frontend import NPE
from .heap import NPE_LOC, Heap, HeapObject, alloc, get_class_name, has_field, read, write
from .program import find_class, flds, method_lookup, subtype_leq
from .syntax import (
    THIS,
    CtxLet,
    CtxTry,
    Expr,
    FieldRead,
    FieldWrite,
    Frame,
    FrameStack,
    If,
    Invoke,
    Let,
    Loc,
    LocV,
    New,
    Null,
    Program,
    Throw,
    TryCatch,
    Val,
    Value,
    Var,
    is_loc_value,
    loc_of,
    value_of,
)

RULES = (
    "newk", "letin", "letgo", "ifeq", "ifneq", "mthdnpe", "mthd", "mthdret",
    "assignnpe", "assignev", "varnpe", "var", "thrownull", "throw", "ctchin",
    "ctchnrml", "ctchexok", "letex", "methodex", "ctchexnok",
)

Step = Optional[Tuple[Heap, FrameStack, str]]
NPE_VAL = LocV(NPE_LOC)


# -- substitution ----------------------------------------------------------------

def subst(e: Expr, name: Value, l: Loc) -> Expr:
    return subst_many(e, {name: l})


def subst_many(e: Expr, sigma: Mapping[Value, Loc]) -> Expr:
    """Replace free binders (``Var`` or ``This``) by location values, simultaneously.

    Substituted values are closed, so capture is impossible; only shadowing
    by ``let`` and ``catch`` binders has to be respected.
    """
    if not sigma:
        return e

    def sv(v: Value) -> Value:
        return value_of(sigma[v]) if v in sigma else v

    match e:
        case Val(v):
            return Val(sv(v))
        case New(mode, cls, args):
            return New(mode, cls, tuple(sv(a) for a in args))
        case Let(cls, var, bound, body):
            inner = _without(sigma, var)
            return Let(cls, var, subst_many(bound, sigma), subst_many(body, inner))
        case FieldRead(recv, fld):
            return FieldRead(sv(recv), fld)
        case FieldWrite(recv, fld, val):
            return FieldWrite(sv(recv), fld, sv(val))
        case If(v1, v2, then, orelse):
            return If(sv(v1), sv(v2), subst_many(then, sigma), subst_many(orelse, sigma))
        case Invoke(recv, mth, args):
            return Invoke(sv(recv), mth, tuple(sv(a) for a in args))
        case Throw(v):
            return Throw(sv(v))
        case TryCatch(body, mode, cls, var, handler):
            return TryCatch(subst_many(body, sigma), mode, cls, var,
                            subst_many(handler, _without(sigma, var)))
    raise TypeError(f"not an expression: {e!r}")


def _without(sigma: Mapping[Value, Loc], name: str) -> Mapping[Value, Loc]:
    key = Var(name)
    if key not in sigma:
        return sigma
    return {k: v for k, v in sigma.items() if k != key}


def free_vars(e: Expr) -> frozenset:
    """Free binders of ``e`` (``Var`` and ``This`` values)."""
    def fv(v):
        return {v} if isinstance(v, Var) or v == THIS else set()

    match e:
        case Val(v) | Throw(v) | FieldRead(v, _):
            return frozenset(fv(v))
        case FieldWrite(r, _, v):
            return frozenset(fv(r) | fv(v))
        case New(_, _, args):
            return frozenset().union(*map(fv, args))
        case Invoke(r, _, args):
            return frozenset(fv(r)).union(*map(fv, args))
        case If(v1, v2, a, b):
            return frozenset(fv(v1) | fv(v2)) | free_vars(a) | free_vars(b)
        case Let(_, x, bound, body):
            return free_vars(bound) | (free_vars(body) - {Var(x)})
        case TryCatch(body, _, _, x, handler):
            return free_vars(body) | (free_vars(handler) - {Var(x)})
    raise TypeError(f"not an expression: {e!r}")


# -- shared helpers ------------------------------------------------------------------

def all_locs(vs: Sequence[Value]) -> bool:
    return all(is_loc_value(v) for v in vs)


def get_invoke_body(p: Program, d0: Optional[str], n: int, m: str,
                    vs: Tuple[Value, ...], h: Heap, ctx, rest: FrameStack) -> Step:
    """Push the body frame of ``n.m(vs)`` on top of the calling frame.

    ``d0`` is the runtime class of ``n`` (``None`` when ``n`` is unmapped).
    Returns ``None`` on any lookup failure or arity mismatch.
    """
    if d0 is None:
        return None
    found = method_lookup(p, d0, m)
    if found is None:
        return None
    md = found[1]
    if len(md.params) != len(vs):
        return None
    sigma: Dict[Value, Loc] = {Var(prm.name): loc_of(v) for prm, v in zip(md.params, vs)}
    sigma[THIS] = n
    body = subst_many(md.body, sigma)
    caller = Frame(ctx, Invoke(LocV(n), m, vs), None)
    return (h, (Frame((), body, None), caller) + rest, "mthd")


def new_object(p: Program, h: Heap, c: str, args: Tuple[Value, ...]) -> Optional[Tuple[int, Heap]]:
    if find_class(p, c) is None:
        return None
    names = flds(p, c)
    if len(names) != len(args):
        return None
    l0, h1 = alloc(h, p, c)
    obj = HeapObject({f.name: loc_of(a) for f, a in zip(names, args)}, c)
    return l0, h1.install(l0, obj)


def _is_caller(fr: Frame) -> bool:
    return fr.mode is None and isinstance(fr.redex, Invoke)


# -- red: rules in presentation order ---------------------------------------------

def red(p: Program, h: Heap, fs: FrameStack) -> Step:
    match fs:
        case (Frame(ctx, New(_, c, args), None), *rest) if all_locs(args):
            made = new_object(p, h, c, args)
            if made is None:
                return None
            l0, h2 = made
            return (h2, (Frame(ctx, Val(LocV(l0)), None), *rest), "newk")

        case (Frame(ctx, Let(c, x, e1, e2), None), *rest):
            return (h, (Frame((CtxLet(c, x, e2),) + ctx, e1, None), *rest), "letin")

        case (Frame((CtxLet(_, x, e), *ctx), Val(v), None), *rest) if is_loc_value(v):
            return (h, (Frame(tuple(ctx), subst(e, Var(x), loc_of(v)), None), *rest), "letgo")

        case (Frame(ctx, If(v1, v2, e1, e2), None), *rest) if is_loc_value(v1) and is_loc_value(v2):
            if loc_of(v1) == loc_of(v2):
                return (h, (Frame(ctx, e1, None), *rest), "ifeq")
            return (h, (Frame(ctx, e2, None), *rest), "ifneq")

        case (Frame(ctx, Invoke(Null(), _, args), None), *rest) if all_locs(args):
            return (h, (Frame(ctx, NPE_VAL_EXPR, NPE), *rest), "mthdnpe")

        case (Frame(ctx, Invoke(LocV(n), m, args), None), *rest) if all_locs(args):
            return get_invoke_body(p, get_class_name(h, n), n, m, args, h, ctx, tuple(rest))

        case (Frame((), Val(v), None), Frame(ctx, Invoke(), None), *rest) if is_loc_value(v):
            return (h, (Frame(ctx, Val(v), None), *rest), "mthdret")

        case (Frame(ctx, FieldWrite(Null(), _, v), None), *rest) if is_loc_value(v):
            return (h, (Frame(ctx, NPE_VAL_EXPR, NPE), *rest), "assignnpe")

        case (Frame(ctx, FieldWrite(LocV(n), x, v), None), *rest) if is_loc_value(v):
            if n not in h:
                return None
            return (write(h, n, x, loc_of(v)), (Frame(ctx, Val(v), None), *rest), "assignev")

        case (Frame(ctx, FieldRead(Null(), _), None), *rest):
            return (h, (Frame(ctx, NPE_VAL_EXPR, NPE), *rest), "varnpe")

        case (Frame(ctx, FieldRead(LocV(n), x), None), *rest):
            if not has_field(h, n, x):
                return None
            return (h, (Frame(ctx, Val(value_of(read(h, n, x))), None), *rest), "var")

        case (Frame(ctx, Throw(Null()), None), *rest):
            return (h, (Frame(ctx, NPE_VAL_EXPR, NPE), *rest), "thrownull")

        case (Frame(ctx, Throw(LocV(n)), None), *rest):
            d = get_class_name(h, n)
            if d is None:
                return None
            return (h, (Frame(ctx, Val(LocV(n)), d), *rest), "throw")

        case (Frame(ctx, TryCatch(e1, mu, c, x, e2), None), *rest):
            return (h, (Frame((CtxTry(mu, c, x, e2),) + ctx, e1, None), *rest), "ctchin")

        case (Frame((CtxTry(), *ctx), Val(v), None), *rest) if is_loc_value(v):
            return (h, (Frame(tuple(ctx), Val(v), None), *rest), "ctchnrml")

        case (Frame((CtxTry(_, c, x, e2), *ctx), Val(v), str(c1)), *rest) \
                if is_loc_value(v) and subtype_leq(p, c1, c):
            return (h, (Frame(tuple(ctx), subst(e2, Var(x), loc_of(v)), None), *rest), "ctchexok")

        case (Frame((CtxLet(), *ctx), Val(v), str(c1)), *rest) if is_loc_value(v):
            return (h, (Frame(tuple(ctx), Val(v), c1), *rest), "letex")

        case (Frame((), Val(v), str(c1)), Frame(ctx, Invoke(), None), *rest) if is_loc_value(v):
            return (h, (Frame(ctx, Val(v), c1), *rest), "methodex")

        case (Frame((CtxTry(_, c, _, _), *ctx), Val(v), str(c1)), *rest) \
                if is_loc_value(v) and not subtype_leq(p, c1, c):
            return (h, (Frame(tuple(ctx), Val(v), c1), *rest), "ctchexnok")

    return None


NPE_VAL_EXPR = Val(NPE_VAL)


# -- red2: mode first, then redex, context only for values ---------------------------

def red2(p: Program, h: Heap, fs: FrameStack) -> Step:
    if not fs:
        return None
    top, rest = fs[0], fs[1:]
    ctx, e, mode = top.ctx, top.redex, top.mode

    if mode is None:
        if isinstance(e, Val):
            return _value_normal(h, ctx, e, rest) if is_loc_value(e.v) else None
        return _redex_normal(p, h, ctx, e, rest)

    if isinstance(e, Val) and is_loc_value(e.v):
        return _value_exceptional(p, h, ctx, e, mode, rest)
    return None


def _value_normal(h: Heap, ctx, e: Val, rest: FrameStack) -> Step:
    if ctx:
        node = ctx[0]
        if isinstance(node, CtxLet):
            body = subst(node.body, Var(node.var), loc_of(e.v))
            return (h, (Frame(ctx[1:], body, None),) + rest, "letgo")
        return (h, (Frame(ctx[1:], e, None),) + rest, "ctchnrml")
    if rest and _is_caller(rest[0]):
        return (h, (Frame(rest[0].ctx, e, None),) + rest[1:], "mthdret")
    return None


def _value_exceptional(p: Program, h: Heap, ctx, e: Val, c1: str, rest: FrameStack) -> Step:
    if ctx:
        node = ctx[0]
        if isinstance(node, CtxLet):
            return (h, (Frame(ctx[1:], e, c1),) + rest, "letex")
        if subtype_leq(p, c1, node.cls):
            handler = subst(node.handler, Var(node.var), loc_of(e.v))
            return (h, (Frame(ctx[1:], handler, None),) + rest, "ctchexok")
        return (h, (Frame(ctx[1:], e, c1),) + rest, "ctchexnok")
    if rest and _is_caller(rest[0]):
        return (h, (Frame(rest[0].ctx, e, c1),) + rest[1:], "methodex")
    return None


def _redex_normal(p: Program, h: Heap, ctx, e: Expr, rest: FrameStack) -> Step:
    def same(redex, mode=None):
        return (Frame(ctx, redex, mode),) + rest

    if isinstance(e, Let):
        return (h, (Frame((CtxLet(e.cls, e.var, e.body),) + ctx, e.bound, None),) + rest, "letin")
    if isinstance(e, TryCatch):
        return (h, (Frame((CtxTry(e.mode, e.cls, e.var, e.handler),) + ctx, e.body, None),) + rest,
                "ctchin")
    if isinstance(e, New):
        if not all_locs(e.args):
            return None
        made = new_object(p, h, e.cls, e.args)
        if made is None:
            return None
        l0, h2 = made
        return (h2, same(Val(LocV(l0))), "newk")
    if isinstance(e, If):
        if not (is_loc_value(e.v1) and is_loc_value(e.v2)):
            return None
        if loc_of(e.v1) == loc_of(e.v2):
            return (h, same(e.then), "ifeq")
        return (h, same(e.orelse), "ifneq")
    if isinstance(e, Invoke):
        if not all_locs(e.args):
            return None
        if isinstance(e.recv, Null):
            return (h, same(NPE_VAL_EXPR, NPE), "mthdnpe")
        if isinstance(e.recv, LocV):
            n = e.recv.loc
            return get_invoke_body(p, get_class_name(h, n), n, e.mth, e.args, h, ctx, rest)
        return None
    if isinstance(e, FieldWrite):
        if not is_loc_value(e.val):
            return None
        if isinstance(e.recv, Null):
            return (h, same(NPE_VAL_EXPR, NPE), "assignnpe")
        if isinstance(e.recv, LocV) and e.recv.loc in h:
            return (write(h, e.recv.loc, e.fld, loc_of(e.val)), same(Val(e.val)), "assignev")
        return None
    if isinstance(e, FieldRead):
        if isinstance(e.recv, Null):
            return (h, same(NPE_VAL_EXPR, NPE), "varnpe")
        if isinstance(e.recv, LocV) and has_field(h, e.recv.loc, e.fld):
            return (h, same(Val(value_of(read(h, e.recv.loc, e.fld)))), "var")
        return None
    if isinstance(e, Throw):
        if isinstance(e.v, Null):
            return (h, same(NPE_VAL_EXPR, NPE), "thrownull")
        if isinstance(e.v, LocV):
            d = get_class_name(h, e.v.loc)
            if d is None:
                return None
            return (h, same(Val(e.v), d), "throw")
        return None
    return None


ENGINES: Dict[str, Callable] = {"red": red, "red2": red2}


# -- stack shape -------------------------------------------------------------------

def well_formed_framestack(fs: FrameStack) -> bool:
    if not fs:
        return False
    for fr in fs[1:]:
        if fr.mode is not None or not isinstance(fr.redex, Invoke):
            return False
        if not (is_loc_value(fr.redex.recv) and all_locs(fr.redex.args)):
            return False
    return True


def exceptional_only_on_top(fs: FrameStack) -> bool:
    return all(fr.mode is None for fr in fs[1:])


# -- driver ------------------------------------------------------------------------

@dataclass
class NormalResult:
    loc: Loc
    heap: Heap
    steps: int


@dataclass
class UncaughtException:
    loc: Loc
    cls: str
    heap: Heap
    steps: int


@dataclass
class Stuck:
    heap: Heap
    stack: tuple
    steps: int


@dataclass
class OutOfFuel:
    heap: Heap
    stack: tuple
    steps: int


Outcome = Union[NormalResult, UncaughtException, Stuck, OutOfFuel]


@dataclass
class TraceEvent:
    step: int
    rule: str
    stack_depth: int
    heap_size: int
    mode: Optional[str]
    gamma_size: Optional[int] = None

    def to_json(self) -> str:
        d = {
            "step": self.step,
            "rule": self.rule,
            "stackDepth": self.stack_depth,
            "heapSize": self.heap_size,
            "mode": "normal" if self.mode is None else self.mode,
        }
        if self.gamma_size is not None:
            d["gammaSize"] = self.gamma_size
        return json.dumps(d)


def classify(h: Heap, fs: FrameStack, steps: int, stack=None) -> Outcome:
    """Outcome of a configuration no rule applies to."""
    stack = fs if stack is None else stack
    if len(fs) == 1 and not fs[0].ctx and isinstance(fs[0].redex, Val) \
            and is_loc_value(fs[0].redex.v):
        l = loc_of(fs[0].redex.v)
        if fs[0].mode is None:
            return NormalResult(l, h, steps)
        return UncaughtException(l, fs[0].mode, h, steps)
    return Stuck(h, stack, steps)


def run(p: Program, h: Heap, fs, fuel: int, engine="red",
        erase: Optional[Callable] = None, on_step: Optional[Callable] = None
        ) -> Tuple[Outcome, List[TraceEvent]]:
    """Iterate ``engine`` from ``(h, fs)`` for at most ``fuel`` steps.

    ``erase`` maps a typed stack to its untyped frames (identity by default);
    ``on_step(h, stack, h2, stack2, rule)`` is called after every step.
    """
    step_fn = ENGINES[engine] if isinstance(engine, str) else engine
    erase = erase or (lambda s: s)
    trace: List[TraceEvent] = []
    steps = 0
    while True:
        nxt = step_fn(p, h, fs)
        if nxt is None:
            return classify(h, erase(fs), steps, fs), trace
        if steps >= fuel:
            return OutOfFuel(h, fs, steps), trace
        h2, fs2, rule = nxt
        steps += 1
        top = erase(fs2)[0]
        gamma = getattr(fs2[0], "gamma", None)
        trace.append(TraceEvent(steps, rule, len(fs2), len(h2), top.mode,
                                None if gamma is None else len(gamma)))
        if on_step is not None:
            on_step(h, fs, h2, fs2, rule)
        h, fs = h2, fs2
