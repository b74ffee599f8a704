"""Church-style typed frame stacks and the typed reducers.

A typed frame carries the class and method it executes in, the allowed
exceptions, an environment typing every location the frame mentions, and the
type its expression must have.  ``typed_red`` performs the same frame and
heap transformation as ``red`` while keeping that metadata up to date;
``typed_red2`` is its mode-first twin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

from .frontend import NPE
from .heap import NPE_LOC, Heap, HeapObject, alloc, get_class_name, has_field, read, write
from .program import field_lookup, find_class, method_lookup, ret_typ_m, subtype_leq, thrs_of_md
from .semantics import (
    NPE_VAL_EXPR,
    all_locs,
    get_invoke_body,
    new_object,
    subst,
)
from .syntax import (
    AccessMode,
    ACId,
    ClassDecl,
    CtxLet,
    CtxTry,
    FieldMode,
    FieldRead,
    FieldWrite,
    Frame,
    FrameStack,
    If,
    Invoke,
    Let,
    LocV,
    MethodDecl,
    New,
    Null,
    Program,
    Throw,
    TryCatch,
    Val,
    Value,
    Var,
    context_plug,
    is_loc_value,
    loc_of,
    value_of,
)
from .typesystem import (
    NPE_ATM,
    Checker,
    Env,
    ExEnv,
    TypingError,
    acid_leq,
    acid_meet,
    env_lookup,
)

ATM = AccessMode.ATM


@dataclass(frozen=True)
class TypedFrame:
    cdecl: ClassDecl
    mdecl: MethodDecl
    xi: ExEnv
    gamma: Env
    fr: Frame
    acid: ACId


TypedFrameStack = Tuple[TypedFrame, ...]
TStep = Optional[Tuple[Heap, TypedFrameStack, str]]


def fs_of_tfs(tfs: Sequence[TypedFrame]) -> FrameStack:
    return tuple(tf.fr for tf in tfs)


# -- environments over locations ---------------------------------------------------

def refine(p: Program, gamma: Env, l, t: ACId) -> Env:
    """Record that location ``l`` has type ``t`` in ``gamma``.

    An existing binding is narrowed to the meet of both types; the null
    location is never bound.
    """
    if l is None:
        return gamma
    key = LocV(l)
    old = env_lookup(gamma, key)
    if old is None:
        return gamma + ((key, t),)
    met = acid_meet(p, old, t)
    if met is None or met == old:
        return gamma
    return tuple((k, met if k == key else s) for k, s in gamma)


def loc2env(p: Program, d0: str, md: MethodDecl, vals: Sequence[Value]) -> Env:
    recv, args = vals[0], tuple(vals[1:])
    if not isinstance(recv, LocV) or len(args) != len(md.params):
        raise ValueError("loc2env needs a location receiver and one value per parameter")
    gamma: Env = ((recv, ACId(d0, md.recv_mode)),)
    for prm, v in zip(md.params, args):
        gamma = refine(p, gamma, loc_of(v), ACId(prm.cls, prm.mode))
    return refine(p, gamma, NPE_LOC, NPE_ATM)


# -- derivability and consistency ----------------------------------------------------

def frame_expr(fr: Frame):
    """The expression a typed frame must type: a pending exception is a throw."""
    redex = fr.redex
    if fr.mode is not None and isinstance(redex, Val):
        redex = Throw(redex.v)
    return context_plug(fr.ctx, redex)


def derivable_tfr(p: Program, tf: TypedFrame) -> bool:
    if tf.cdecl not in p.classes:
        return False
    found = method_lookup(p, tf.cdecl.name, tf.mdecl.name)
    if found is None or found[1] != tf.mdecl:
        return False
    try:
        t = Checker(p, tf.cdecl, tf.mdecl).infer(tf.xi, tf.gamma, frame_expr(tf.fr))
    except TypingError:
        return False
    return acid_leq(p, t, tf.acid)


def one_tfr_consistency(p: Program, h: Heap, tf: TypedFrame) -> bool:
    keys = [k for k, _ in tf.gamma]
    if len(set(keys)) != len(keys):
        return False
    has_npe = False
    for k, t in tf.gamma:
        if isinstance(k, Null):
            return False
        if isinstance(k, LocV):
            c = get_class_name(h, k.loc)
            if c is None or not subtype_leq(p, c, t.cls):
                return False
            if k.loc == NPE_LOC and t.cls == NPE:
                has_npe = True
    return has_npe


def is_tfs_link(p: Program, h: Heap, callee: TypedFrame, caller: TypedFrame) -> bool:
    """Pairwise condition between a frame and the calling frame below it."""
    e = caller.fr.redex
    if not isinstance(e, Invoke) or not all_locs(e.args) or not isinstance(e.recv, LocV):
        return False
    d0 = get_class_name(h, e.recv.loc)
    if d0 is None:
        return False
    found = method_lookup(p, d0, e.mth)
    if found is None or callee.cdecl != find_class(p, d0) or callee.mdecl != found[1]:
        return False
    if callee.xi != thrs_of_md(found[1]):
        return False
    return callee.acid == ret_typ_m(p, d0, e.mth)


def is_tfs_top(p: Program, h: Heap, top: TypedFrame) -> bool:
    fr = top.fr
    if fr.mode is None:
        return True
    if not (isinstance(fr.redex, Val) and isinstance(fr.redex.v, LocV)):
        return False
    c = get_class_name(h, fr.redex.v.loc)
    return c is not None and subtype_leq(p, c, fr.mode)


def derivable_tfs(p: Program, h: Heap, tfs: TypedFrameStack,
                  cache: Optional[dict] = None) -> bool:
    """All frames derivable, heap-consistent and linked to their callers.

    ``cache`` memoizes the per-frame part by frame identity.  It is only valid
    across successive states of a single run, where locations never change
    class and the heap domain only grows, so a frame judged once keeps its
    verdict while it sits unchanged below the top.
    """
    if not tfs:
        return False
    callers = tuple(tfs[1:]) + (None,)
    for tf, caller in zip(tfs, callers):
        if cache is None:
            ok = _frame_ok(p, h, tf, caller)
        else:
            hit = cache.get(id(tf))
            if hit is None or hit[0] is not tf or hit[1] is not caller:
                hit = cache[id(tf)] = (tf, caller, _frame_ok(p, h, tf, caller))
            ok = hit[2]
        if not ok:
            return False
    return is_tfs_top(p, h, tfs[0])


def _frame_ok(p: Program, h: Heap, tf: TypedFrame, caller: Optional[TypedFrame]) -> bool:
    return (derivable_tfr(p, tf) and one_tfr_consistency(p, h, tf)
            and (caller is None or is_tfs_link(p, h, tf, caller)))


# -- typed reduction, rules in presentation order -------------------------------------

def _with(tf: TypedFrame, ctx, redex, mode=None, gamma=None) -> TypedFrame:
    return replace(tf, fr=Frame(tuple(ctx), redex, mode),
                   gamma=tf.gamma if gamma is None else gamma)


def _typed_mthd(p: Program, h: Heap, tf: TypedFrame, n: int, m: str, vs, rest) -> TStep:
    d0 = get_class_name(h, n)
    if d0 is None:
        return None
    untyped = get_invoke_body(p, d0, n, m, vs, h, tf.fr.ctx, fs_of_tfs(rest))
    if untyped is None:
        return None
    h2, frames, _ = untyped
    cdecl = find_class(p, d0)
    found = method_lookup(p, d0, m)
    acid = ret_typ_m(p, d0, m)
    if cdecl is None or found is None or acid is None:
        return None
    mdecl = found[1]
    callee = TypedFrame(cdecl, mdecl, thrs_of_md(mdecl),
                        loc2env(p, d0, mdecl, (LocV(n),) + tuple(vs)), frames[0], acid)
    return (h2, (callee, tf) + tuple(rest), "mthd")


def _pop_into_caller(p: Program, callee: TypedFrame, caller: TypedFrame, v: Value, mode):
    l = loc_of(v)
    t = None if l is None else env_lookup(callee.gamma, LocV(l))
    gamma = caller.gamma if t is None else refine(p, caller.gamma, l, t)
    return _with(caller, caller.fr.ctx, Val(v), mode, gamma)


def _typed_var(p: Program, h: Heap, tf: TypedFrame, n: int, x: str) -> Optional[TypedFrame]:
    t = env_lookup(tf.gamma, LocV(n))
    if t is None:
        return None
    f = field_lookup(p, t.cls, x) if isinstance(t.cls, str) else None
    if f is None:
        return None
    l = read(h, n, x)
    ft = ACId(f.cls, t.mode if f.fmode is FieldMode.REP else ATM)
    return _with(tf, tf.fr.ctx, Val(value_of(l)), None, refine(p, tf.gamma, l, ft))


def typed_red(p: Program, h: Heap, tfs: TypedFrameStack) -> TStep:
    if not tfs:
        return None
    tf, rest = tfs[0], tuple(tfs[1:])
    match tf.fr:
        case Frame(ctx, New(mu, c, args), None) if all_locs(args):
            made = new_object(p, h, c, args)
            if made is None:
                return None
            l0, h2 = made
            gamma = refine(p, tf.gamma, l0, ACId(c, mu))
            return (h2, (_with(tf, ctx, Val(LocV(l0)), None, gamma),) + rest, "newk")

        case Frame(ctx, Let(c, x, e1, e2), None):
            return (h, (_with(tf, (CtxLet(c, x, e2),) + ctx, e1),) + rest, "letin")

        case Frame((CtxLet(_, x, e), *ctx), Val(v), None) if is_loc_value(v):
            return (h, (_with(tf, ctx, subst(e, Var(x), loc_of(v))),) + rest, "letgo")

        case Frame(ctx, If(v1, v2, e1, e2), None) if is_loc_value(v1) and is_loc_value(v2):
            if loc_of(v1) == loc_of(v2):
                return (h, (_with(tf, ctx, e1),) + rest, "ifeq")
            return (h, (_with(tf, ctx, e2),) + rest, "ifneq")

        case Frame(ctx, Invoke(Null(), _, args), None) if all_locs(args):
            return (h, (_with(tf, ctx, NPE_VAL_EXPR, NPE),) + rest, "mthdnpe")

        case Frame(_, Invoke(LocV(n), m, args), None) if all_locs(args):
            return _typed_mthd(p, h, tf, n, m, args, rest)

        case Frame((), Val(v), None) if is_loc_value(v) and rest \
                and rest[0].fr.mode is None and isinstance(rest[0].fr.redex, Invoke):
            return (h, (_pop_into_caller(p, tf, rest[0], v, None),) + rest[1:], "mthdret")

        case Frame(ctx, FieldWrite(Null(), _, v), None) if is_loc_value(v):
            return (h, (_with(tf, ctx, NPE_VAL_EXPR, NPE),) + rest, "assignnpe")

        case Frame(ctx, FieldWrite(LocV(n), x, v), None) if is_loc_value(v):
            if n not in h:
                return None
            return (write(h, n, x, loc_of(v)), (_with(tf, ctx, Val(v)),) + rest, "assignev")

        case Frame(ctx, FieldRead(Null(), _), None):
            return (h, (_with(tf, ctx, NPE_VAL_EXPR, NPE),) + rest, "varnpe")

        case Frame(ctx, FieldRead(LocV(n), x), None):
            if not has_field(h, n, x):
                return None
            tf2 = _typed_var(p, h, tf, n, x)
            return None if tf2 is None else (h, (tf2,) + rest, "var")

        case Frame(ctx, Throw(Null()), None):
            return (h, (_with(tf, ctx, NPE_VAL_EXPR, NPE),) + rest, "thrownull")

        case Frame(ctx, Throw(LocV(n)), None):
            d = get_class_name(h, n)
            if d is None:
                return None
            return (h, (_with(tf, ctx, Val(LocV(n)), d),) + rest, "throw")

        case Frame(ctx, TryCatch(e1, mu, c, x, e2), None):
            return (h, (_with(tf, (CtxTry(mu, c, x, e2),) + ctx, e1),) + rest, "ctchin")

        case Frame((CtxTry(), *ctx), Val(v), None) if is_loc_value(v):
            return (h, (_with(tf, ctx, Val(v)),) + rest, "ctchnrml")

        case Frame((CtxTry(mu, c, x, e2), *ctx), Val(v), str(c1)) \
                if is_loc_value(v) and subtype_leq(p, c1, c):
            gamma = refine(p, tf.gamma, loc_of(v), ACId(c, mu))
            return (h, (_with(tf, ctx, subst(e2, Var(x), loc_of(v)), None, gamma),) + rest,
                    "ctchexok")

        case Frame((CtxLet(), *ctx), Val(v), str(c1)) if is_loc_value(v):
            return (h, (_with(tf, ctx, Val(v), c1),) + rest, "letex")

        case Frame((), Val(v), str(c1)) if is_loc_value(v) and rest \
                and rest[0].fr.mode is None and isinstance(rest[0].fr.redex, Invoke):
            return (h, (_pop_into_caller(p, tf, rest[0], v, c1),) + rest[1:], "methodex")

        case Frame((CtxTry(_, c, _, _), *ctx), Val(v), str(c1)) \
                if is_loc_value(v) and not subtype_leq(p, c1, c):
            return (h, (_with(tf, ctx, Val(v), c1),) + rest, "ctchexnok")

    return None


# -- typed_red2: mode first -------------------------------------------------------------

def typed_red2(p: Program, h: Heap, tfs: TypedFrameStack) -> TStep:
    if not tfs:
        return None
    tf, rest = tfs[0], tuple(tfs[1:])
    ctx, e, mode = tf.fr.ctx, tf.fr.redex, tf.fr.mode
    caller_below = bool(rest) and rest[0].fr.mode is None and isinstance(rest[0].fr.redex, Invoke)

    if mode is not None:
        if not (isinstance(e, Val) and is_loc_value(e.v)):
            return None
        if ctx:
            node = ctx[0]
            if isinstance(node, CtxLet):
                return (h, (_with(tf, ctx[1:], e, mode),) + rest, "letex")
            if subtype_leq(p, mode, node.cls):
                gamma = refine(p, tf.gamma, loc_of(e.v), ACId(node.cls, node.mode))
                handler = subst(node.handler, Var(node.var), loc_of(e.v))
                return (h, (_with(tf, ctx[1:], handler, None, gamma),) + rest, "ctchexok")
            return (h, (_with(tf, ctx[1:], e, mode),) + rest, "ctchexnok")
        if caller_below:
            return (h, (_pop_into_caller(p, tf, rest[0], e.v, mode),) + rest[1:], "methodex")
        return None

    if isinstance(e, Val):
        if not is_loc_value(e.v):
            return None
        if ctx:
            node = ctx[0]
            if isinstance(node, CtxLet):
                body = subst(node.body, Var(node.var), loc_of(e.v))
                return (h, (_with(tf, ctx[1:], body),) + rest, "letgo")
            return (h, (_with(tf, ctx[1:], e),) + rest, "ctchnrml")
        if caller_below:
            return (h, (_pop_into_caller(p, tf, rest[0], e.v, None),) + rest[1:], "mthdret")
        return None

    def same(redex, mode=None, gamma=None):
        return (_with(tf, ctx, redex, mode, gamma),) + rest

    if isinstance(e, Let):
        return (h, (_with(tf, (CtxLet(e.cls, e.var, e.body),) + ctx, e.bound),) + rest, "letin")
    if isinstance(e, TryCatch):
        node = CtxTry(e.mode, e.cls, e.var, e.handler)
        return (h, (_with(tf, (node,) + ctx, e.body),) + rest, "ctchin")
    if isinstance(e, New):
        if not all_locs(e.args):
            return None
        made = new_object(p, h, e.cls, e.args)
        if made is None:
            return None
        l0, h2 = made
        return (h2, same(Val(LocV(l0)), None, refine(p, tf.gamma, l0, ACId(e.cls, e.mode))),
                "newk")
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
            return _typed_mthd(p, h, tf, e.recv.loc, e.mth, e.args, rest)
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
            tf2 = _typed_var(p, h, tf, e.recv.loc, e.fld)
            return None if tf2 is None else (h, (tf2,) + rest, "var")
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


TYPED_ENGINES = {"typed": typed_red, "typed2": typed_red2}


# -- program start-up ------------------------------------------------------------------

class EntryError(Exception):
    pass


def start_typed(p: Program, entry_class: str, entry_method: str) -> Tuple[Heap, TypedFrameStack]:
    """Heap with one all-null receiver of ``entry_class`` and a frame invoking the entry method."""
    from .heap import init_heap
    from .program import flds

    cdecl = find_class(p, entry_class)
    if cdecl is None:
        raise EntryError(f"no class {entry_class}")
    found = method_lookup(p, entry_class, entry_method)
    if found is None:
        raise EntryError(f"no method {entry_class}.{entry_method}")
    mdecl = found[1]
    if mdecl.params:
        raise EntryError(f"entry method {entry_class}.{entry_method} must take no parameters")

    h = init_heap()
    l, h = alloc(h, p, entry_class)
    h = h.install(l, HeapObject({f.name: None for f in flds(p, entry_class)}, entry_class))
    gamma: Env = ((LocV(l), ACId(entry_class, mdecl.recv_mode)), (LocV(NPE_LOC), NPE_ATM))
    fr = Frame((), Invoke(LocV(l), entry_method, ()), None)
    tf = TypedFrame(cdecl, mdecl, thrs_of_md(mdecl), gamma, fr,
                    ret_typ_m(p, entry_class, entry_method))
    return h, (tf,)


def run_typed(p: Program, h: Heap, tfs: TypedFrameStack, fuel: int, engine="typed", on_step=None):
    from .semantics import run

    step_fn = TYPED_ENGINES[engine] if isinstance(engine, str) else engine
    return run(p, h, tfs, fuel, engine=step_fn, erase=fs_of_tfs, on_step=on_step)
