from __future__ import annotations

from hypothesis import given, strategies as st

from jafun.syntax import (
    BOTTOM,
    NULL,
    AccessMode,
    ACId,
    CtxLet,
    CtxTry,
    Frame,
    Let,
    LocV,
    This,
    TryCatch,
    Val,
    Var,
    context_plug,
    is_loc_value,
    loc_of,
    show_expr,
    show_frame,
    value_of,
)

from strategies import contexts, exprs, runtime_values


def plug_outermost_first(ctx, e):
    """Independent oracle: peel the outermost node and recurse into the hole."""
    if not ctx:
        return e
    outer, inner = ctx[-1], ctx[:-1]
    filled = plug_outermost_first(inner, e)
    if isinstance(outer, CtxLet):
        return Let(outer.cls, outer.var, filled, outer.body)
    return TryCatch(filled, outer.mode, outer.cls, outer.var, outer.handler)


def test_plug_empty_context_is_identity():
    assert context_plug((), Val(NULL)) == Val(NULL)


def test_plug_single_let():
    ctx = (CtxLet("C", "x", Val(Var("x"))),)
    assert context_plug(ctx, Val(NULL)) == Let("C", "x", Val(NULL), Val(Var("x")))


def test_plug_let_inside_try():
    e, e2, e3 = Val(Var("e")), Val(Var("e2")), Val(Var("e3"))
    ctx = (CtxLet("C", "x", e2), CtxTry(AccessMode.RWR, "D", "y", e3))
    expected = TryCatch(Let("C", "x", e, e2), AccessMode.RWR, "D", "y", e3)
    assert context_plug(ctx, e) == expected
    assert plug_outermost_first(ctx, e) == expected


@given(contexts(), exprs(max_leaves=6))
def test_plug_matches_recursive_oracle(ctx, e):
    assert context_plug(ctx, e) == plug_outermost_first(ctx, e)


@given(contexts(max_size=3), contexts(max_size=3), exprs(max_leaves=4))
def test_plug_composition(inner, outer, e):
    assert context_plug(inner + outer, e) == context_plug(outer, context_plug(inner, e))


@given(runtime_values)
def test_location_value_helpers(v):
    if is_loc_value(v):
        assert value_of(loc_of(v)) == v
    else:
        assert isinstance(v, (Var, This))


@given(st.one_of(st.none(), st.integers(0, 100)))
def test_value_of_inverts_loc_of(l):
    assert loc_of(value_of(l)) == l


def test_acid_and_bottom_render():
    assert str(ACId("DList", AccessMode.RD)) == "rd DList"
    assert str(ACId(BOTTOM, AccessMode.RWR)) == "rwr _|_"


def test_show_frame_marks_hole_and_mode():
    fr = Frame((CtxLet("C", "x", Val(Var("x"))),), Val(LocV(3)), "NPE")
    assert show_frame(fr) == "let C x = [[ @3 ]]_NPE in x"


def test_show_expr_rejects_non_expressions():
    import pytest

    with pytest.raises(TypeError):
        show_expr(42)
