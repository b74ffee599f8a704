from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from jafun.heap import HeapObject, init_heap
from jafun.semantics import (
    RULES,
    NormalResult,
    OutOfFuel,
    Stuck,
    UncaughtException,
    classify,
    exceptional_only_on_top,
    free_vars,
    red,
    red2,
    run,
    subst,
    subst_many,
    well_formed_framestack,
)
from jafun.syntax import (
    NULL,
    THIS,
    AccessMode,
    CtxLet,
    CtxTry,
    FieldRead,
    FieldWrite,
    Frame,
    If,
    Invoke,
    Let,
    LocV,
    New,
    Throw,
    TryCatch,
    Val,
    Var,
)
from jafun.typed_semantics import fs_of_tfs, start_typed

from conftest import program
from strategies import exprs, names

RWR, ATM = AccessMode.RWR, AccessMode.ATM
P = program(
    "class A ext Object { A f; A m(A x) { x } }\n"
    "class B ext A { }\n"
    "class E ext Object { }\n"
)
H = (init_heap()
     .install(1, HeapObject({"f": None}, "A"))
     .install(2, HeapObject({"f": 1}, "B"))
     .install(3, HeapObject({}, "E")))
L1, L2, L3 = LocV(1), LocV(2), LocV(3)
X = Var("x")
E1, E2 = Val(Var("e1")), Val(Var("e2"))
K = (CtxLet("A", "k", Val(Var("k"))),)  # an unrelated outer context
CALL = Frame(K, Invoke(L2, "m", (L1,)))
NPE_FRAME = Frame((), Val(LocV(0)), "NPE")


def F(redex, ctx=(), mode=None):
    return Frame(tuple(ctx), redex, mode)


# (rule, stack before, heap after, stack after)
CASES = [
    ("newk", (F(New(RWR, "A", (L2,))),),
     H.install(4, HeapObject({"f": 2}, "A")), (F(Val(LocV(4))),)),
    ("letin", (F(Let("A", "x", Val(L1), Val(X)), K),),
     H, (F(Val(L1), (CtxLet("A", "x", Val(X)),) + K),)),
    ("letgo", (F(Val(L1), (CtxLet("A", "x", Val(X)),)),), H, (F(Val(L1)),)),
    ("ifeq", (F(If(NULL, NULL, E1, E2)),), H, (F(E1),)),
    ("ifneq", (F(If(L1, NULL, E1, E2)),), H, (F(E2),)),
    ("mthdnpe", (F(Invoke(NULL, "m", ())),), H, (NPE_FRAME,)),
    ("mthd", (F(Invoke(L2, "m", (L1,)), K),), H, (F(Val(L1)), CALL)),
    ("mthdret", (F(Val(L3)), CALL), H, (F(Val(L3), K),)),
    ("assignnpe", (F(FieldWrite(NULL, "f", L1)),), H, (NPE_FRAME,)),
    ("assignev", (F(FieldWrite(L1, "f", L2)),),
     H.install(1, HeapObject({"f": 2}, "A")), (F(Val(L2)),)),
    ("varnpe", (F(FieldRead(NULL, "f")),), H, (NPE_FRAME,)),
    ("var", (F(FieldRead(L2, "f")),), H, (F(Val(L1)),)),
    ("thrownull", (F(Throw(NULL)),), H, (NPE_FRAME,)),
    ("throw", (F(Throw(L3)),), H, (F(Val(L3), (), "E"),)),
    ("ctchin", (F(TryCatch(E1, ATM, "E", "y", E2)),), H, (F(E1, (CtxTry(ATM, "E", "y", E2),)),)),
    ("ctchnrml", (F(Val(L1), (CtxTry(ATM, "E", "y", E2),)),), H, (F(Val(L1)),)),
    ("ctchexok", (F(Val(L3), (CtxTry(ATM, "Object", "y", Val(Var("y"))),), "E"),),
     H, (F(Val(L3)),)),
    ("letex", (F(Val(L3), (CtxLet("A", "x", Val(X)),), "E"),), H, (F(Val(L3), (), "E"),)),
    ("methodex", (F(Val(L3), (), "E"), CALL), H, (F(Val(L3), K, "E"),)),
    ("ctchexnok", (F(Val(L3), (CtxTry(ATM, "A", "y", E2),), "E"),), H, (F(Val(L3), (), "E"),)),
]


def test_every_rule_has_a_case():
    assert sorted(c[0] for c in CASES) == sorted(RULES)
    assert len(RULES) == 20


@pytest.mark.parametrize("engine", [red, red2])
@pytest.mark.parametrize("rule, before, h_after, after", CASES, ids=[c[0] for c in CASES])
def test_rule(engine, rule, before, h_after, after):
    assert engine(P, H, before) == (h_after, after, rule)


def test_var_reads_null_field():
    assert red(P, H, (F(FieldRead(L1, "f")),)) == (H, (F(Val(NULL)),), "var")


def test_mthd_substitutes_this_and_parameters_once():
    p = program("class A ext Object { A m(A x, A y) { let A x = this in y.m(x, this) } }")
    h = init_heap().install(1, HeapObject({}, "A"))
    _, (body, _), rule = red(p, h, (F(Invoke(L1, "m", (NULL, LocV(0)))),))
    assert rule == "mthd"
    assert body.redex == Let("A", "x", Val(L1), Invoke(LocV(0), "m", (X, L1)))


@pytest.mark.parametrize("stack", [
    (),
    (F(Val(L1)),),
    (F(Val(X)),),
    (F(FieldRead(X, "f")),),
    (F(FieldRead(L1, "nope")),),
    (F(FieldRead(LocV(9), "f")),),
    (F(FieldWrite(LocV(9), "f", L1)),),
    (F(Invoke(L1, "nope", ())),),
    (F(Invoke(L1, "m", ())),),
    (F(Invoke(LocV(9), "m", (L1,))),),
    (F(Invoke(L1, "m", (X,))),),
    (F(New(RWR, "A", ())),),
    (F(New(RWR, "Nope", ())),),
    (F(Throw(LocV(9))),),
    (F(If(X, NULL, E1, E2)),),
    (F(Val(L3), (), "E"),),
    (F(Val(L1)), F(Val(L2))),
    (F(Val(L3), (), "E"), F(Let("A", "x", E1, E2))),
])
def test_no_rule_applies(stack):
    assert red(P, H, stack) is None
    assert red2(P, H, stack) is None


def test_exceptional_middle_frame_engines_agree():
    stack = (F(Val(L1)), F(Invoke(L2, "m", (L1,)), (), "E"))
    assert red(P, H, stack) == red2(P, H, stack)
    stack = (F(FieldRead(L2, "f")), F(Val(L3), (), "E"))
    assert red(P, H, stack) == red2(P, H, stack) == (H, (F(Val(L1)), stack[1]), "var")


def test_subst_examples():
    assert subst(Val(X), X, 5) == Val(LocV(5))
    shadow = Let("C", "x", Val(X), Val(X))
    assert subst(shadow, X, 5) == Let("C", "x", Val(LocV(5)), Val(X))
    catch = TryCatch(Val(X), ATM, "C", "x", Val(X))
    assert subst(catch, X, None) == TryCatch(Val(NULL), ATM, "C", "x", Val(X))
    assert subst(Val(THIS), THIS, 2) == Val(L2)


@given(exprs(), names, st.integers(0, 9))
def test_subst_removes_exactly_the_name(e, x, l):
    out = subst(e, Var(x), l)
    assert free_vars(out) == free_vars(e) - {Var(x)}
    if Var(x) not in free_vars(e):
        assert out == e


@given(exprs(), st.integers(0, 9), st.integers(0, 9))
def test_simultaneous_substitution_commutes(e, a, b):
    sigma = {Var("x"): a, THIS: b}
    both = subst_many(e, sigma)
    assert both == subst(subst(e, Var("x"), a), THIS, b) == subst(subst(e, THIS, b), Var("x"), a)


def test_stack_shape():
    assert well_formed_framestack((F(Let("A", "x", E1, E2)),))
    assert well_formed_framestack((F(Val(L1)), CALL))
    assert not well_formed_framestack((F(Val(L1)), F(Let("A", "x", E1, E2))))
    assert not well_formed_framestack((F(Val(L1)), F(Invoke(L2, "m", (L1,)), (), "E")))
    assert not well_formed_framestack(())
    assert exceptional_only_on_top((F(Val(L3), (), "E"), CALL))
    assert not exceptional_only_on_top((F(Val(L3)), F(Invoke(L2, "m", (L1,)), (), "E")))


def test_classify():
    assert classify(H, (F(Val(L1)),), 3) == NormalResult(1, H, 3)
    assert classify(H, (F(Val(NULL)),), 0) == NormalResult(None, H, 0)
    assert classify(H, (F(Val(L3), (), "E"),), 2) == UncaughtException(3, "E", H, 2)
    stuck = (F(FieldRead(X, "f")),)
    assert classify(H, stuck, 1) == Stuck(H, stuck, 1)


SINGLETON = """
class Data ext Object { }
class DList ext Object {
  rep DList prev; Data val; rep DList next;
  rwr DList atm singleton(atm Data v) { new rwr DList(null, v, null) }
}
class Main ext Object {
  rwr DList rwr main() {
    let Data d = new rwr Data() in
    let DList l = new rwr DList(null, d, null) in
    l.singleton(d)
  }
}
"""


@pytest.mark.parametrize("engine", ["red", "red2"])
def test_run_singleton(engine):
    p = program(SINGLETON)
    h, tfs = start_typed(p, "Main", "main")
    outcome, trace = run(p, h, fs_of_tfs(tfs), 100, engine=engine)
    assert isinstance(outcome, NormalResult)
    assert outcome.loc == 4 and outcome.loc not in h
    assert outcome.heap[4] == HeapObject({"prev": None, "val": 2, "next": None}, "DList")
    rules = [ev.rule for ev in trace]
    assert rules[0] == "mthd" and rules[-1] == "mthdret"


def test_run_npe_fixture(npe_prog):
    h, tfs = start_typed(npe_prog, "Main", "main")
    outcome, trace = run(npe_prog, h, fs_of_tfs(tfs), 100)
    assert outcome == UncaughtException(0, "NPE", h, 3)
    assert [ev.rule for ev in trace] == ["mthd", "varnpe", "methodex"]


def test_fuel():
    start = (F(Let("A", "x", Val(L1), Val(X))),)
    outcome, trace = run(P, H, start, 0)
    assert outcome == OutOfFuel(H, start, 0) and trace == []
    outcome, trace = run(P, H, start, 1)
    assert isinstance(outcome, OutOfFuel) and outcome.steps == 1
    outcome, _ = run(P, H, start, 2)
    assert outcome == NormalResult(1, H, 2)
    outcome, _ = run(P, H, (F(Val(L1)),), 0)
    assert outcome == NormalResult(1, H, 0)


def test_trace_json_lines():
    _, trace = run(P, H, (F(Let("A", "x", Throw(L3), Val(X))),), 10)
    rows = [json.loads(ev.to_json()) for ev in trace]
    assert rows[0] == {"step": 1, "rule": "letin", "stackDepth": 1, "heapSize": 4, "mode": "normal"}
    assert [r["rule"] for r in rows] == ["letin", "throw", "letex"]
    assert rows[-1]["mode"] == "E"
    assert list(rows[0]) == ["step", "rule", "stackDepth", "heapSize", "mode"]


def test_run_on_step_sees_every_transition():
    seen = []
    run(P, H, (F(Let("A", "x", Val(L1), Val(X))),), 10,
        on_step=lambda h, fs, h2, fs2, rule: seen.append(rule))
    assert seen == ["letin", "letgo"]
