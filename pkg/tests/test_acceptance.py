"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

from __future__ import annotations

import io
import json
import time
from contextlib import contextmanager

import networkx as nx

from jafun.cli import main as cli_main
from jafun.conformance import (
    GenConfig,
    Stats,
    check_completeness,
    check_engine_equiv,
    check_invariants,
    check_preservation,
    check_soundness,
    corpus,
)
from jafun.heap import HeapObject, init_heap
from jafun.semantics import RULES, NormalResult, UncaughtException, run
from jafun.syntax import Frame, Invoke, LocV
from jafun.typed_semantics import fs_of_tfs, start_typed

from conftest import ACCEPTANCE, fixture_path

SEED = 20_260_101
CORPUS = GenConfig(seed=SEED)
N_PROGRAMS = 1000
FUEL = 300


@contextmanager
def criterion(n: int, title: str):
    facts: dict = {}
    t0 = time.perf_counter()
    try:
        yield facts
    except BaseException as exc:
        first = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        line = f"criterion {n} FAIL: {title}: {first}"
        ACCEPTANCE[n] = line
        print(line)
        raise
    detail = ", ".join(f"{k}={v}" for k, v in facts.items())
    line = f"criterion {n} PASS: {title} ({detail}; {time.perf_counter() - t0:.2f}s)"
    ACCEPTANCE[n] = line
    print(line)


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    return cli_main(list(argv), out, err), out.getvalue(), err.getvalue()


def test_criterion_1_engine_equivalence():
    with criterion(1, "red = red2 and typed_red = typed_red2 pointwise") as facts:
        t0 = time.perf_counter()
        stats = Stats()
        cexs = check_engine_equiv(CORPUS, 200, fuel=FUEL, stats=stats)
        elapsed = time.perf_counter() - t0
        facts.update(untyped_states=stats.per_property["engine_equiv"],
                     typed_states=stats.per_property["typed_engine_equiv"],
                     divergences=len(cexs))
        assert cexs == [], cexs[0].details
        assert stats.per_property["engine_equiv"] >= 10_000
        assert stats.per_property["typed_engine_equiv"] >= 10_000
        assert elapsed < 30, f"took {elapsed:.1f}s"


def test_criterion_2_soundness():
    with criterion(2, "typed steps commute with erasure") as facts:
        stats = Stats()
        cexs = check_soundness(CORPUS, N_PROGRAMS, fuel=FUEL, stats=stats)
        facts.update(programs=stats.runs, typed_steps=stats.states, counterexamples=len(cexs))
        assert stats.runs >= 1000
        assert cexs == [], cexs[0].details


def test_criterion_3_completeness():
    with criterion(3, "untyped steps are matched by typed steps under the hypotheses") as facts:
        stats = Stats()
        cexs = check_completeness(CORPUS, N_PROGRAMS, fuel=FUEL, stats=stats)
        facts.update(programs=stats.runs, states=stats.states,
                     hypotheses_held=stats.hypotheses_held, counterexamples=len(cexs))
        assert stats.runs >= 1000
        assert stats.hypotheses_held > 0
        assert cexs == [], cexs[0].details


def reachable(h, root):
    """DList cells reachable from ``root`` along prev/next."""
    seen, todo = set(), [root]
    while todo:
        n = todo.pop()
        if n is None or n in seen:
            continue
        seen.add(n)
        todo.extend(h[n].fields[f] for f in ("prev", "next"))
    return seen


def list_graph(h, root):
    g = nx.DiGraph()
    for n in reachable(h, root):
        g.add_node(n, val=h[n].fields["val"], root=(n == root))
        for f in ("prev", "next"):
            if h[n].fields[f] is not None:
                g.add_edge(n, h[n].fields[f], label=f)
    return g


def rooted_walk(h1, r1, h2, r2):
    """Walk both structures in parallel; return the node bijection or None."""
    pairs, todo = {}, [(r1, r2)]
    while todo:
        a, b = todo.pop()
        if (a is None) != (b is None):
            return None
        if a is None:
            continue
        if a in pairs:
            if pairs[a] != b:
                return None
            continue
        pairs[a] = b
        if h1[a].cls != h2[b].cls or h1[a].fields["val"] != h2[b].fields["val"]:
            return None
        todo.extend((h1[a].fields[f], h2[b].fields[f]) for f in ("prev", "next"))
    return pairs if len(set(pairs.values())) == len(pairs) else None


def three_cell_list():
    h = init_heap().install(1, HeapObject({}, "Main"))
    for n in (2, 3, 4):
        h = h.install(n, HeapObject({}, "Data"))
    cells = [(5, None, 2, 6), (6, 5, 3, 7), (7, 6, 4, None)]
    for n, prev, val, nxt in cells:
        h = h.install(n, HeapObject({"prev": prev, "val": val, "next": nxt}, "DList"))
    return h, 5


def test_criterion_4_dlist_copy(dlist):
    with criterion(4, "DList checks clean and copy yields a fresh isomorphic list") as facts:
        code, _, err = cli("check", str(fixture_path("dlist.jf")))
        assert code == 0, err
        t0 = time.perf_counter()
        h0, root = three_cell_list()
        outcome, trace = run(dlist, h0, (Frame((), Invoke(LocV(root), "copy", ()), None),), 10_000)
        assert isinstance(outcome, NormalResult), outcome
        h1, copy_root = outcome.heap, outcome.loc
        # (a) nothing that existed before was touched
        assert all(h1[n] == h0[n] for n in h0)
        # (b) same shape, same payload locations
        g0, g1 = list_graph(h0, root), list_graph(h1, copy_root)
        assert len(g0) == 3
        assert nx.is_isomorphic(
            g0, g1,
            node_match=lambda a, b: a["val"] == b["val"] and a["root"] == b["root"],
            edge_match=lambda a, b: a["label"] == b["label"])
        pairs = rooted_walk(h0, root, h1, copy_root)
        assert pairs is not None and len(pairs) == 3
        # (c) every cell of the copy is fresh
        assert all(n not in h0 for n in g1)
        elapsed = time.perf_counter() - t0
        facts.update(steps=outcome.steps, copy_cells=sorted(g1), vals=[h1[n].fields["val"]
                     for n in sorted(g1)], runtime=f"{elapsed:.3f}s")
        assert elapsed < 1.0


def test_criterion_5_npe():
    with criterion(5, "null dereference ends in an uncaught NPE") as facts:
        code, out, _ = cli("run", "--trace", "--json", str(fixture_path("npe.jf")))
        rows = [json.loads(line) for line in out.splitlines()]
        rules = [r["rule"] for r in rows[:-1]]
        facts.update(exit=code, rules="/".join(rules))
        assert code == 1
        # entry call, null read raises, the exception leaves the entry method
        assert rules == ["mthd", "varnpe", "methodex"]
        assert rows[-1] == {"outcome": "UncaughtException", "steps": 3, "loc": 0, "exception": "NPE"}


def test_criterion_6_invariants_and_preservation():
    with criterion(6, "structural invariants and empirical preservation") as facts:
        typed_stats, open_stats, pres_stats = Stats(), Stats(), Stats()
        inv = check_invariants(CORPUS, N_PROGRAMS, fuel=FUEL, stats=typed_stats)
        inv += check_invariants(GenConfig(seed=SEED, well_typed_only=False), N_PROGRAMS,
                                fuel=FUEL, stats=open_stats)
        pres = check_preservation(CORPUS, N_PROGRAMS, fuel=FUEL, stats=pres_stats)
        facts.update(invariant_steps=typed_stats.states + open_stats.states,
                     invariant_violations=len(inv), preservation_steps=pres_stats.states,
                     preservation_violations=len(pres))
        assert inv == [], inv[0].details
        assert pres == [], pres[0].details


def test_criterion_7_rule_coverage(dlist, npe_prog):
    with criterion(7, "every reduction rule appears in emitted traces") as facts:
        seen = set()
        for _, p in corpus(CORPUS, 300):
            h, tfs = start_typed(p, "Main", "main")
            _, trace = run(p, h, fs_of_tfs(tfs), FUEL)
            seen.update(ev.rule for ev in trace)
        for p in (dlist, npe_prog):
            h, tfs = start_typed(p, "Main", "main")
            outcome, trace = run(p, h, fs_of_tfs(tfs), 10_000)
            assert isinstance(outcome, (NormalResult, UncaughtException))
            seen.update(ev.rule for ev in trace)
        missing = sorted(set(RULES) - seen)
        facts.update(covered=len(seen & set(RULES)), total=len(RULES))
        assert not missing, f"missing {missing}"
