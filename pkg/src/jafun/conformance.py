"""Seeded program/state generation and executable property suites.

Every property walks generated programs from their entry state and compares
two reducers (or a reducer against a predicate) step by step.  Failures are
collected as ``Counterexample`` records that replay from ``(seed, property)``.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from .frontend import NPE, OBJECT, PREDEFINED
from .heap import Heap, HeapObject, dump_heap, init_heap, type_correct_heap
from .program import find_class, flds, method_lookup, subtype_leq, superclasses, thrs_of_md, well_formed
from .semantics import (
    RULES,
    classify,
    exceptional_only_on_top,
    red,
    red2,
    well_formed_framestack,
)
from .syntax import (
    NULL,
    THIS,
    AccessMode,
    ACId,
    ClassDecl,
    CtxLet,
    CtxTry,
    ExcDecl,
    Expr,
    FieldDecl,
    FieldMode,
    FieldRead,
    FieldWrite,
    Frame,
    If,
    Invoke,
    Let,
    LocV,
    MethodDecl,
    New,
    Param,
    Program,
    Throw,
    TryCatch,
    Val,
    Value,
    Var,
    show_frame,
    show_program,
)
from .typed_semantics import (
    EntryError,
    TypedFrame,
    derivable_tfs,
    fs_of_tfs,
    start_typed,
    typed_red,
    typed_red2,
)
from .typesystem import (
    Checker,
    TypingError,
    acid_leq,
    check_program,
    errors_only,
    env_extend,
    method_env,
    mode_leq,
)

MODES = tuple(AccessMode)
RWR, RD, ATM = AccessMode.RWR, AccessMode.RD, AccessMode.ATM
ENTRY = ("Main", "main")
DEFAULT_FUEL = 300


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_classes: int = 4
    max_fields: int = 3
    max_methods: int = 3
    max_expr_depth: int = 5
    well_typed_only: bool = True

    def __post_init__(self):
        if min(self.max_classes, self.max_methods, self.max_expr_depth) < 1 or self.max_fields < 0:
            raise ValueError(f"invalid generator bounds: {self}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit natural number")


@dataclass
class Counterexample:
    property: str
    program: Program
    seed: int
    step_index: int
    state_before: tuple
    details: str

    def to_dict(self) -> dict:
        h, stack = self.state_before
        frames = fs_of_tfs(stack) if stack and isinstance(stack[0], TypedFrame) else stack
        return {
            "property": self.property,
            "seed": self.seed,
            "stepIndex": self.step_index,
            "details": self.details,
            "heap": dump_heap(h) if h is not None else None,
            "stack": [show_frame(fr) for fr in frames] if frames else [],
            "program": show_program(self.program),
        }


@dataclass
class Stats:
    runs: int = 0
    states: int = 0
    hypotheses_held: int = 0
    rules: Counter = field(default_factory=Counter)
    outcomes: Counter = field(default_factory=Counter)
    per_property: Counter = field(default_factory=Counter)

    def merge(self, other: "Stats") -> None:
        self.runs += other.runs
        self.states += other.states
        self.hypotheses_held += other.hypotheses_held
        self.rules.update(other.rules)
        self.outcomes.update(other.outcomes)
        self.per_property.update(other.per_property)


# -- program generation --------------------------------------------------------------

class _Gen:
    def __init__(self, cfg: GenConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.nfield = 0
        self.nmethod = 0

    # skeleton -----------------------------------------------------------------

    def skeleton(self) -> Program:
        rng, cfg = self.rng, self.cfg
        names = [f"C{i}" for i in range(rng.randint(1, cfg.max_classes))]
        self.user = names + ["Main"]
        self.all_classes = [OBJECT, NPE] + self.user
        decls: Dict[str, ClassDecl] = {}
        for i, name in enumerate(self.user):
            if name == "Main":
                parent = rng.choice([OBJECT, OBJECT] + names)
            else:
                parent = rng.choice([OBJECT, OBJECT, OBJECT, NPE] + names[:i])
            fields = tuple(self.field_decl() for _ in range(rng.randint(0, cfg.max_fields)))
            decls[name] = ClassDecl(name, parent, fields, ())
        p = Program(PREDEFINED + tuple(decls.values()))

        for name in self.user:
            cd = decls[name]
            count = rng.randint(0, cfg.max_methods)
            if name == "Main":
                count = max(0, count - 1)
            methods: List[MethodDecl] = []
            inherited = self._inherited(p, cd)
            for _ in range(count):
                free = [md for md in inherited if md.name not in {m.name for m in methods}]
                if free and rng.random() < 0.3:
                    base = rng.choice(free)
                    params = tuple(replace(prm, name=f"q{j}") for j, prm in enumerate(base.params))
                    methods.append(replace(base, params=params, body=Val(NULL)))
                else:
                    methods.append(self.method_sig())
            if name == "Main":
                methods.append(self.method_sig(entry=True))
            decls[name] = replace(cd, methods=tuple(methods))
            p = Program(PREDEFINED + tuple(decls.values()))
        return p

    def _inherited(self, p, cd) -> List[MethodDecl]:
        out, seen = [], set()
        for anc in superclasses(p, cd.extends) if cd.extends else []:
            for md in find_class(p, anc).methods:
                if md.name not in seen:
                    seen.add(md.name)
                    out.append(md)
        return out

    def field_decl(self) -> FieldDecl:
        self.nfield += 1
        fmode = FieldMode.REP if self.rng.random() < 0.5 else FieldMode.PLAIN
        return FieldDecl(fmode, self.rng.choice(self.all_classes), f"f{self.nfield - 1}")

    def method_sig(self, entry: bool = False) -> MethodDecl:
        rng = self.rng
        annotated = self.cfg.well_typed_only or entry or rng.random() < 0.7
        if entry:
            name, nparams = "main", 0
        else:
            self.nmethod += 1
            name, nparams = f"m{self.nmethod - 1}", rng.randint(0, 2)

        def mode():
            return rng.choice(MODES) if annotated else RWR

        params = tuple(Param(mode(), rng.choice(self.all_classes), f"p{j}") for j in range(nparams))
        throws = []
        for _ in range(rng.choice([0, 0, 1, 2])):
            exc = ExcDecl(mode(), rng.choice(self.all_classes))
            if exc not in throws:
                throws.append(exc)
        recv = RWR if entry else mode()
        return MethodDecl(annotated, mode(), rng.choice(self.all_classes), recv, name,
                          params, tuple(throws), Val(NULL))

    # bodies -------------------------------------------------------------------

    def program(self) -> Program:
        skel = self.skeleton()
        classes = []
        for cd in skel.classes:
            methods = tuple(replace(md, body=self.body(skel, cd, md)) for md in cd.methods)
            classes.append(replace(cd, methods=methods))
        return Program(tuple(classes))

    def body(self, p: Program, cd: ClassDecl, md: MethodDecl) -> Expr:
        self.p = p
        self.nvar = 0
        if not self.cfg.well_typed_only:
            scope = [Var(prm.name) for prm in md.params] + [THIS]
            return _Untyped(self, p).expr(scope, self.cfg.max_expr_depth)
        target = ACId(md.ret_cls, md.ret_mode)
        for _ in range(4):
            self.chk = Checker(p, cd, md)
            e = self.expr(target, method_env(cd, md), thrs_of_md(md), self.cfg.max_expr_depth)
            try:
                t = self.chk.infer(thrs_of_md(md), method_env(cd, md), e)
            except TypingError:
                continue
            if acid_leq(p, t, target):
                return e
        return Val(NULL)

    def fresh(self, env) -> str:
        names = [k.name for k, _ in env if isinstance(k, Var)]
        if names and self.rng.random() < 0.1:
            return self.rng.choice(names)
        self.nvar += 1
        return f"x{self.nvar - 1}"

    def pick(self, env, want: ACId, modes: bool = True) -> Value:
        ok = [k for k, t in env
              if subtype_leq(self.p, t.cls, want.cls) and (not modes or mode_leq(t.mode, want.mode))]
        if ok and self.rng.random() < 0.85:
            return self.rng.choice(ok)
        return NULL

    def covered(self, xi, t: ACId) -> bool:
        return self.chk.covered(xi, t)

    def expr(self, target: ACId, env, xi, depth: int) -> Expr:
        forms = [("atom", 2), ("new", 2), ("read", 2), ("write", 1.5), ("invoke", 2),
                 ("throw", 0.6)]
        if depth > 0:
            forms += [("let", 4), ("if", 1.2), ("try", 1.4)]
        names, weights = zip(*forms)
        for _ in range(3):
            form = self.rng.choices(names, weights)[0]
            e = getattr(self, "g_" + form)(target, env, xi, depth)
            if e is not None:
                return e
        return self.g_atom(target, env, xi, depth)

    def g_atom(self, target, env, xi, depth):
        ok = [k for k, t in env if acid_leq(self.p, t, target)]
        if ok and self.rng.random() < 0.8:
            return Val(self.rng.choice(ok))
        return Val(NULL)

    def g_new(self, target, env, xi, depth):
        classes = [c for c in self.all_classes if subtype_leq(self.p, c, target.cls)]
        if not classes:
            return None
        c = self.rng.choice(classes)
        mu = self.rng.choice([m for m in MODES if mode_leq(m, target.mode)])
        args = tuple(self.pick(env, ACId(f.cls, mu if f.fmode is FieldMode.REP else ATM))
                     for f in flds(self.p, c))
        return New(mu, c, args)

    def _receivers(self, env):
        return [(k, t) for k, t in env if isinstance(t.cls, str)]

    def g_read(self, target, env, xi, depth):
        if self.rng.random() < 0.05:
            return FieldRead(NULL, f"f{self.rng.randrange(max(self.nfield, 1))}")
        cands = []
        for k, t in self._receivers(env):
            if not mode_leq(t.mode, RD):
                continue
            for f in flds(self.p, t.cls):
                ft = ACId(f.cls, t.mode if f.fmode is FieldMode.REP else ATM)
                if acid_leq(self.p, ft, target):
                    cands.append(FieldRead(k, f.name))
        return self.rng.choice(cands) if cands else None

    def g_write(self, target, env, xi, depth):
        if self.rng.random() < 0.05:
            return FieldWrite(NULL, f"f{self.rng.randrange(max(self.nfield, 1))}",
                              self.pick(env, ACId(OBJECT, ATM)))
        cands = []
        for k, t in self._receivers(env):
            if t.mode is not RWR:
                continue
            for f in flds(self.p, t.cls):
                rep = f.fmode is FieldMode.REP
                if acid_leq(self.p, ACId(f.cls, RWR if rep else ATM), target):
                    cands.append((k, f, rep))
        if not cands:
            return None
        k, f, rep = self.rng.choice(cands)
        val = self.pick(env, ACId(f.cls, RWR), modes=rep)
        return FieldWrite(k, f.name, val)

    def g_invoke(self, target, env, xi, depth):
        if self.rng.random() < 0.04:
            return Invoke(NULL, "m0", ())
        cands = []
        for k, t in self._receivers(env):
            seen = set()
            for anc in superclasses(self.p, t.cls):
                for md in find_class(self.p, anc).methods:
                    if md.name in seen:
                        continue
                    seen.add(md.name)
                    md = method_lookup(self.p, t.cls, md.name)[1]
                    if not mode_leq(t.mode, md.recv_mode):
                        continue
                    if not acid_leq(self.p, ACId(md.ret_cls, md.ret_mode), target):
                        continue
                    if all(self.covered(xi, x) for x in thrs_of_md(md)):
                        cands.append((k, md))
        if not cands:
            return None
        k, md = self.rng.choice(cands)
        args = tuple(self.pick(env, ACId(prm.cls, prm.mode)) for prm in md.params)
        return Invoke(k, md.name, args)

    def g_throw(self, target, env, xi, depth):
        cands = [k for k, t in self._receivers(env) if self.covered(xi, t)]
        if cands and self.rng.random() < 0.85:
            return Throw(self.rng.choice(cands))
        return Throw(NULL)

    def g_let(self, target, env, xi, depth):
        rng = self.rng
        if isinstance(target.cls, str) and rng.random() < 0.4:
            c = target.cls
        else:
            c = rng.choice(self.all_classes)
        bound = self.expr(ACId(c, rng.choice(MODES)), env, xi, depth - 1)
        try:
            t1 = self.chk.infer(xi, env, bound)
        except TypingError:
            return None
        x = self.fresh(env)
        inner = env_extend(env, Var(x), ACId(c, t1.mode))
        return Let(c, x, bound, self.expr(target, inner, xi, depth - 1))

    def g_if(self, target, env, xi, depth):
        vals = [k for k, _ in env] + [NULL]
        v1, v2 = self.rng.choice(vals), self.rng.choice(vals)
        return If(v1, v2, self.expr(target, env, xi, depth - 1),
                  self.expr(target, env, xi, depth - 1))

    def g_try(self, target, env, xi, depth):
        rng = self.rng
        c = rng.choice([NPE, NPE, OBJECT] + self.user + [x.cls for x in xi])
        mu = rng.choice(MODES)
        body = self.expr(target, env, xi + (ACId(c, mu),), depth - 1)
        x = self.fresh(env)
        handler = self.expr(target, env_extend(env, Var(x), ACId(c, mu)), xi, depth - 1)
        return TryCatch(body, mu, c, x, handler)


class _Untyped:
    """Well-formed but otherwise arbitrary method bodies."""

    def __init__(self, gen: _Gen, p: Program):
        self.g = gen
        self.rng = gen.rng
        self.p = p

    def value(self, scope) -> Value:
        r = self.rng.random()
        if r < 0.05:
            return Var("ghost")
        if r < 0.25:
            return NULL
        return self.rng.choice(scope)

    def expr(self, scope, depth: int) -> Expr:
        rng, g = self.rng, self.g
        forms = ["val", "new", "read", "write", "invoke", "throw"]
        if depth > 0:
            forms += ["let", "let", "if", "try"]
        form = rng.choice(forms)
        fields = [f"f{i}" for i in range(max(g.nfield, 1))]
        methods = [f"m{i}" for i in range(max(g.nmethod, 1))]
        if form == "val":
            return Val(self.value(scope))
        if form == "new":
            c = rng.choice(g.all_classes)
            n = len(flds(self.p, c)) if rng.random() < 0.85 else rng.randint(0, 3)
            return New(rng.choice(MODES), c, tuple(self.value(scope) for _ in range(n)))
        if form == "read":
            return FieldRead(self.value(scope), rng.choice(fields))
        if form == "write":
            return FieldWrite(self.value(scope), rng.choice(fields), self.value(scope))
        if form == "invoke":
            return Invoke(self.value(scope), rng.choice(methods),
                          tuple(self.value(scope) for _ in range(rng.randint(0, 2))))
        if form == "throw":
            return Throw(self.value(scope))
        if form == "let":
            x = f"x{g.nvar}"
            g.nvar += 1
            return Let(rng.choice(g.all_classes), x, self.expr(scope, depth - 1),
                       self.expr(scope + [Var(x)], depth - 1))
        if form == "if":
            return If(self.value(scope), self.value(scope),
                      self.expr(scope, depth - 1), self.expr(scope, depth - 1))
        x = f"x{g.nvar}"
        g.nvar += 1
        return TryCatch(self.expr(scope, depth - 1), rng.choice(MODES),
                        rng.choice([NPE] + g.all_classes), x, self.expr(scope + [Var(x)], depth - 1))


def gen_program(cfg: GenConfig) -> Program:
    """Deterministic in ``cfg.seed``; always well formed, well typed when asked."""
    for attempt in range(5):
        sub = cfg if attempt == 0 else replace(cfg, seed=(cfg.seed * 7919 + attempt) % 2 ** 64)
        p = _Gen(sub).program()
        if well_formed(p):
            continue
        if cfg.well_typed_only and errors_only(check_program(p)):
            continue
        return p
    return trivial_program()


def trivial_program() -> Program:
    main = MethodDecl(True, RWR, OBJECT, RWR, "main", (), (), Val(NULL))
    return Program(PREDEFINED + (ClassDecl("Main", OBJECT, (), (main,)),))


# -- random (possibly malformed) states ------------------------------------------------

def gen_state(p: Program, rng: random.Random) -> Tuple[Heap, tuple]:
    """An arbitrary heap and frame stack over ``p``; not necessarily reachable."""
    classes = [cd.name for cd in p.classes]
    h = init_heap()
    for n in range(1, rng.randint(1, 5)):
        c = rng.choice(classes)
        names = [f.name for f in flds(p, c)]
        if rng.random() < 0.2 and names:
            names = names[:-1]
        h = h.install(n, HeapObject({x: rng.choice([None] + list(range(n))) for x in names}, c))
    locs = list(h) + [len(h) + 3]
    fields = sorted({f.name for cd in p.classes for f in cd.fields}) or ["f"]
    methods = sorted({md.name for cd in p.classes for md in cd.methods}) or ["m"]

    def val():
        r = rng.random()
        if r < 0.25:
            return NULL
        if r < 0.32:
            return Var("y")
        if r < 0.36:
            return THIS
        return LocV(rng.choice(locs))

    def expr(d=2) -> Expr:
        k = rng.randrange(9 if d > 0 else 6)
        c = rng.choice(classes)
        if k == 0:
            return Val(val())
        if k == 1:
            n = len(flds(p, c)) if rng.random() < 0.8 else rng.randint(0, 2)
            return New(rng.choice(MODES), c, tuple(val() for _ in range(n)))
        if k == 2:
            return FieldRead(val(), rng.choice(fields))
        if k == 3:
            return FieldWrite(val(), rng.choice(fields), val())
        if k == 4:
            return Invoke(val(), rng.choice(methods), tuple(val() for _ in range(rng.randint(0, 2))))
        if k == 5:
            return Throw(val())
        if k == 6:
            return Let(c, "y", expr(d - 1), expr(d - 1))
        if k == 7:
            return If(val(), val(), expr(d - 1), expr(d - 1))
        return TryCatch(expr(d - 1), rng.choice(MODES), c, "y", expr(d - 1))

    def node():
        c = rng.choice(classes)
        if rng.random() < 0.5:
            return CtxLet(c, "y", expr(1))
        return CtxTry(rng.choice(MODES), c, "y", expr(1))

    def mode():
        return None if rng.random() < 0.6 else rng.choice(classes)

    frames = []
    for i in range(rng.randint(1, 3)):
        ctx = tuple(node() for _ in range(rng.choice([0, 0, 1, 2])))
        if i == 0:
            redex = Val(val()) if rng.random() < 0.4 else expr()
            frames.append(Frame(ctx, redex, mode()))
        elif rng.random() < 0.7:
            inv = Invoke(val(), rng.choice(methods), tuple(val() for _ in range(rng.randint(0, 2))))
            frames.append(Frame(ctx, inv, None if rng.random() < 0.85 else mode()))
        else:
            frames.append(Frame(ctx, expr(), mode()))
    return h, tuple(frames)


def _typed_wrap(p: Program, h: Heap, fs, rng: random.Random):
    """Attach arbitrary typing metadata to untyped frames."""
    owners = [(cd, md) for cd in p.classes for md in cd.methods]
    out = []
    for fr in fs:
        cd, md = rng.choice(owners)
        gamma = tuple((LocV(n), ACId(rng.choice([obj.cls, OBJECT]), rng.choice(MODES)))
                      for n, obj in h.items() if rng.random() < 0.7)
        out.append(TypedFrame(cd, md, thrs_of_md(md), gamma, fr,
                              ACId(md.ret_cls, md.ret_mode)))
    return tuple(out)


# -- harness -------------------------------------------------------------------------

def corpus(cfg: GenConfig, n: int) -> Iterator[Tuple[int, Program]]:
    for i in range(n):
        seed = (cfg.seed + i) % 2 ** 64
        yield seed, gen_program(replace(cfg, seed=seed))


def _same_step(a, b, erase_a=None, erase_b=None) -> bool:
    if a is None or b is None:
        return a is None and b is None
    ea = erase_a or (lambda s: s)
    eb = erase_b or (lambda s: s)
    return a[0] == b[0] and ea(a[1]) == eb(b[1]) and a[2] == b[2]


def _entry(p: Program):
    try:
        return start_typed(p, *ENTRY)
    except EntryError:
        return None


def _lockstep_equal(prop, p, seed, h, stack, step_a, step_b, fuel, stats, out) -> None:
    for i in range(fuel + 1):
        a = step_a(p, h, stack)
        b = step_b(p, h, stack)
        stats.states += 1
        stats.per_property[prop] += 1
        if not _same_step(a, b):
            out.append(Counterexample(prop, p, seed, i, (h, stack),
                                      f"{step_a.__name__} gave {_rule(a)}, "
                                      f"{step_b.__name__} gave {_rule(b)}"))
            return
        if a is None:
            return
        stats.rules[a[2]] += 1
        h, stack = a[0], a[1]


def _rule(step) -> str:
    return "None" if step is None else step[2]


def check_engine_equiv(cfg: GenConfig, n: int, fuel: int = DEFAULT_FUEL,
                       engines=(red, red2), typed_engines=(typed_red, typed_red2),
                       random_states: int = 4, stats: Optional[Stats] = None
                       ) -> List[Counterexample]:
    stats = stats if stats is not None else Stats()
    out: List[Counterexample] = []
    for seed, p in corpus(cfg, n):
        stats.runs += 1
        start = _entry(p)
        if start is not None:
            h, tfs = start
            _lockstep_equal("engine_equiv", p, seed, h, fs_of_tfs(tfs), *engines, fuel, stats, out)
            if cfg.well_typed_only:
                _lockstep_equal("typed_engine_equiv", p, seed, h, tfs, *typed_engines,
                                fuel, stats, out)
        rng = random.Random(seed ^ 0x5EED)
        for _ in range(random_states):
            h, fs = gen_state(p, rng)
            _lockstep_equal("engine_equiv", p, seed, h, fs, *engines, 3, stats, out)
            tfs = _typed_wrap(p, h, fs, rng)
            _lockstep_equal("typed_engine_equiv", p, seed, h, tfs, *typed_engines, 3, stats, out)
    return out


def soundness_step(p: Program, h: Heap, tfs) -> Tuple[Optional[tuple], Optional[str]]:
    """One typed step and the erasure check; returns (typed step, failure detail)."""
    t = typed_red(p, h, tfs)
    if t is None:
        return None, None
    u = red(p, h, fs_of_tfs(tfs))
    if u is None:
        return t, f"typed_red stepped by {t[2]} but red is stuck"
    if u[0] != t[0]:
        return t, f"heaps differ after {t[2]}"
    if u[1] != fs_of_tfs(t[1]):
        return t, f"erasure differs after {t[2]} (red applied {u[2]})"
    return t, None


def completeness_hypotheses(p: Program, h: Heap, tfs, check_derivable: bool = True,
                            wf: Optional[bool] = None, cache: Optional[dict] = None) -> bool:
    if wf is None:
        wf = not well_formed(p)
    return (wf and type_correct_heap(p, h)
            and (not check_derivable or derivable_tfs(p, h, tfs, cache))
            and well_formed_framestack(fs_of_tfs(tfs)))


def completeness_step(p: Program, h: Heap, tfs, check_derivable: bool = True,
                      wf: Optional[bool] = None, cache: Optional[dict] = None) -> Tuple[Optional[tuple], Optional[str], bool]:
    """Returns (typed step, failure detail, whether the hypotheses held)."""
    u = red(p, h, fs_of_tfs(tfs))
    t = typed_red(p, h, tfs)
    if u is None:
        return t, None, False
    if not completeness_hypotheses(p, h, tfs, check_derivable, wf, cache):
        return t, None, False
    if t is None:
        return None, f"red applied {u[2]} but typed_red is stuck", True
    if t[0] != u[0] or fs_of_tfs(t[1]) != u[1]:
        return t, f"typed step {t[2]} does not match red step {u[2]}", True
    return t, None, True


def check_soundness(cfg: GenConfig, n: int, fuel: int = DEFAULT_FUEL,
                    stats: Optional[Stats] = None) -> List[Counterexample]:
    stats = stats if stats is not None else Stats()
    out = []
    for seed, p in corpus(replace(cfg, well_typed_only=True), n):
        stats.runs += 1
        start = _entry(p)
        if start is None:
            continue
        h, tfs = start
        for i in range(fuel):
            t, bad = soundness_step(p, h, tfs)
            stats.states += 1
            if bad:
                out.append(Counterexample("soundness", p, seed, i, (h, tfs), bad))
                break
            if t is None:
                break
            stats.rules[t[2]] += 1
            h, tfs = t[0], t[1]
    return out


def check_completeness(cfg: GenConfig, n: int, fuel: int = DEFAULT_FUEL,
                       stats: Optional[Stats] = None) -> List[Counterexample]:
    stats = stats if stats is not None else Stats()
    out = []
    for seed, p in corpus(replace(cfg, well_typed_only=True), n):
        stats.runs += 1
        start = _entry(p)
        if start is None:
            continue
        wf = not well_formed(p)
        h, tfs = start
        cache: dict = {}
        for i in range(fuel):
            t, bad, held = completeness_step(p, h, tfs, wf=wf, cache=cache)
            stats.states += 1
            stats.hypotheses_held += held
            if bad:
                out.append(Counterexample("completeness", p, seed, i, (h, tfs), bad))
                break
            if t is None:
                break
            stats.rules[t[2]] += 1
            h, tfs = t[0], t[1]
    return out


def preservation_violation(p: Program, h: Heap, tfs, cache: Optional[dict] = None) -> Optional[str]:
    if not type_correct_heap(p, h):
        return "heap is not type correct"
    if not derivable_tfs(p, h, tfs, cache):
        return "typed frame stack is not derivable"
    return None


def check_preservation(cfg: GenConfig, n: int, fuel: int = DEFAULT_FUEL,
                       stats: Optional[Stats] = None) -> List[Counterexample]:
    stats = stats if stats is not None else Stats()
    out = []
    for seed, p in corpus(replace(cfg, well_typed_only=True), n):
        stats.runs += 1
        start = _entry(p)
        if start is None:
            continue
        h, tfs = start
        cache: dict = {}
        bad = preservation_violation(p, h, tfs, cache)
        if bad:
            out.append(Counterexample("preservation", p, seed, 0, (h, tfs), "initial state: " + bad))
            continue
        for i in range(fuel):
            t = typed_red(p, h, tfs)
            if t is None:
                stats.outcomes[type(classify(h, fs_of_tfs(tfs), i)).__name__] += 1
                break
            stats.states += 1
            stats.rules[t[2]] += 1
            bad = preservation_violation(p, t[0], t[1], cache)
            if bad:
                out.append(Counterexample("preservation", p, seed, i, (h, tfs),
                                          f"after {t[2]}: {bad}"))
                break
            h, tfs = t[0], t[1]
        else:
            stats.outcomes["OutOfFuel"] += 1
    return out


def structural_violation(h: Heap, fs, h2: Heap, fs2) -> Optional[str]:
    if well_formed_framestack(fs) and not well_formed_framestack(fs2):
        return "stack shape not preserved"
    if not exceptional_only_on_top(fs2):
        return "exceptional mode below the top frame"
    if not set(h) <= set(h2):
        return "heap domain shrank"
    return None


def check_invariants(cfg: GenConfig, n: int, fuel: int = DEFAULT_FUEL,
                     stats: Optional[Stats] = None) -> List[Counterexample]:
    """Stack shape, exceptional-mode locality and heap-domain growth on every step."""
    stats = stats if stats is not None else Stats()
    out = []
    for seed, p in corpus(cfg, n):
        stats.runs += 1
        start = _entry(p)
        if start is None:
            continue
        h, fs = start[0], fs_of_tfs(start[1])
        for i in range(fuel + 1):
            s = red(p, h, fs)
            if s is None:
                stats.outcomes[type(classify(h, fs, i)).__name__] += 1
                break
            if i == fuel:
                stats.outcomes["OutOfFuel"] += 1
                break
            stats.states += 1
            stats.rules[s[2]] += 1
            bad = structural_violation(h, fs, s[0], s[1])
            if bad:
                out.append(Counterexample("invariants", p, seed, i, (h, fs), f"after {s[2]}: {bad}"))
                break
            h, fs = s[0], s[1]
    return out


PROPERTIES: Dict[str, Callable] = {
    "engine_equiv": check_engine_equiv,
    "soundness": check_soundness,
    "completeness": check_completeness,
    "preservation": check_preservation,
    "invariants": check_invariants,
}


def report(prop: str, runs: int, cexs: Sequence[Counterexample], stats: Stats) -> dict:
    return {
        "property": prop,
        "runs": runs,
        "states": stats.states,
        "hypothesesHeld": stats.hypotheses_held,
        "statesByCheck": dict(sorted(stats.per_property.items())),
        "rules": dict(sorted(stats.rules.items())),
        "missingRules": [r for r in RULES if r not in stats.rules],
        "counterexamples": [c.to_dict() for c in cexs],
    }


def lockstep(p: Program, h: Heap, tfs, fuel: int):
    """Run typed and untyped reducers together, checking erasure at every step.

    Returns ``(outcome, trace, divergence)``; ``divergence`` is ``None`` when
    both reducers agreed throughout.
    """
    from .semantics import OutOfFuel, TraceEvent

    trace = []
    for i in range(fuel + 1):
        u = red(p, h, fs_of_tfs(tfs))
        t = typed_red(p, h, tfs)
        if u is None and t is None:
            return classify(h, fs_of_tfs(tfs), i, tfs), trace, None
        if u is None or t is None or u[0] != t[0] or u[1] != fs_of_tfs(t[1]) or u[2] != t[2]:
            return classify(h, fs_of_tfs(tfs), i, tfs), trace, \
                f"step {i + 1}: red gave {_rule(u)}, typed_red gave {_rule(t)}"
        if i == fuel:
            return OutOfFuel(h, tfs, i), trace, None
        h, tfs = t[0], t[1]
        trace.append(TraceEvent(i + 1, t[2], len(tfs), len(h), tfs[0].fr.mode, len(tfs[0].gamma)))


def _chunk(prop: str, cfg: GenConfig, count: int, fuel: int):
    stats = Stats()
    cexs = PROPERTIES[prop](cfg, count, fuel=fuel, stats=stats)
    return cexs, stats


def run_property(prop: str, cfg: GenConfig, n: int, fuel: int = DEFAULT_FUEL,
                 jobs: int = 1) -> Tuple[List[Counterexample], Stats]:
    """Check ``prop`` over ``n`` seeds, optionally split across processes.

    Seeds are partitioned into contiguous ranges and merged back in seed
    order, so the result does not depend on ``jobs``.
    """
    if prop not in PROPERTIES:
        raise KeyError(f"unknown property {prop!r}; choose from {sorted(PROPERTIES)}")
    jobs = max(1, min(jobs, n))
    if jobs == 1:
        return _chunk(prop, cfg, n, fuel)
    from concurrent.futures import ProcessPoolExecutor

    bounds = [n * k // jobs for k in range(jobs + 1)]
    with ProcessPoolExecutor(jobs) as pool:
        futures = [pool.submit(_chunk, prop, replace(cfg, seed=(cfg.seed + lo) % 2 ** 64), hi - lo, fuel)
                   for lo, hi in zip(bounds, bounds[1:])]
        parts = [f.result() for f in futures]
    cexs: List[Counterexample] = []
    stats = Stats()
    for part_cexs, part_stats in parts:
        cexs.extend(part_cexs)
        stats.merge(part_stats)
    return cexs, stats
