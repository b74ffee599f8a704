"""Class-table queries, subtyping and the well-formedness predicate."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .frontend import NPE, OBJECT, PREDEFINED
from .syntax import (
    ACId,
    Bottom,
    ClassDecl,
    ClassRef,
    FieldDecl,
    MethodDecl,
    Program,
)


class ViolationKind(enum.Enum):
    DuplicateClass = "DuplicateClass"
    MissingObject = "MissingObject"
    MissingNPE = "MissingNPE"
    UnknownSuper = "UnknownSuper"
    ExtendsCycle = "ExtendsCycle"
    ObjectHasSuper = "ObjectHasSuper"
    DuplicateField = "DuplicateField"
    DuplicateMethod = "DuplicateMethod"
    BadOverride = "BadOverride"
    UnknownClassInSig = "UnknownClassInSig"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind.value} {self.subject}: {self.detail}"


def _index(p: Program) -> Dict[str, ClassDecl]:
    idx = p._cache.get("index")
    if idx is None:
        idx = {}
        for cd in p.classes:
            idx.setdefault(cd.name, cd)
        p._cache["index"] = idx
    return idx


def find_class(p: Program, c: str) -> Optional[ClassDecl]:
    return _index(p).get(c)


def superclasses(p: Program, c: str) -> List[str]:
    """``c`` followed by its ancestors, stopping at an unknown name or a cycle."""
    chain: List[str] = []
    seen = set()
    cur: Optional[str] = c
    while cur is not None and cur not in seen:
        cd = find_class(p, cur)
        if cd is None:
            break
        chain.append(cur)
        seen.add(cur)
        cur = cd.extends
    return chain


def _chain(p: Program, c: str) -> Tuple[str, ...]:
    cache = p._cache.setdefault("chain", {})
    ch = cache.get(c)
    if ch is None:
        ch = cache[c] = tuple(superclasses(p, c))
    return ch


def subtype_leq(p: Program, c: ClassRef, d: ClassRef) -> bool:
    if isinstance(c, Bottom):
        return True
    if isinstance(d, Bottom):
        return False
    return c == d or d in _chain(p, c)


def flds(p: Program, c: str) -> Tuple[FieldDecl, ...]:
    """All fields of ``c``, root-most class first, each in declaration order."""
    cache = p._cache.setdefault("flds", {})
    res = cache.get(c)
    if res is None:
        if find_class(p, c) is None:
            raise KeyError(c)
        res = tuple(f for name in reversed(_chain(p, c))
                    for f in find_class(p, name).fields)
        cache[c] = res
    return res


def field_lookup(p: Program, c: str, x: str) -> Optional[FieldDecl]:
    if find_class(p, c) is None:
        return None
    for f in flds(p, c):
        if f.name == x:
            return f
    return None


def method_lookup(p: Program, c: str, m: str) -> Optional[Tuple[ClassDecl, MethodDecl]]:
    cache = p._cache.setdefault("mlookup", {})
    key = (c, m)
    if key in cache:
        return cache[key]
    res = None
    for name in _chain(p, c):
        cd = find_class(p, name)
        md = next((md for md in cd.methods if md.name == m), None)
        if md is not None:
            res = (cd, md)
            break
    cache[key] = res
    return res


def par_nms(md: MethodDecl) -> Tuple[str, ...]:
    return tuple(prm.name for prm in md.params)


def ret_typ_m(p: Program, c: ClassRef, m: str) -> Optional[ACId]:
    if isinstance(c, Bottom):
        return None
    found = method_lookup(p, c, m)
    if found is None:
        return None
    md = found[1]
    return ACId(md.ret_cls, md.ret_mode)


def thrs_of_md(md: MethodDecl) -> Tuple[ACId, ...]:
    return tuple(ACId(x.cls, x.mode) for x in md.throws)


# -- well-formedness ----------------------------------------------------------------

def well_formed(p: Program) -> List[Violation]:
    out: List[Violation] = []
    V = ViolationKind

    seen = set()
    for cd in p.classes:
        if cd.name in seen:
            out.append(Violation(V.DuplicateClass, cd.name, "declared more than once"))
        seen.add(cd.name)
    for pre in PREDEFINED:
        if pre.name not in seen:
            kind = V.MissingObject if pre.name == OBJECT else V.MissingNPE
            out.append(Violation(kind, pre.name, "predefined class absent"))
        else:
            user = next(cd for cd in p.classes if cd.name == pre.name)
            # a superclass on Object is reported as ObjectHasSuper instead
            if (user.fields or user.methods
                    or (pre.name == NPE and user.extends != OBJECT)):
                out.append(Violation(V.DuplicateClass, pre.name,
                                     "redefines a predefined class"))

    for cd in p.classes:
        if cd.name == OBJECT:
            if cd.extends is not None:
                out.append(Violation(V.ObjectHasSuper, OBJECT, f"extends {cd.extends}"))
        elif cd.extends is None:
            out.append(Violation(V.UnknownSuper, cd.name, "no superclass given"))
        elif find_class(p, cd.extends) is None:
            out.append(Violation(V.UnknownSuper, cd.name, f"extends unknown {cd.extends}"))

    out.extend(_cycles(p))

    for cd in p.classes:
        chain = superclasses(p, cd.name)
        inherited = {}
        for name in reversed(chain[1:]):
            for f in find_class(p, name).fields:
                inherited.setdefault(f.name, name)
        own = set()
        for f in cd.fields:
            if f.name in own:
                out.append(Violation(V.DuplicateField, cd.name, f"field {f.name} repeated"))
            elif f.name in inherited:
                out.append(Violation(V.DuplicateField, cd.name,
                                     f"field {f.name} shadows {inherited[f.name]}.{f.name}"))
            own.add(f.name)

        names = set()
        for md in cd.methods:
            if md.name in names:
                out.append(Violation(V.DuplicateMethod, cd.name, f"method {md.name} repeated"))
            names.add(md.name)
            for anc in chain[1:]:
                over = next((m for m in find_class(p, anc).methods if m.name == md.name), None)
                if over is not None:
                    if over.signature() != md.signature():
                        out.append(Violation(V.BadOverride, cd.name,
                                             f"{md.name} differs from {anc}.{md.name}"))
                    break

        for f in cd.fields:
            if find_class(p, f.cls) is None:
                out.append(Violation(V.UnknownClassInSig, cd.name,
                                     f"field {f.name} has unknown class {f.cls}"))
        for md in cd.methods:
            used = [md.ret_cls] + [prm.cls for prm in md.params] + [x.cls for x in md.throws]
            for c in used:
                if find_class(p, c) is None:
                    out.append(Violation(V.UnknownClassInSig, cd.name,
                                         f"method {md.name} mentions unknown class {c}"))
    return out


def _cycles(p: Program) -> List[Violation]:
    out = []
    reported = set()
    for cd in p.classes:
        path: List[str] = []
        cur: Optional[str] = cd.name
        # a chain longer than the class count must revisit some class
        while cur is not None and cur not in path and len(path) <= len(p.classes):
            path.append(cur)
            nxt = find_class(p, cur)
            cur = nxt.extends if nxt is not None else None
        if cur is not None and cur in path:
            cycle = path[path.index(cur):]
            key = frozenset(cycle)
            if key not in reported:
                reported.add(key)
                out.append(Violation(ViolationKind.ExtendsCycle, cycle[0],
                                     " -> ".join(cycle + [cycle[0]])))
    return out
