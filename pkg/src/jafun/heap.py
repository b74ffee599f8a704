"""Runtime store: objects, locations, allocation and heap coherence.

Heaps are values.  ``write`` and ``install`` return a new ``Heap``; the
original is never touched.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

from .frontend import NPE
from .program import find_class, flds, subtype_leq
from .syntax import Loc, Program

NPE_LOC = 0


@dataclass(frozen=True)
class HeapObject:
    fields: Mapping  # field name -> Loc, in flds order when built by newk
    cls: str


class Heap(Mapping):
    __slots__ = ("_objs",)

    def __init__(self, objs: Optional[Mapping] = None):
        self._objs: Dict[int, HeapObject] = dict(objs or {})

    def __getitem__(self, n: int) -> HeapObject:
        return self._objs[n]

    def __iter__(self) -> Iterator[int]:
        return iter(self._objs)

    def __len__(self) -> int:
        return len(self._objs)

    def __eq__(self, other) -> bool:
        if isinstance(other, Heap):
            return self._objs == other._objs
        return NotImplemented

    __hash__ = None

    def __repr__(self) -> str:
        return f"Heap({self._objs!r})"

    def install(self, n: int, obj: HeapObject) -> "Heap":
        objs = dict(self._objs)
        objs[n] = obj
        return Heap(objs)


def init_heap() -> Heap:
    return Heap({NPE_LOC: HeapObject({}, NPE)})


def alloc(h: Heap, p: Program, c: str) -> Tuple[int, Heap]:
    if find_class(p, c) is None:
        raise KeyError(f"cannot allocate undeclared class {c}")
    return (max(h, default=-1) + 1, h)


def get_class_name(h: Heap, n: int) -> Optional[str]:
    obj = h.get(n)
    return None if obj is None else obj.cls


def read(h: Heap, n: int, x: str):
    """Field ``x`` of the object at ``n``; ``KeyError`` when either is absent.

    The null location is a legitimate field value, so absence cannot be
    signalled by ``None``.
    """
    return h[n].fields[x]


def has_field(h: Heap, n: int, x: str) -> bool:
    obj = h.get(n)
    return obj is not None and x in obj.fields


def write(h: Heap, n: int, x: str, l: Loc) -> Heap:
    obj = h[n]
    fields = dict(obj.fields)
    fields[x] = l
    return h.install(n, HeapObject(fields, obj.cls))


def type_correct_heap(p: Program, h: Heap) -> bool:
    for n, obj in h.items():
        if find_class(p, obj.cls) is None:
            return False
        decls = flds(p, obj.cls)
        if set(obj.fields) != {f.name for f in decls}:
            return False
        for f in decls:
            l = obj.fields[f.name]
            if l is None:
                continue
            target = h.get(l)
            if target is None or not subtype_leq(p, target.cls, f.cls):
                return False
    return True


def dump_heap(h: Heap) -> str:
    lines = []
    for n in sorted(h):
        obj = h[n]
        body = ", ".join(f"{x}={'null' if l is None else l}" for x, l in obj.fields.items())
        lines.append(f"{n}: {obj.cls} {{ {body} }}" if body else f"{n}: {obj.cls} {{ }}")
    return "\n".join(lines)
