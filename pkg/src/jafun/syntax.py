"""Abstract syntax of Jafun, runtime frames, and the pretty-printer.

Every node is an immutable dataclass.  Locations are plain ``int``; the null
location is ``None`` (so a ``Loc`` is ``int | None``).  Execution modes follow
the same convention: ``None`` is normal execution, a class name is an
exception of that class being dispatched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

Loc = Optional[int]
ExecMode = Optional[str]


class AccessMode(enum.Enum):
    RWR = "rwr"
    RD = "rd"
    ATM = "atm"

    def __str__(self) -> str:
        return self.value


class FieldMode(enum.Enum):
    REP = "rep"
    PLAIN = ""


@dataclass(frozen=True)
class Bottom:
    """Class of ``null``; a subtype of every class."""

    def __str__(self) -> str:
        return "_|_"


BOTTOM = Bottom()
ClassRef = Union[str, Bottom]


@dataclass(frozen=True)
class ACId:
    cls: ClassRef
    mode: AccessMode

    def __str__(self) -> str:
        return f"{self.mode} {self.cls}"


# -- values -----------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class This:
    pass


@dataclass(frozen=True)
class Null:
    pass


@dataclass(frozen=True)
class LocV:
    loc: int


Value = Union[Var, This, Null, LocV]
THIS = This()
NULL = Null()


def is_loc_value(v: Value) -> bool:
    return isinstance(v, (Null, LocV))


def loc_of(v: Value) -> Loc:
    """Location denoted by a location value (``Null`` or ``LocV``)."""
    if isinstance(v, LocV):
        return v.loc
    if isinstance(v, Null):
        return None
    raise ValueError(f"not a location value: {v!r}")


def value_of(l: Loc) -> Value:
    return NULL if l is None else LocV(l)


# -- expressions --------------------------------------------------------------

@dataclass(frozen=True)
class New:
    mode: AccessMode
    cls: str
    args: Tuple[Value, ...]


@dataclass(frozen=True)
class Let:
    cls: str
    var: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class FieldRead:
    recv: Value
    fld: str


@dataclass(frozen=True)
class FieldWrite:
    recv: Value
    fld: str
    val: Value


@dataclass(frozen=True)
class If:
    v1: Value
    v2: Value
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class Invoke:
    recv: Value
    mth: str
    args: Tuple[Value, ...]


@dataclass(frozen=True)
class Val:
    v: Value


@dataclass(frozen=True)
class Throw:
    v: Value


@dataclass(frozen=True)
class TryCatch:
    body: "Expr"
    mode: AccessMode
    cls: str
    var: str
    handler: "Expr"


Expr = Union[New, Let, FieldRead, FieldWrite, If, Invoke, Val, Throw, TryCatch]


# -- declarations ---------------------------------------------------------------

@dataclass(frozen=True)
class FieldDecl:
    fmode: FieldMode
    cls: str
    name: str


@dataclass(frozen=True)
class Param:
    mode: AccessMode
    cls: str
    name: str


@dataclass(frozen=True)
class ExcDecl:
    mode: AccessMode
    cls: str


@dataclass(frozen=True)
class MethodDecl:
    annotated: bool
    ret_mode: AccessMode
    ret_cls: str
    recv_mode: AccessMode
    name: str
    params: Tuple[Param, ...]
    throws: Tuple[ExcDecl, ...]
    body: Expr

    def signature(self) -> tuple:
        """Everything an override must repeat verbatim (parameter names excluded)."""
        return (
            self.annotated,
            self.ret_mode,
            self.ret_cls,
            self.recv_mode,
            tuple((p.mode, p.cls) for p in self.params),
            self.throws,
        )


@dataclass(frozen=True)
class ClassDecl:
    name: str
    extends: Optional[str]
    fields: Tuple[FieldDecl, ...] = ()
    methods: Tuple[MethodDecl, ...] = ()


@dataclass(frozen=True)
class Program:
    classes: Tuple[ClassDecl, ...] = ()
    # memo for class-table queries; never part of equality
    _cache: dict = field(default_factory=dict, init=False, repr=False,
                         compare=False, hash=False)

    def __iter__(self):
        return iter(self.classes)

    def __len__(self) -> int:
        return len(self.classes)


# -- runtime: contexts and frames ---------------------------------------------

@dataclass(frozen=True)
class CtxLet:
    cls: str
    var: str
    body: Expr


@dataclass(frozen=True)
class CtxTry:
    mode: AccessMode
    cls: str
    var: str
    handler: Expr


CtxNode = Union[CtxLet, CtxTry]


@dataclass(frozen=True)
class Frame:
    ctx: Tuple[CtxNode, ...]  # innermost node first
    redex: Expr
    mode: ExecMode = None


FrameStack = Tuple[Frame, ...]  # topmost frame first


def context_plug(ctx: Tuple[CtxNode, ...], e: Expr) -> Expr:
    for node in ctx:
        if isinstance(node, CtxLet):
            e = Let(node.cls, node.var, e, node.body)
        else:
            e = TryCatch(e, node.mode, node.cls, node.var, node.handler)
    return e


# -- pretty-printing --------------------------------------------------------------

def show_value(v: Value) -> str:
    if isinstance(v, Var):
        return v.name
    if isinstance(v, This):
        return "this"
    if isinstance(v, Null):
        return "null"
    return f"@{v.loc}"


def _vals(vs) -> str:
    return ", ".join(show_value(v) for v in vs)


def show_expr(e: Expr) -> str:
    match e:
        case New(mode, cls, args):
            return f"new {mode} {cls}({_vals(args)})"
        case Let(cls, var, bound, body):
            return f"let {cls} {var} = {show_expr(bound)} in {show_expr(body)}"
        case FieldRead(recv, fld):
            return f"{show_value(recv)}.{fld}"
        case FieldWrite(recv, fld, val):
            return f"{show_value(recv)}.{fld} = {show_value(val)}"
        case If(v1, v2, then, orelse):
            return (f"if ({show_value(v1)} == {show_value(v2)}) "
                    f"{show_expr(then)} else {show_expr(orelse)}")
        case Invoke(recv, mth, args):
            return f"{show_value(recv)}.{mth}({_vals(args)})"
        case Val(v):
            return show_value(v)
        case Throw(v):
            return f"throw {show_value(v)}"
        case TryCatch(body, mode, cls, var, handler):
            return (f"try {{ {show_expr(body)} }} "
                    f"catch ({mode} {cls} {var}) {{ {show_expr(handler)} }}")
    raise TypeError(f"not an expression: {e!r}")


def _show_method(md: MethodDecl) -> str:
    if md.annotated:
        params = ", ".join(f"{p.mode} {p.cls} {p.name}" for p in md.params)
        throws = ", ".join(f"{x.mode} {x.cls}" for x in md.throws)
        head = f"{md.ret_mode} {md.ret_cls} {md.recv_mode} {md.name}({params})"
    else:
        params = ", ".join(f"{p.cls} {p.name}" for p in md.params)
        throws = ", ".join(x.cls for x in md.throws)
        head = f"{md.ret_cls} {md.name}({params})"
    if md.throws:
        head += f" throws {throws}"
    return f"  {head} {{\n    {show_expr(md.body)}\n  }}"


def show_class(cd: ClassDecl) -> str:
    head = f"class {cd.name}"
    if cd.extends is not None:
        head += f" ext {cd.extends}"
    lines = [head + " {"]
    for f in cd.fields:
        rep = "rep " if f.fmode is FieldMode.REP else ""
        lines.append(f"  {rep}{f.cls} {f.name};")
    lines.extend(_show_method(md) for md in cd.methods)
    lines.append("}")
    return "\n".join(lines)


def show_program(p: Program) -> str:
    return "\n\n".join(show_class(cd) for cd in p.classes) + "\n"


def show_frame(fr: Frame) -> str:
    hole = f"[[ {show_expr(fr.redex)} ]]_{fr.mode or '-'}"
    return show_expr_ctx(fr.ctx, hole)


def show_expr_ctx(ctx: Tuple[CtxNode, ...], hole: str) -> str:
    s = hole
    for node in ctx:
        if isinstance(node, CtxLet):
            s = f"let {node.cls} {node.var} = {s} in {show_expr(node.body)}"
        else:
            s = (f"try {{ {s} }} catch ({node.mode} {node.cls} {node.var}) "
                 f"{{ {show_expr(node.handler)} }}")
    return s
