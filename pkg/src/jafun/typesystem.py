"""Access-mode and class type checker.

Types are ``ACId`` pairs of a class and an access mode.  Modes are ordered
``rwr ⊑ rd ⊑ atm``: giving up a permission is always allowed.  ``null`` has
type ``⟨⊥, rwr⟩``, below every other type.
"""

from __future__ import annotations

import enum
from typing import List, Optional, Sequence, Tuple

from .frontend import NPE, OBJECT
from .program import field_lookup, find_class, flds, method_lookup, superclasses, subtype_leq, thrs_of_md
from .syntax import (
    BOTTOM,
    THIS,
    AccessMode,
    ACId,
    Bottom,
    ClassDecl,
    ClassRef,
    Expr,
    FieldMode,
    FieldRead,
    FieldWrite,
    If,
    Invoke,
    Let,
    MethodDecl,
    New,
    Null,
    Program,
    Throw,
    TryCatch,
    Val,
    Value,
    Var,
    show_value,
)

RWR, RD, ATM = AccessMode.RWR, AccessMode.RD, AccessMode.ATM
_RANK = {RWR: 0, RD: 1, ATM: 2}
NULL_TYPE = ACId(BOTTOM, RWR)
NPE_ATM = ACId(NPE, ATM)

Env = Tuple[Tuple[Value, ACId], ...]
ExEnv = Tuple[ACId, ...]


class Reason(enum.Enum):
    UnboundVar = "UnboundVar"
    ModeViolation = "ModeViolation"
    ClassMismatch = "ClassMismatch"
    NoSuchField = "NoSuchField"
    NoSuchMethod = "NoSuchMethod"
    UncoveredThrow = "UncoveredThrow"
    AtmFollowed = "AtmFollowed"
    WriteWithoutRwr = "WriteWithoutRwr"
    ArityMismatch = "ArityMismatch"
    UnverifiedCall = "UnverifiedCall"


class TypingError(Exception):
    def __init__(self, reason: Reason, path: str, expected: Optional[ACId] = None,
                 found: Optional[ACId] = None, detail: str = ""):
        super().__init__(f"{path}: {reason.value}: {detail}")
        self.reason = reason
        self.path = path
        self.expected = expected
        self.found = found
        self.detail = detail

    @property
    def warning(self) -> bool:
        return self.reason is Reason.UnverifiedCall

    def render(self) -> str:
        exp = "-" if self.expected is None else str(self.expected)
        fnd = "-" if self.found is None else str(self.found)
        line = f"{self.path}: {self.reason.value}: expected {exp}, found {fnd}"
        return f"{line} ({self.detail})" if self.detail else line


# -- orders on modes and types -------------------------------------------------------

def mode_leq(a: AccessMode, b: AccessMode) -> bool:
    return _RANK[a] <= _RANK[b]


def mode_join(a: AccessMode, b: AccessMode) -> AccessMode:
    return a if _RANK[a] >= _RANK[b] else b


def mode_meet(a: AccessMode, b: AccessMode) -> AccessMode:
    return a if _RANK[a] <= _RANK[b] else b


def acid_leq(p: Program, a: ACId, b: ACId) -> bool:
    return subtype_leq(p, a.cls, b.cls) and mode_leq(a.mode, b.mode)


def class_join(p: Program, c: ClassRef, d: ClassRef) -> ClassRef:
    if isinstance(c, Bottom):
        return d
    if isinstance(d, Bottom):
        return c
    for anc in superclasses(p, c):
        if subtype_leq(p, d, anc):
            return anc
    return OBJECT


def acid_join(p: Program, a: ACId, b: ACId) -> ACId:
    return ACId(class_join(p, a.cls, b.cls), mode_join(a.mode, b.mode))


def acid_meet(p: Program, a: ACId, b: ACId) -> Optional[ACId]:
    """Greatest lower bound, or ``None`` when the classes are unrelated."""
    if subtype_leq(p, a.cls, b.cls):
        cls = a.cls
    elif subtype_leq(p, b.cls, a.cls):
        cls = b.cls
    else:
        return None
    return ACId(cls, mode_meet(a.mode, b.mode))


# -- environments --------------------------------------------------------------------

def env_lookup(env: Env, key: Value) -> Optional[ACId]:
    for k, t in env:
        if k == key:
            return t
    return None


def env_extend(env: Env, key: Value, t: ACId) -> Env:
    """Bind ``key`` to ``t``, replacing any earlier binding of the same key."""
    return tuple((k, s) for k, s in env if k != key) + ((key, t),)


def method_env(cd: ClassDecl, md: MethodDecl) -> Env:
    env: Env = ((THIS, ACId(cd.name, md.recv_mode)),)
    for prm in md.params:
        env = env_extend(env, Var(prm.name), ACId(prm.cls, prm.mode))
    return env


# -- inference -----------------------------------------------------------------------

class Checker:
    """Type synthesis inside one method of one class.

    Mode checks are switched off in unannotated methods, leaving class-only
    checking.  Non-fatal diagnostics (calls into unannotated code) collect in
    ``warnings``.
    """

    def __init__(self, p: Program, cls: ClassDecl, mth: MethodDecl):
        self.p = p
        self.cls = cls
        self.mth = mth
        self.modes = mth.annotated
        self.warnings: List[TypingError] = []
        self.prefix = f"{cls.name}.{mth.name}:"

    def _path(self, path: Sequence[str]) -> str:
        return self.prefix + "/".join(path)

    def _mleq(self, a: AccessMode, b: AccessMode) -> bool:
        return not self.modes or mode_leq(a, b)

    def require(self, found: ACId, expected: ACId, path, check_modes: bool = True):
        if not subtype_leq(self.p, found.cls, expected.cls):
            raise TypingError(Reason.ClassMismatch, self._path(path), expected, found)
        if check_modes and not self._mleq(found.mode, expected.mode):
            raise TypingError(Reason.ModeViolation, self._path(path), expected, found)

    def covered(self, xi: ExEnv, t: ACId) -> bool:
        if isinstance(t.cls, Bottom):
            return True
        for allowed in (NPE_ATM,) + tuple(xi):
            if subtype_leq(self.p, t.cls, allowed.cls) and self._mleq(t.mode, allowed.mode):
                return True
        return False

    def value(self, gamma: Env, v: Value, path) -> ACId:
        if isinstance(v, Null):
            return NULL_TYPE
        t = env_lookup(gamma, v)
        if t is None:
            raise TypingError(Reason.UnboundVar, self._path(path),
                              detail=f"{show_value(v)} is not bound")
        return t

    def _known_class(self, c: str, path):
        if find_class(self.p, c) is None:
            raise TypingError(Reason.ClassMismatch, self._path(path),
                              detail=f"unknown class {c}")

    def infer(self, xi: ExEnv, gamma: Env, e: Expr, path=("body",)) -> ACId:
        p = self.p
        match e:
            case Val(v):
                return self.value(gamma, v, path)

            case Let(c1, x, e1, e2):
                t1 = self.infer(xi, gamma, e1, path + (f"let({x}).bound",))
                self._known_class(c1, path)
                self.require(t1, ACId(c1, t1.mode), path + (f"let({x}).bound",), False)
                inner = env_extend(gamma, Var(x), ACId(c1, t1.mode))
                return self.infer(xi, inner, e2, path + (f"let({x}).body",))

            case New(mu, c, args):
                self._known_class(c, path)
                fields = flds(p, c)
                if len(fields) != len(args):
                    raise TypingError(Reason.ArityMismatch, self._path(path),
                                      detail=f"{c} has {len(fields)} fields, got {len(args)}")
                for i, (f, a) in enumerate(zip(fields, args)):
                    want = ACId(f.cls, mu if f.fmode is FieldMode.REP else ATM)
                    self.require(self.value(gamma, a, path), want, path + (f"arg{i}",))
                return ACId(c, mu)

            case FieldRead(v, x):
                t = self.value(gamma, v, path)
                if isinstance(t.cls, Bottom):
                    return NULL_TYPE
                if not self._mleq(t.mode, RD):
                    raise TypingError(Reason.AtmFollowed, self._path(path), found=t,
                                      detail=f"read of {x}")
                f = field_lookup(p, t.cls, x)
                if f is None:
                    raise TypingError(Reason.NoSuchField, self._path(path), found=t,
                                      detail=f"{t.cls} has no field {x}")
                return ACId(f.cls, t.mode if f.fmode is FieldMode.REP else ATM)

            case FieldWrite(v, x, w):
                t = self.value(gamma, v, path)
                tw = self.value(gamma, w, path)
                if isinstance(t.cls, Bottom):
                    return NULL_TYPE
                if self.modes and t.mode is ATM:
                    raise TypingError(Reason.AtmFollowed, self._path(path), found=t,
                                      detail=f"write of {x}")
                if self.modes and t.mode is not RWR:
                    raise TypingError(Reason.WriteWithoutRwr, self._path(path),
                                      ACId(t.cls, RWR), t, detail=f"write of {x}")
                f = field_lookup(p, t.cls, x)
                if f is None:
                    raise TypingError(Reason.NoSuchField, self._path(path), found=t,
                                      detail=f"{t.cls} has no field {x}")
                if f.fmode is FieldMode.REP:
                    self.require(tw, ACId(f.cls, RWR), path + ("rhs",))
                    return ACId(f.cls, t.mode)
                self.require(tw, ACId(f.cls, ATM), path + ("rhs",), False)
                return ACId(f.cls, ATM)

            case If(v1, v2, e1, e2):
                self.value(gamma, v1, path)
                self.value(gamma, v2, path)
                t1 = self.infer(xi, gamma, e1, path + ("then",))
                t2 = self.infer(xi, gamma, e2, path + ("else",))
                return acid_join(p, t1, t2)

            case Invoke(v, m, args):
                t = self.value(gamma, v, path)
                targs = [self.value(gamma, a, path) for a in args]
                if isinstance(t.cls, Bottom):
                    return NULL_TYPE
                found = method_lookup(p, t.cls, m)
                if found is None:
                    raise TypingError(Reason.NoSuchMethod, self._path(path), found=t,
                                      detail=f"{t.cls} has no method {m}")
                md = found[1]
                if len(md.params) != len(args):
                    raise TypingError(Reason.ArityMismatch, self._path(path),
                                      detail=f"{m} takes {len(md.params)} arguments, got {len(args)}")
                # calls into unannotated code are checked on classes only
                check_modes = md.annotated
                if self.modes and not md.annotated:
                    self.warnings.append(TypingError(
                        Reason.UnverifiedCall, self._path(path),
                        detail=f"{found[0].name}.{m} is unannotated"))
                if check_modes and not self._mleq(t.mode, md.recv_mode):
                    raise TypingError(Reason.ModeViolation, self._path(path + ("recv",)),
                                      ACId(t.cls, md.recv_mode), t)
                for i, (prm, ta) in enumerate(zip(md.params, targs)):
                    self.require(ta, ACId(prm.cls, prm.mode), path + (f"arg{i}",), check_modes)
                for exc in thrs_of_md(md):
                    exc_t = exc if check_modes else ACId(exc.cls, RWR)
                    if not self.covered(xi, exc_t):
                        raise TypingError(Reason.UncoveredThrow, self._path(path),
                                          found=exc, detail=f"{m} may throw {exc}")
                return ACId(md.ret_cls, md.ret_mode)

            case Throw(v):
                t = self.value(gamma, v, path)
                if not self.covered(xi, t):
                    raise TypingError(Reason.UncoveredThrow, self._path(path), found=t)
                return NULL_TYPE

            case TryCatch(e1, mu, c, x, e2):
                self._known_class(c, path)
                t1 = self.infer(xi + (ACId(c, mu),), gamma, e1, path + ("try",))
                t2 = self.infer(xi, env_extend(gamma, Var(x), ACId(c, mu)), e2,
                                path + (f"catch({x})",))
                return acid_join(p, t1, t2)

        raise TypeError(f"not an expression: {e!r}")


def infer(p: Program, cls: ClassDecl, mth: MethodDecl, xi: ExEnv, gamma: Env, e: Expr) -> ACId:
    return Checker(p, cls, mth).infer(tuple(xi), tuple(gamma), e)


def check_method(p: Program, cd: ClassDecl, md: MethodDecl) -> List[TypingError]:
    chk = Checker(p, cd, md)
    try:
        t = chk.infer(thrs_of_md(md), method_env(cd, md), md.body)
        chk.require(t, ACId(md.ret_cls, md.ret_mode), ("body",))
    except TypingError as err:
        return chk.warnings + [err]
    return chk.warnings


def check_program(p: Program) -> List[TypingError]:
    out: List[TypingError] = []
    for cd in p.classes:
        for md in cd.methods:
            out.extend(check_method(p, cd, md))
    return out


def errors_only(diags: Sequence[TypingError]) -> List[TypingError]:
    return [d for d in diags if not d.warning]
