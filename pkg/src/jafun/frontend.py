"""Concrete-syntax parser and program loader."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

from .syntax import (
    NULL,
    THIS,
    AccessMode,
    ClassDecl,
    ExcDecl,
    Expr,
    FieldDecl,
    FieldMode,
    FieldRead,
    FieldWrite,
    If,
    Invoke,
    Let,
    MethodDecl,
    New,
    Param,
    Program,
    Throw,
    TryCatch,
    Val,
    Value,
    Var,
)

MODES = {m.value: m for m in AccessMode}
KEYWORDS = frozenset({
    "class", "ext", "rep", "rwr", "rd", "atm", "new", "let", "in", "if",
    "else", "throw", "try", "catch", "throws", "this", "null",
})

OBJECT = "Object"
NPE = "NPE"
PREDEFINED = (
    ClassDecl(OBJECT, None, (), ()),
    ClassDecl(NPE, OBJECT, (), ()),
)


class ParseError(Exception):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class Token:
    kind: str  # "id", "kw", "sym", "eof"
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>//[^\n]*)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>==|[{}();,.=])"
)


def tokenize(source: str) -> List[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(line, col, f"unexpected character {source[pos]!r}")
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "id":
            tokens.append(Token("kw" if text in KEYWORDS else "id", text, line, col))
        elif kind == "sym":
            tokens.append(Token("sym", text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise ParseError(tok.line, tok.col, f"{msg} (found {found!r})")

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("kw", "sym") and t.text == text

    def eat(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        tok = self.peek()
        self.i += 1
        return tok

    def ident(self) -> str:
        tok = self.peek()
        if tok.kind != "id":
            self.error("expected identifier")
        self.i += 1
        return tok.text

    def mode_opt(self) -> Optional[AccessMode]:
        tok = self.peek()
        if tok.kind == "kw" and tok.text in MODES:
            self.i += 1
            return MODES[tok.text]
        return None

    def mode(self) -> AccessMode:
        m = self.mode_opt()
        if m is None:
            self.error("expected access mode")
        return m

    # grammar
    def program(self) -> Program:
        classes = []
        while self.peek().kind != "eof":
            classes.append(self.class_decl())
        return Program(tuple(classes))

    def class_decl(self) -> ClassDecl:
        self.eat("class")
        name = self.ident()
        ext = None
        if self.at("ext"):
            self.i += 1
            ext = self.ident()
        self.eat("{")
        fields: List[FieldDecl] = []
        methods: List[MethodDecl] = []
        while not self.at("}"):
            if self._field_ahead():
                if methods:
                    self.error("field declarations must precede methods")
                fields.append(self.field_decl())
            else:
                methods.append(self.method_decl())
        self.eat("}")
        return ClassDecl(name, ext, tuple(fields), tuple(methods))

    def _field_ahead(self) -> bool:
        if self.at("rep"):
            return True
        return (self.peek().kind == "id" and self.peek(1).kind == "id"
                and self.at(";", 2))

    def field_decl(self) -> FieldDecl:
        fmode = FieldMode.PLAIN
        if self.at("rep"):
            self.i += 1
            fmode = FieldMode.REP
        cls = self.ident()
        name = self.ident()
        self.eat(";")
        return FieldDecl(fmode, cls, name)

    def method_decl(self) -> MethodDecl:
        start = self.peek()
        present: List[bool] = []

        ret_mode = self.mode_opt()
        present.append(ret_mode is not None)
        ret_cls = self.ident()
        recv_mode = self.mode_opt()
        present.append(recv_mode is not None)
        name = self.ident()

        self.eat("(")
        params = []
        if not self.at(")"):
            while True:
                m = self.mode_opt()
                present.append(m is not None)
                pcls = self.ident()
                params.append(Param(m or AccessMode.RWR, pcls, self.ident()))
                if not self.at(","):
                    break
                self.i += 1
        self.eat(")")

        throws = []
        if self.at("throws"):
            self.i += 1
            while True:
                m = self.mode_opt()
                present.append(m is not None)
                throws.append(ExcDecl(m or AccessMode.RWR, self.ident()))
                if not self.at(","):
                    break
                self.i += 1

        if any(present) and not all(present):
            self.error(f"method {name!r} mixes annotated and unannotated modes", start)

        self.eat("{")
        body = self.expr()
        self.eat("}")
        return MethodDecl(
            annotated=all(present),
            ret_mode=ret_mode or AccessMode.RWR,
            ret_cls=ret_cls,
            recv_mode=recv_mode or AccessMode.RWR,
            name=name,
            params=tuple(params),
            throws=tuple(throws),
            body=body,
        )

    def value(self) -> Value:
        tok = self.peek()
        if tok.kind == "id":
            self.i += 1
            return Var(tok.text)
        if self.at("this"):
            self.i += 1
            return THIS
        if self.at("null"):
            self.i += 1
            return NULL
        self.error("expected a value (identifier, this or null)")

    def values(self) -> Tuple[Value, ...]:
        self.eat("(")
        vs = []
        if not self.at(")"):
            vs.append(self.value())
            while self.at(","):
                self.i += 1
                vs.append(self.value())
        self.eat(")")
        return tuple(vs)

    def expr(self) -> Expr:
        if self.at("new"):
            self.i += 1
            mode = self.mode()
            cls = self.ident()
            return New(mode, cls, self.values())
        if self.at("let"):
            self.i += 1
            cls = self.ident()
            var = self.ident()
            self.eat("=")
            bound = self.expr()
            self.eat("in")
            return Let(cls, var, bound, self.expr())
        if self.at("if"):
            self.i += 1
            self.eat("(")
            v1 = self.value()
            self.eat("==")
            v2 = self.value()
            self.eat(")")
            then = self.expr()
            self.eat("else")
            return If(v1, v2, then, self.expr())
        if self.at("throw"):
            self.i += 1
            return Throw(self.value())
        if self.at("try"):
            self.i += 1
            self.eat("{")
            body = self.expr()
            self.eat("}")
            self.eat("catch")
            self.eat("(")
            mode = self.mode()
            cls = self.ident()
            var = self.ident()
            self.eat(")")
            self.eat("{")
            handler = self.expr()
            self.eat("}")
            return TryCatch(body, mode, cls, var, handler)

        recv = self.value()
        if not self.at("."):
            return Val(recv)
        self.i += 1
        name = self.ident()
        if self.at("("):
            return Invoke(recv, name, self.values())
        if self.at("="):
            self.i += 1
            return FieldWrite(recv, name, self.value())
        return FieldRead(recv, name)


def parse_program(source: str) -> Program:
    return Parser(source).program()


def parse_expr(source: str) -> Expr:
    parser = Parser(source)
    e = parser.expr()
    if parser.peek().kind != "eof":
        parser.error("trailing input after expression")
    return e


def parse_file(path) -> Program:
    data = Path(path).read_bytes()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        before = data[: exc.start]
        line = before.count(b"\n") + 1
        column = exc.start - (before.rfind(b"\n") + 1) + 1
        raise ParseError(line, column, "non-ASCII byte in source") from None
    return parse_program(text)


def load(p: Program) -> Program:
    """Prepend the predefined ``Object`` and ``NPE`` classes when absent."""
    names = {cd.name for cd in p.classes}
    missing = tuple(cd for cd in PREDEFINED if cd.name not in names)
    if not missing:
        return p
    return Program(missing + p.classes)
