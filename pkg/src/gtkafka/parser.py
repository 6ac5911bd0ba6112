"""Parser for the surface language.

Grammar (whitespace-insensitive, ``//`` line comments)::

    program  := class* expr
    class    := "class" IDENT "{" field* method* "}"
    field    := IDENT ":" type
    method   := IDENT "(" IDENT ":" type ")" ":" type "{" expr "}"
    type     := "*" | "any" | IDENT
    expr     := primary ( "." IDENT ( "(" expr ")" | "=" expr )? )*
    primary  := "this" | IDENT | "new" IDENT "(" (expr ("," expr)*)? ")"

Both ``*`` and ``any`` denote the dynamic type. Field reads and writes are
only permitted on ``this``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .surface import (
    ANY,
    ClassDef,
    FieldDef,
    FieldRead,
    FieldWrite,
    Invoke,
    MethodDef,
    New,
    Pos,
    SurfaceExpr,
    SurfaceProgram,
    This,
    Type,
    Var,
)

KEYWORDS = frozenset({"class", "this", "new", "any"})
PUNCTUATION = frozenset("{}():.,=*")


class ParseError(Exception):
    def __init__(self, pos: Pos, message: str):
        super().__init__(f"{pos[0]}:{pos[1]}: {message}")
        self.pos = pos
        self.message = message


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # "ident", "kw", a punctuation character, or "eof"
    text: str
    pos: Pos


def _lex(source: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        pos = (line, col)
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, pos))
            col += j - i
            i = j
            continue
        if ch in PUNCTUATION:
            tokens.append(Token(ch, ch, pos))
            col += 1
            i += 1
            continue
        raise ParseError(pos, f"unexpected character {ch!r}")
    tokens.append(Token("eof", "", (line, col)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.index = 0

    def peek(self) -> Token:
        return self.tokens[self.index]

    def next(self) -> Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text or "end of input"
            raise ParseError(tok.pos, f"expected {what or kind!r}, found {shown!r}")
        return self.next()

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "kw" and tok.text == word

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if not self.at_keyword(word):
            shown = tok.text or "end of input"
            raise ParseError(tok.pos, f"expected {word!r}, found {shown!r}")
        return self.next()

    # program := class* expr
    def program(self) -> SurfaceProgram:
        classes = []
        while self.at_keyword("class"):
            classes.append(self.class_def())
        main = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(tok.pos, f"unexpected {tok.text!r} after main expression")
        return SurfaceProgram(tuple(classes), main)

    def class_def(self) -> ClassDef:
        start = self.expect_keyword("class")
        name = self.expect("ident", "class name")
        self.expect("{")
        fields: list[FieldDef] = []
        methods: list[MethodDef] = []
        while not self.peek().kind == "}":
            member = self.expect("ident", "field or method name")
            if self.peek().kind == ":":
                if methods:
                    raise ParseError(member.pos, "fields must precede methods")
                self.next()
                fields.append(FieldDef(member.text, self.type_name(), member.pos))
            elif self.peek().kind == "(":
                methods.append(self.method_rest(member))
            else:
                raise ParseError(
                    self.peek().pos, "expected ':' (field) or '(' (method)"
                )
        self.expect("}")
        return ClassDef(name.text, tuple(fields), tuple(methods), start.pos)

    def method_rest(self, name: Token) -> MethodDef:
        self.expect("(")
        param = self.expect("ident", "parameter name")
        self.expect(":")
        param_type = self.type_name()
        self.expect(")")
        self.expect(":")
        return_type = self.type_name()
        self.expect("{")
        body = self.expr()
        self.expect("}")
        return MethodDef(name.text, param.text, param_type, return_type, body, name.pos)

    def type_name(self) -> Type:
        tok = self.peek()
        if tok.kind == "*" or self.at_keyword("any"):
            self.next()
            return ANY
        name = self.expect("ident", "type")
        return name.text

    # expr := primary ( "." IDENT ( "(" expr ")" | "=" expr )? )*
    def expr(self) -> SurfaceExpr:
        e = self.primary()
        while self.peek().kind == ".":
            self.next()
            name = self.expect("ident", "member name")
            if self.peek().kind == "(":
                self.next()
                arg = self.expr()
                self.expect(")")
                e = Invoke(e, name.text, arg, name.pos)
            elif self.peek().kind == "=":
                if not isinstance(e, This):
                    raise ParseError(name.pos, "field writes are only permitted on 'this'")
                self.next()
                value = self.expr()
                e = FieldWrite(name.text, value, name.pos)
            else:
                if not isinstance(e, This):
                    raise ParseError(name.pos, "field reads are only permitted on 'this'")
                e = FieldRead(name.text, name.pos)
        return e

    def primary(self) -> SurfaceExpr:
        tok = self.peek()
        if self.at_keyword("this"):
            self.next()
            return This(tok.pos)
        if self.at_keyword("new"):
            self.next()
            name = self.expect("ident", "class name")
            self.expect("(")
            args: list[SurfaceExpr] = []
            if self.peek().kind != ")":
                args.append(self.expr())
                while self.peek().kind == ",":
                    self.next()
                    args.append(self.expr())
            self.expect(")")
            return New(name.text, tuple(args), tok.pos)
        if tok.kind == "ident":
            self.next()
            return Var(tok.text, tok.pos)
        shown = tok.text or "end of input"
        raise ParseError(tok.pos, f"expected an expression, found {shown!r}")


def parse_program(source: str) -> SurfaceProgram:
    """Parse source text into a surface program (classes + main expression)."""
    return _Parser(_lex(source)).program()


def parse_expr(source: str) -> SurfaceExpr:
    """Parse a single expression; handy for tests."""
    parser = _Parser(_lex(source))
    e = parser.expr()
    tok = parser.peek()
    if tok.kind != "eof":
        raise ParseError(tok.pos, f"unexpected {tok.text!r} after expression")
    return e
