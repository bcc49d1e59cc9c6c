"""Concrete syntax for types and query files.

Type grammar (binders extend as far to the right as possible)::

    type   ::= 'rec' IDENT '.' type
             | 'forall' IDENT '<=' type '.' type
             | arrow
    arrow  ::= atom '->' type | atom
    atom   ::= IDENT | '(' type ')'

A query file is a sequence of ``;``-terminated clauses.  Leading clauses of
the form ``IDENT <= type;`` whose identifier is not yet declared are
declarations; every other clause is a query ``type <= type;`` or
``type == type;``, optionally prefixed by ``expect yes:`` or ``expect no:``.
``#`` comments run to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .syntax import Relation, SFun, SForall, SRec, SurfaceType, SVar

KEYWORDS = frozenset({"rec", "forall"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>->|<=|==|[().;:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SourcePos:
    line: int
    column: int
    offset: int

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class ParseError(Exception):
    def __init__(self, pos: SourcePos, message: str):
        self.pos = pos
        self.message = message
        super().__init__(f"{pos}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'kw', 'op', 'eof'
    text: str
    pos: SourcePos


def _pos_at(text: str, offset: int) -> SourcePos:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return SourcePos(line, col, offset)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(_pos_at(text, i), f"unexpected character {text[i]!r}")
        kind = m.lastgroup
        if kind == "ident":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, _pos_at(text, i)))
        elif kind == "op":
            tokens.append(Token("op", m.group(), _pos_at(text, i)))
        i = m.end()
    # EOF errors point at the last character so positions stay inside the input.
    tokens.append(Token("eof", "", _pos_at(text, max(len(text) - 1, 0))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, expected: str) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(t.pos, f"expected {expected}, found {found}")

    def expect_op(self, op: str) -> Token:
        if self.tok.kind == "op" and self.tok.text == op:
            return self.advance()
        raise self.error(repr(op))

    def expect_ident(self) -> str:
        if self.tok.kind == "ident":
            return self.advance().text
        raise self.error("identifier")

    def at_op(self, op: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == op

    def type_(self) -> SurfaceType:
        t = self.tok
        if t.kind == "kw" and t.text == "rec":
            self.advance()
            name = self.expect_ident()
            self.expect_op(".")
            return SRec(name, self.type_())
        if t.kind == "kw" and t.text == "forall":
            self.advance()
            name = self.expect_ident()
            self.expect_op("<=")
            bound = self.type_()
            self.expect_op(".")
            return SForall(name, bound, self.type_())
        left = self.atom()
        if self.at_op("->"):
            self.advance()
            return SFun(left, self.type_())
        return left

    def atom(self) -> SurfaceType:
        t = self.tok
        if t.kind == "ident":
            self.advance()
            return SVar(t.text)
        if self.at_op("("):
            self.advance()
            inner = self.type_()
            self.expect_op(")")
            return inner
        raise self.error("type")


def parse_type(text: str) -> SurfaceType:
    p = _Parser(text)
    t = p.type_()
    if p.tok.kind != "eof":
        raise p.error("end of input")
    return t


# --- printing -------------------------------------------------------------


def print_type(s: SurfaceType) -> str:
    """Render with the fewest parentheses that still parse back to ``s``."""
    match s:
        case SVar(name):
            return name
        case SFun(dom, cod):
            left = print_type(dom)
            if not isinstance(dom, SVar):
                left = f"({left})"
            return f"{left} -> {print_type(cod)}"
        case SForall(binder, bound, body):
            return f"forall {binder} <= {print_type(bound)}. {print_type(body)}"
        case SRec(binder, body):
            return f"rec {binder}. {print_type(body)}"
    raise TypeError(f"not a surface type: {s!r}")


# --- query files ----------------------------------------------------------


@dataclass(frozen=True)
class Query:
    left: SurfaceType
    right: SurfaceType
    relation: Relation
    expected: bool | None = None
    pos: SourcePos | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{print_type(self.left)} {self.relation.symbol} {print_type(self.right)}"


@dataclass(frozen=True)
class QueryFile:
    decls: tuple[tuple[str, SurfaceType], ...] = ()
    queries: tuple[Query, ...] = ()


def parse_query_file(text: str) -> QueryFile:
    p = _Parser(text)
    decls: list[tuple[str, SurfaceType]] = []
    declared: set[str] = set()
    queries: list[Query] = []
    in_decls = True
    while p.tok.kind != "eof":
        start = p.tok.pos
        expected: bool | None = None
        if (
            p.tok.kind == "ident"
            and p.tok.text == "expect"
            and p.peek().kind == "ident"
            and p.peek().text in ("yes", "no")
            and p.peek(2).kind == "op"
            and p.peek(2).text == ":"
        ):
            p.advance()
            expected = p.advance().text == "yes"
            p.advance()
        is_decl = (
            in_decls
            and expected is None
            and p.tok.kind == "ident"
            and p.tok.text not in declared
            and p.peek().kind == "op"
            and p.peek().text == "<="
        )
        if is_decl:
            name = p.advance().text
            p.advance()
            decls.append((name, p.type_()))
            declared.add(name)
            p.expect_op(";")
            continue
        in_decls = False
        left = p.type_()
        if p.at_op("<="):
            rel = Relation.SUB
        elif p.at_op("=="):
            rel = Relation.EQ
        else:
            raise p.error("'<=' or '=='")
        p.advance()
        right = p.type_()
        p.expect_op(";")
        queries.append(Query(left, right, rel, expected, start))
    return QueryFile(tuple(decls), tuple(queries))
