"""Reader and writer for ``.nij`` model files.

Grammar (normative, also reproduced in GRAMMAR.md)::

    document := stmt*
    stmt     := "dim" INT ";" | "coords" IDENT+ ";" | kind IDENT "=" value ";"
    kind     := "operator" | "metric" | "vector" | "oneform" | "density" | "poly" | "tensor12"
    value    := matrix | vector | expr
    expr     := rational arithmetic over IDENT, INT, with + - * / ^INT and parentheses

Expressions are evaluated straight into :class:`RationalFunction` values while
parsing.  Positions are 1-based.  Every failure, syntactic or semantic, is a
:class:`ParseError`; semantic failures use the subclass :class:`SemanticError`
and carry the offending item name.
"""

from __future__ import annotations

import bisect
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import AlgebraError, RationalFunction

KINDS = ("operator", "metric", "vector", "oneform", "density", "poly", "tensor12")
KEYWORDS = frozenset(("dim", "coords") + KINDS)
POLY_PARAMETER = "t"

MAX_EXPONENT = 64
MAX_DEGREE = 256
MAX_NESTING = 64
MAX_TERMS = 20000
MAX_DIGITS = 1000

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n\f\v]+)"
    r"|(?P<comment>\#[^\n]*)"
    r"|(?P<int>[0-9]+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<punct>[;=\[\],()+\-*/^−])"
)
_JET = re.compile(r"^(?P<base>.+)_x(?P<order>[2-9]|[1-9][0-9]+)?$")


class ParseError(Exception):
    """Syntax error at a 1-based ``line``/``column`` position."""

    def __init__(self, line: int, column: int, message: str, expected=()):
        self.line = line
        self.column = column
        self.message = message
        self.expected = frozenset(expected)
        text = f"{line}:{column}: {message}"
        if self.expected:
            text += f" (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(text)


class SemanticError(ParseError):
    """A well-formed document whose content is inconsistent."""

    def __init__(self, line, column, message, item=None):
        self.item = item
        if item is not None:
            message = f"item {item!r}: {message}"
        super().__init__(line, column, message)


@dataclass(frozen=True)
class Item:
    kind: str
    name: str
    value: object  # RationalFunction or nested tuples of them

    def __eq__(self, other):
        if not isinstance(other, Item):
            return NotImplemented
        return (self.kind, self.name) == (other.kind, other.name) and _value_eq(self.value, other.value)

    def __hash__(self):
        return hash((self.kind, self.name))


def _value_eq(a, b) -> bool:
    if isinstance(a, tuple) or isinstance(b, tuple):
        if not (isinstance(a, tuple) and isinstance(b, tuple)) or len(a) != len(b):
            return False
        return all(_value_eq(x, y) for x, y in zip(a, b))
    return a == b


@dataclass(frozen=True)
class ModelSpec:
    dim: int
    coords: tuple[str, ...]
    items: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Item:
        return self.items[name]

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.coords == other.coords
            and list(self.items) == list(other.items)
            and all(self.items[k] == other.items[k] for k in self.items)
        )

    __hash__ = None

    def get(self, name: str, kind: str | None = None) -> Item:
        if name not in self.items:
            raise KeyError(f"model has no item named {name!r}")
        it = self.items[name]
        if kind is not None and it.kind != kind:
            raise TypeError(f"item {name!r} is a {it.kind}, expected {kind}")
        return it

    def field(self, name: str):
        """The item converted to its typed object (OperatorField, MetricField, ...)."""
        from . import tensors

        it = self.get(name)
        c = self.coords
        if it.kind == "operator":
            return tensors.OperatorField(c, it.value)
        if it.kind == "metric":
            return tensors.MetricField(c, it.value)
        if it.kind == "vector":
            return tensors.VectorField(c, it.value)
        if it.kind == "oneform":
            return tensors.OneForm(c, it.value)
        if it.kind == "tensor12":
            return tensors.Tensor12(c, it.value)
        return it.value


# --------------------------------------------------------------------------
# lexing


@dataclass
class _Tok:
    kind: str  # "int" | "ident" | "kw" | punctuation | "eof"
    text: str
    pos: int


class _Source:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def where(self, pos: int) -> tuple[int, int]:
        i = bisect.bisect_right(self.line_starts, pos) - 1
        return i + 1, pos - self.line_starts[i] + 1


def _lex(src: _Source) -> list[_Tok]:
    text = src.text
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            line, col = src.where(pos)
            raise ParseError(line, col, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        if kind == "int":
            toks.append(_Tok("int", m.group(), pos))
        elif kind == "ident":
            word = m.group()
            toks.append(_Tok("kw" if word in KEYWORDS else "ident", word, pos))
        elif kind == "punct":
            sym = "-" if m.group() == "\u2212" else m.group()  # typographic minus
            toks.append(_Tok(sym, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", n))
    return toks


# --------------------------------------------------------------------------
# parsing


def _describe(tok: _Tok) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, src: _Source):
        self.src = src
        self.toks = _lex(src)
        self.i = 0
        self.depth = 0
        self.item = None

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message, expected=(), tok=None):
        tok = tok or self.tok
        line, col = self.src.where(tok.pos)
        raise ParseError(line, col, message, expected)

    def semantic(self, message, tok=None):
        tok = tok or self.tok
        line, col = self.src.where(tok.pos)
        raise SemanticError(line, col, message, self.item)

    def expect(self, kind: str, what=None) -> _Tok:
        tok = self.tok
        if tok.kind != kind:
            expected = {what or kind} if what is None or isinstance(what, str) else set(what)
            self.fail(f"unexpected {_describe(tok)}", expected)
        self.i += 1
        return tok

    # document -------------------------------------------------------------

    def document(self):
        stmts = []
        while self.tok.kind != "eof":
            stmts.append(self.statement())
        return stmts

    def statement(self):
        tok = self.tok
        if tok.kind != "kw":
            self.fail(f"unexpected {_describe(tok)}", {"dim", "coords", *KINDS})
        self.i += 1
        if tok.text == "dim":
            n = self.expect("int", "INT")
            if len(n.text) > MAX_DIGITS:
                self.fail(f"integer literal longer than {MAX_DIGITS} digits", tok=n)
            self.expect(";")
            return ("dim", tok, int(n.text))
        if tok.text == "coords":
            names = [self.expect("ident", "IDENT")]
            while self.tok.kind == "ident":
                names.append(self.expect("ident"))
            self.expect(";", (";", "IDENT"))
            return ("coords", tok, names)
        name = self.expect("ident", "IDENT")
        self.item = name.text
        self.expect("=")
        value = self.value()
        self.expect(";", ";")
        self.item = None
        return ("item", tok, (tok.text, name, value))

    def value(self):
        if self.tok.kind == "[":
            return self.bracketed()
        return self.expr()

    def bracketed(self):
        open_tok = self.expect("[")
        self.enter(open_tok)
        elems = [self.value()]
        while self.tok.kind == ",":
            self.i += 1
            elems.append(self.value())
        self.expect("]", (",", "]"))
        self.depth -= 1
        return tuple(elems)

    def enter(self, tok):
        self.depth += 1
        if self.depth > MAX_NESTING:
            self.fail("nesting too deep", tok=tok)

    # expressions ----------------------------------------------------------

    def expr(self) -> RationalFunction:
        acc = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.tok.kind
            self.i += 1
            op_tok = self.tok
            rhs = self.term()
            self.guard(acc, rhs, op_tok)
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self) -> RationalFunction:
        acc = self.unary()
        while self.tok.kind in ("*", "/"):
            op_tok = self.tok
            self.i += 1
            rhs = self.unary()
            self.guard(acc, rhs, op_tok)
            if op_tok.kind == "*":
                acc = acc * rhs
            else:
                if rhs.is_zero():
                    self.semantic("division by zero", tok=op_tok)
                acc = acc / rhs
            self.check_size(acc, op_tok)
        return acc

    def unary(self) -> RationalFunction:
        negate = False
        while self.tok.kind in ("+", "-"):
            if self.tok.kind == "-":
                negate = not negate
            self.i += 1
        val = self.power()
        return -val if negate else val

    def power(self) -> RationalFunction:
        base = self.atom()
        if self.tok.kind == "^":
            caret = self.tok
            self.i += 1
            if self.tok.kind == "-":
                self.fail("negative exponents are not allowed; divide instead", {"INT"})
            k = int(self.expect("int", "INT").text)
            if k > MAX_EXPONENT:
                self.fail(f"exponent {k} exceeds the limit {MAX_EXPONENT}", tok=caret)
            deg = max(base.num.total_degree(), base.den.total_degree())
            if deg * k > MAX_DEGREE:
                self.fail(f"degree {deg * k} exceeds the limit {MAX_DEGREE}", tok=caret)
            terms = max(len(base.num), len(base.den))
            if terms > 1 and math.comb(terms + k - 1, k) > MAX_TERMS:
                self.fail("expression too large", tok=caret)
            base = base**k
        return base

    def atom(self) -> RationalFunction:
        tok = self.tok
        if tok.kind == "int":
            if len(tok.text) > MAX_DIGITS:
                self.fail(f"integer literal longer than {MAX_DIGITS} digits")
            self.i += 1
            return RationalFunction(int(tok.text))
        if tok.kind == "ident":
            self.i += 1
            return RationalFunction.var(tok.text)
        if tok.kind == "(":
            self.i += 1
            self.enter(tok)
            val = self.expr()
            self.expect(")", ")")
            self.depth -= 1
            return val
        self.fail(f"unexpected {_describe(tok)}", {"INT", "IDENT", "(", "+", "-"})

    def guard(self, a: RationalFunction, b: RationalFunction, tok):
        na, da, nb, db = len(a.num), len(a.den), len(b.num), len(b.den)
        if max(na * db + nb * da, da * db, na * nb) > MAX_TERMS:
            self.fail("expression too large", tok=tok)

    def check_size(self, val: RationalFunction, tok):
        if max(val.num.total_degree(), val.den.total_degree()) > MAX_DEGREE:
            self.fail(f"expression degree exceeds the limit {MAX_DEGREE}", tok=tok)


def _decode(source) -> str:
    if isinstance(source, str):
        return source
    data = bytes(source)
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        prefix = data[: exc.start].decode("utf-8", errors="replace")
        src = _Source(prefix)
        line, col = src.where(len(prefix))
        raise ParseError(line, col, "invalid UTF-8 byte sequence") from None


def _shape(value):
    if not isinstance(value, tuple):
        return ()
    inner = {_shape(v) for v in value}
    if len(inner) != 1:
        return None
    (s,) = inner
    return None if s is None else (len(value),) + s


def _leaves(value):
    if isinstance(value, tuple):
        for v in value:
            yield from _leaves(v)
    else:
        yield value


def jet_base(name: str, coords) -> tuple[str, int] | None:
    """``("u1", 2)`` for ``u1_x2`` when ``u1`` is a coordinate, else ``None``."""
    m = _JET.match(name)
    if m is None or m.group("base") not in coords:
        return None
    return m.group("base"), int(m.group("order") or 1)


_EXPECTED_SHAPE = {
    "operator": lambda n: (n, n),
    "metric": lambda n: (n, n),
    "vector": lambda n: (n,),
    "oneform": lambda n: (n,),
    "tensor12": lambda n: (n, n, n),
    "density": lambda n: (),
    "poly": lambda n: (),
}


def _build(stmts, src: _Source) -> ModelSpec:
    dim = coords = None
    items: dict[str, Item] = {}
    pending = []

    def err(tok, message, item=None):
        line, col = src.where(tok.pos)
        raise SemanticError(line, col, message, item)

    for kind, tok, payload in stmts:
        if kind == "dim":
            if dim is not None:
                err(tok, "duplicate dim statement")
            if payload < 1:
                err(tok, "dim must be a positive integer")
            dim = payload
        elif kind == "coords":
            if coords is not None:
                err(tok, "duplicate coords statement")
            names = [t.text for t in payload]
            for t in payload:
                if names.count(t.text) > 1:
                    err(t, f"coordinate {t.text!r} declared twice")
            coords = tuple(names)
        else:
            pending.append((tok, payload))
    first = stmts[0][1] if stmts else _Tok("eof", "", 0)
    if dim is None:
        err(first, "missing dim statement")
    if coords is None:
        err(first, "missing coords statement")
    if len(coords) != dim:
        err(first, f"coords declares {len(coords)} names but dim is {dim}")
    for c in coords:
        if jet_base(c, coords) is not None:
            err(first, f"coordinate {c!r} clashes with a jet variable name")

    for tok, (kind, name_tok, value) in pending:
        name = name_tok.text
        if name in items:
            err(name_tok, "duplicate item name", name)
        want = _EXPECTED_SHAPE[kind](dim)
        got = _shape(value)
        if got != want:
            err(tok, f"{kind} must have shape {want or 'scalar'}, got {got if got is not None else 'ragged'}", name)
        for leaf in _leaves(value):
            for v in leaf.variables:
                if kind == "poly":
                    ok = v == POLY_PARAMETER
                elif kind == "density":
                    ok = v in coords or jet_base(v, coords) is not None
                else:
                    ok = v in coords
                if not ok:
                    err(tok, f"undeclared symbol {v!r}", name)
        if kind == "poly" and not value.is_polynomial():
            err(tok, "poly must be a polynomial in t", name)
        if kind == "density":
            if any(jet_base(v, coords) for v in value.denominator().variables):
                err(tok, "jet variables may not appear in a denominator", name)
        if kind == "metric":
            if any(value[i][j] != value[j][i] for i in range(dim) for j in range(i)):
                err(tok, "metric must be symmetric", name)
        items[name] = Item(kind, name, value)
    return ModelSpec(dim, coords, items)


def parse_model(source) -> ModelSpec:
    """Parse ``.nij`` text (``str`` or UTF-8 ``bytes``) into a validated ModelSpec."""
    text = _decode(source)
    src = _Source(text)
    parser = _Parser(src)
    try:
        stmts = parser.document()
    except AlgebraError as exc:  # e.g. a zero denominator produced by cancellation
        line, col = src.where(parser.tok.pos)
        raise SemanticError(line, col, str(exc), parser.item) from None
    return _build(stmts, src)


def parse_expression(text: str) -> RationalFunction:
    """Parse a single expression; symbols are not validated."""
    src = _Source(text)
    p = _Parser(src)
    val = p.expr()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {_describe(p.tok)}", {"end of input"})
    return val


# --------------------------------------------------------------------------
# printing


def format_value(value) -> str:
    if isinstance(value, tuple):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return str(value)


def print_model(m: ModelSpec) -> str:
    """Canonical text; ``parse_model(print_model(m)) == m``."""
    lines = [f"dim {m.dim};", "coords " + " ".join(m.coords) + ";"]
    for it in m.items.values():
        lines.append(f"{it.kind} {it.name} = {format_value(it.value)};")
    return "\n".join(lines) + "\n"


def make_model(dim: int, coords, items=()) -> ModelSpec:
    """Build a ModelSpec from ``(kind, name, value)`` triples and validate it by round trip."""
    text = print_model(ModelSpec(dim, tuple(coords), {n: Item(k, n, _freeze(v)) for k, n, v in items}))
    return parse_model(text)


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    if hasattr(value, "tolist") and not isinstance(value, RationalFunction):
        return _freeze(value.tolist())
    if isinstance(value, (int, Fraction)):
        return RationalFunction(value)
    return value
