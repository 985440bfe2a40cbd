"""Algebra trees for the graph (GRA), nested (NRA) and flat (FRA) dialects.

A single immutable tree type covers all three dialects. :func:`dialect_of`
reports the most restrictive dialect a tree satisfies, which is how the
rewrite passes check their pre- and post-conditions.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterator, Union

from grapevine.terms import (
    Attr,
    Comparison,
    Literal,
    Operand,
    Prop,
    quote_name,
)

PropRequests = tuple[tuple[str, str], ...]  # (property key, attribute name)


class SchemaError(Exception):
    pass


class UnknownAttribute(SchemaError):
    def __init__(self, name: str, node: "AlgebraExpr") -> None:
        super().__init__(f"unknown attribute {name!r} in {type(node).__name__}")
        self.name = name
        self.node = node


class DuplicateAttribute(SchemaError):
    def __init__(self, name: str, node: "AlgebraExpr") -> None:
        super().__init__(f"attribute {name!r} introduced twice in {type(node).__name__}")
        self.name = name
        self.node = node


class Kind(str, enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"
    PATH = "path"
    VALUE = "value"


@dataclass(frozen=True)
class Schema:
    attrs: tuple[tuple[str, Kind], ...] = ()

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attrs)

    def kind(self, name: str) -> Kind:
        for n, k in self.attrs:
            if n == name:
                return k
        raise KeyError(name)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __contains__(self, name: object) -> bool:
        return name in self.names

    def __len__(self) -> int:
        return len(self.attrs)

    def __iter__(self) -> Iterator[tuple[str, Kind]]:
        return iter(self.attrs)

    def __str__(self) -> str:
        return "[" + ", ".join(f"{n}: {k.value}" for n, k in self.attrs) + "]"


@dataclass(frozen=True)
class Bounds:
    min: int
    max: int | None

    def __post_init__(self) -> None:
        if self.min < 0 or (self.max is not None and self.max < self.min):
            raise ValueError(f"invalid length bounds {self.min}..{self.max}")

    def __str__(self) -> str:
        return f"{self.min}..{'*' if self.max is None else self.max}"


# -- nodes -----------------------------------------------------------------


@dataclass(frozen=True)
class GetVertices:
    var: str
    label: str | None = None
    props: PropRequests = ()


@dataclass(frozen=True)
class GetEdges:
    src_var: str
    src_label: str | None
    edge_var: str | None
    edge_type: str | None
    tgt_var: str
    tgt_label: str | None
    src_props: PropRequests = ()
    edge_props: PropRequests = ()
    tgt_props: PropRequests = ()


@dataclass(frozen=True)
class ExpandOut:
    child: AlgebraExpr
    from_var: str
    to_var: str
    to_label: str | None
    edge_type: str | None
    edge_var: str | None = None
    length: Bounds | None = None  # None: exactly one hop
    path_var: str | None = None


@dataclass(frozen=True)
class Selection:
    child: AlgebraExpr
    predicate: tuple[Comparison, ...]


@dataclass(frozen=True)
class Projection:
    child: AlgebraExpr
    columns: tuple[tuple[Attr | Prop, str], ...]


@dataclass(frozen=True)
class Unnest:
    child: AlgebraExpr
    items: tuple[tuple[Prop, str], ...]


@dataclass(frozen=True)
class NaturalJoin:
    left: AlgebraExpr
    right: AlgebraExpr


@dataclass(frozen=True)
class TransitiveJoin:
    left: AlgebraExpr
    right: GetEdges
    min: int = 1
    max: int | None = None
    path_var: str | None = None

    @property
    def bounds(self) -> Bounds:
        return Bounds(self.min, self.max)


AlgebraExpr = Union[
    GetVertices,
    GetEdges,
    ExpandOut,
    Selection,
    Projection,
    Unnest,
    NaturalJoin,
    TransitiveJoin,
]
NULLARY = (GetVertices, GetEdges)


def children(expr: AlgebraExpr) -> tuple[AlgebraExpr, ...]:
    if isinstance(expr, (ExpandOut, Selection, Projection, Unnest)):
        return (expr.child,)
    if isinstance(expr, (NaturalJoin, TransitiveJoin)):
        return (expr.left, expr.right)
    return ()


def walk(expr: AlgebraExpr) -> Iterator[AlgebraExpr]:
    """Pre-order traversal."""
    yield expr
    for child in children(expr):
        yield from walk(child)


def nullaries(expr: AlgebraExpr) -> list[GetVertices | GetEdges]:
    return [node for node in walk(expr) if isinstance(node, NULLARY)]


# -- schemas ---------------------------------------------------------------


def _append(attrs: list[tuple[str, Kind]], name: str, kind: Kind, node) -> None:
    if any(n == name for n, _ in attrs):
        raise DuplicateAttribute(name, node)
    attrs.append((name, kind))


def _edges_schema(ge: GetEdges) -> list[tuple[str, Kind]]:
    attrs: list[tuple[str, Kind]] = [(ge.src_var, Kind.VERTEX)]
    if ge.edge_var is not None:
        _append(attrs, ge.edge_var, Kind.EDGE, ge)
    _append(attrs, ge.tgt_var, Kind.VERTEX, ge)
    for _, name in ge.src_props + ge.edge_props + ge.tgt_props:
        _append(attrs, name, Kind.VALUE, ge)
    return attrs


def _require(schema: Schema, name: str, node, kinds: tuple[Kind, ...] | None = None) -> None:
    if name not in schema:
        raise UnknownAttribute(name, node)
    if kinds is not None and schema.kind(name) not in kinds:
        raise SchemaError(
            f"attribute {name!r} has kind {schema.kind(name).value}, "
            f"expected {'/'.join(k.value for k in kinds)}"
        )


def _check_operand(schema: Schema, operand: Operand, node) -> None:
    if isinstance(operand, Attr):
        _require(schema, operand.name, node)
    elif isinstance(operand, Prop):
        _require(schema, operand.var, node, (Kind.VERTEX, Kind.EDGE))


def schema_of(expr: AlgebraExpr) -> Schema:
    """Output schema; child attributes first, new ones appended in definition order."""
    if isinstance(expr, GetVertices):
        attrs = [(expr.var, Kind.VERTEX)]
        for _, name in expr.props:
            _append(attrs, name, Kind.VALUE, expr)
        return Schema(tuple(attrs))

    if isinstance(expr, GetEdges):
        return Schema(tuple(_edges_schema(expr)))

    if isinstance(expr, ExpandOut):
        child = schema_of(expr.child)
        _require(child, expr.from_var, expr, (Kind.VERTEX,))
        if expr.edge_var is not None and expr.length is not None:
            raise SchemaError("an edge variable cannot bind a variable-length expand")
        attrs = list(child.attrs)
        if expr.edge_var is not None:
            _append(attrs, expr.edge_var, Kind.EDGE, expr)
        _append(attrs, expr.to_var, Kind.VERTEX, expr)
        if expr.path_var is not None:
            if expr.path_var in child:
                _require(child, expr.path_var, expr, (Kind.PATH,))
            else:
                _append(attrs, expr.path_var, Kind.PATH, expr)
        return Schema(tuple(attrs))

    if isinstance(expr, Selection):
        child = schema_of(expr.child)
        for comparison in expr.predicate:
            for operand in comparison.operands():
                _check_operand(child, operand, expr)
        return child

    if isinstance(expr, Projection):
        child = schema_of(expr.child)
        attrs: list[tuple[str, Kind]] = []
        for source, name in expr.columns:
            _check_operand(child, source, expr)
            kind = child.kind(source.name) if isinstance(source, Attr) else Kind.VALUE
            _append(attrs, name, kind, expr)
        return Schema(tuple(attrs))

    if isinstance(expr, Unnest):
        child = schema_of(expr.child)
        attrs = list(child.attrs)
        for prop, name in expr.items:
            _check_operand(child, prop, expr)
            _append(attrs, name, Kind.VALUE, expr)
        return Schema(tuple(attrs))

    if isinstance(expr, NaturalJoin):
        left = schema_of(expr.left)
        right = schema_of(expr.right)
        attrs = list(left.attrs)
        for name, kind in right:
            if name in left:
                if left.kind(name) != kind:
                    raise SchemaError(
                        f"join attribute {name!r} is {left.kind(name).value} on the left "
                        f"but {kind.value} on the right"
                    )
            else:
                attrs.append((name, kind))
        return Schema(tuple(attrs))

    if isinstance(expr, TransitiveJoin):
        left = schema_of(expr.left)
        ge = expr.right
        if not isinstance(ge, GetEdges):
            raise SchemaError("the right operand of a transitive join must be get-edges")
        Bounds(expr.min, expr.max)
        _require(left, ge.src_var, expr, (Kind.VERTEX,))
        if ge.edge_var is not None and not (expr.min == expr.max == 1):
            raise SchemaError("an edge variable can only bind a 1..1 transitive join")
        if ge.edge_props and ge.edge_var is None:
            raise SchemaError("edge properties need an edge variable")
        attrs = list(left.attrs)
        if ge.edge_var is not None:
            _append(attrs, ge.edge_var, Kind.EDGE, expr)
        _append(attrs, ge.tgt_var, Kind.VERTEX, expr)
        for _, name in ge.src_props + ge.edge_props + ge.tgt_props:
            _append(attrs, name, Kind.VALUE, expr)
        if expr.path_var is not None:
            if expr.path_var in left:
                _require(left, expr.path_var, expr, (Kind.PATH,))
            else:
                _append(attrs, expr.path_var, Kind.PATH, expr)
        return Schema(tuple(attrs))

    raise TypeError(f"not an algebra expression: {expr!r}")


# -- dialects --------------------------------------------------------------


class Dialect(enum.IntEnum):
    # ordered from most to least restrictive
    FRA = 0
    NRA = 1
    GRA = 2


def _has_prop_access(expr: AlgebraExpr) -> bool:
    if isinstance(expr, Selection):
        return any(isinstance(o, Prop) for c in expr.predicate for o in c.operands())
    if isinstance(expr, Projection):
        return any(isinstance(src, Prop) for src, _ in expr.columns)
    return False


def dialect_of(expr: AlgebraExpr) -> Dialect:
    nodes = list(walk(expr))
    if any(isinstance(n, ExpandOut) for n in nodes):
        return Dialect.GRA
    if any(isinstance(n, Unnest) or _has_prop_access(n) for n in nodes):
        return Dialect.NRA
    return Dialect.FRA


# -- pretty printing -------------------------------------------------------


def _label(var: str, label: str | None) -> str:
    return quote_name(var) + ("" if label is None else ":" + quote_name(label))


def _props(props: PropRequests) -> str:
    if not props:
        return ""
    inner = ", ".join(f"{quote_name(k)}->{quote_name(a)}" for k, a in props)
    return " {" + inner + "}"


def _edge_spec(var: str | None, edge_type: str | None) -> str:
    type_text = "*" if edge_type is None else quote_name(edge_type)
    if var is None:
        return type_text
    return f"{quote_name(var)}:{type_text}"


def _column(source: Attr | Prop, name: str) -> str:
    text = str(source)
    if isinstance(source, Attr):
        return text if source.name == name else f"{text}->{quote_name(name)}"
    return text if f"{source.var}.{source.key}" == name else f"{text}->{quote_name(name)}"


def _header(expr: AlgebraExpr) -> str:
    if isinstance(expr, GetVertices):
        return f"get-vertices({_label(expr.var, expr.label)}{_props(expr.props)})"
    if isinstance(expr, GetEdges):
        src = _label(expr.src_var, expr.src_label) + _props(expr.src_props)
        edge = _edge_spec(expr.edge_var, expr.edge_type) + _props(expr.edge_props)
        tgt = _label(expr.tgt_var, expr.tgt_label) + _props(expr.tgt_props)
        return f"get-edges({src}, {edge}, {tgt})"
    if isinstance(expr, ExpandOut):
        star = "" if expr.length is None else "*"
        parts = [
            f"{quote_name(expr.from_var)} -{_edge_spec(expr.edge_var, expr.edge_type)}-> "
            f"{_label(expr.to_var, expr.to_label)}"
        ]
        if expr.length is not None:
            parts.append(str(expr.length))
        if expr.path_var is not None:
            parts.append(f"path {quote_name(expr.path_var)}")
        return f"expand-out{star}[{'; '.join(parts)}]"
    if isinstance(expr, Selection):
        return "select[" + " AND ".join(str(c) for c in expr.predicate) + "]"
    if isinstance(expr, Projection):
        return "project[" + ", ".join(_column(s, n) for s, n in expr.columns) + "]"
    if isinstance(expr, Unnest):
        return "unnest[" + ", ".join(f"{p}->{quote_name(n)}" for p, n in expr.items) + "]"
    if isinstance(expr, NaturalJoin):
        return "join"
    if isinstance(expr, TransitiveJoin):
        parts = [str(expr.bounds)]
        if expr.path_var is not None:
            parts.append(f"path {quote_name(expr.path_var)}")
        return f"join*[{'; '.join(parts)}]"
    raise TypeError(f"not an algebra expression: {expr!r}")


def pretty(expr: AlgebraExpr, indent: int = 0) -> str:
    """Render as an indented operator tree, one operator per line."""
    lines = [" " * indent + _header(expr)]
    for child in children(expr):
        lines.append(pretty(child, indent + 2))
    return "\n".join(lines)


# -- parsing the pretty form -----------------------------------------------


class AlgebraParseError(ValueError):
    pass


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<str>'(?:[^'\\]|\\.)*')
  | (?P<num>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*|`(?:[^`]|``)*`)
  | (?P<op>->|\.\.|<>|<=|>=|[-=<>\[\](){},:;.*])
    """,
    re.VERBOSE,
)
_HEADER = re.compile(r"(get-vertices|get-edges|expand-out\*?|select|project|unnest|join\*?)")
_ESCAPES = {"n": "\n", "r": "\r", "t": "\t", "\\": "\\", "'": "'", '"': '"'}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise AlgebraParseError(f"unexpected character {text[pos]!r} in {text!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group()))
    return tokens


class _Header:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, offset: int = 0) -> tuple[str, str] | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, value: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] == value

    def expect(self, value: str) -> None:
        if not self.at(value):
            raise AlgebraParseError(f"expected {value!r} at token {self.peek()} in {self.text!r}")
        self.pos += 1

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.pos += 1
            return True
        return False

    def name(self) -> str:
        tok = self.peek()
        if tok is None or tok[0] != "name":
            raise AlgebraParseError(f"expected a name at token {tok} in {self.text!r}")
        self.pos += 1
        raw = tok[1]
        if raw.startswith("`"):
            return raw[1:-1].replace("``", "`")
        return raw

    def keyword(self, word: str) -> bool:
        tok = self.peek()
        if tok is not None and tok[0] == "name" and tok[1] == word:
            self.pos += 1
            return True
        return False

    def end(self) -> None:
        if self.pos != len(self.tokens):
            raise AlgebraParseError(f"trailing tokens {self.tokens[self.pos:]} in {self.text!r}")

    def integer(self) -> int:
        tok = self.peek()
        if tok is None or tok[0] != "num" or not tok[1].isdigit():
            raise AlgebraParseError(f"expected an integer at token {tok} in {self.text!r}")
        self.pos += 1
        return int(tok[1])

    def bounds(self) -> Bounds:
        low = self.integer()
        self.expect("..")
        high = None if self.accept("*") else self.integer()
        return Bounds(low, high)

    def labelled(self) -> tuple[str, str | None]:
        var = self.name()
        label = self.name() if self.accept(":") else None
        return var, label

    def props(self) -> PropRequests:
        if not self.accept("{"):
            return ()
        items = []
        while True:
            key = self.name()
            self.expect("->")
            items.append((key, self.name()))
            if not self.accept(","):
                break
        self.expect("}")
        return tuple(items)

    def edge_spec(self) -> tuple[str | None, str | None]:
        if self.accept("*"):
            return None, None
        first = self.name()
        if self.accept(":"):
            edge_type = None if self.accept("*") else self.name()
            return first, edge_type
        return None, first

    def operand(self) -> Operand:
        tok = self.peek()
        if tok is None:
            raise AlgebraParseError(f"expected an operand in {self.text!r}")
        kind, raw = tok
        if kind == "str":
            self.pos += 1
            body = raw[1:-1]
            return Literal(re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body))
        if kind == "num":
            self.pos += 1
            if re.fullmatch(r"-?\d+", raw):
                return Literal(int(raw))
            return Literal(float(raw))
        if kind == "name" and raw in ("true", "false"):
            self.pos += 1
            return Literal(raw == "true")
        first = self.name()
        if self.accept("."):
            return Prop(first, self.name())
        return Attr(first)

    def comparison(self) -> Comparison:
        left = self.operand()
        tok = self.peek()
        if tok is None or tok[1] not in ("=", "<>", "<", "<=", ">", ">="):
            raise AlgebraParseError(f"expected a comparison operator in {self.text!r}")
        self.pos += 1
        return Comparison(left, tok[1], self.operand())

    def tail_path(self) -> str | None:
        if self.accept(";"):
            if not self.keyword("path"):
                raise AlgebraParseError(f"expected 'path' in {self.text!r}")
            return self.name()
        return None


def _parse_header(op: str, body: str):
    """Return (constructor taking children, arity)."""
    h = _Header(body)
    if op == "get-vertices":
        h.expect("(")
        var, label = h.labelled()
        props = h.props()
        h.expect(")")
        h.end()
        return (lambda: GetVertices(var, label, props)), 0
    if op == "get-edges":
        h.expect("(")
        src, src_label = h.labelled()
        src_props = h.props()
        h.expect(",")
        edge_var, edge_type = h.edge_spec()
        edge_props = h.props()
        h.expect(",")
        tgt, tgt_label = h.labelled()
        tgt_props = h.props()
        h.expect(")")
        h.end()
        return (
            lambda: GetEdges(
                src, src_label, edge_var, edge_type, tgt, tgt_label,
                src_props, edge_props, tgt_props,
            )
        ), 0
    if op in ("expand-out", "expand-out*"):
        h.expect("[")
        from_var = h.name()
        h.expect("-")
        edge_var, edge_type = h.edge_spec()
        h.expect("->")
        to_var, to_label = h.labelled()
        length = None
        if op == "expand-out*":
            h.expect(";")
            length = h.bounds()
        path_var = h.tail_path()
        h.expect("]")
        h.end()
        return (
            lambda c: ExpandOut(c, from_var, to_var, to_label, edge_type, edge_var, length, path_var)
        ), 1
    if op == "select":
        h.expect("[")
        preds = []
        if not h.at("]"):
            preds.append(h.comparison())
            while h.keyword("AND"):
                preds.append(h.comparison())
        h.expect("]")
        h.end()
        return (lambda c: Selection(c, tuple(preds))), 1
    if op == "project":
        h.expect("[")
        cols = []
        while not h.at("]"):
            source = h.operand()
            if isinstance(source, Literal):
                raise AlgebraParseError(f"literal projection column in {body!r}")
            if h.accept("->"):
                name = h.name()
            elif isinstance(source, Attr):
                name = source.name
            else:
                name = f"{source.var}.{source.key}"
            cols.append((source, name))
            if not h.accept(","):
                break
        h.expect("]")
        h.end()
        return (lambda c: Projection(c, tuple(cols))), 1
    if op == "unnest":
        h.expect("[")
        items = []
        while not h.at("]"):
            source = h.operand()
            if not isinstance(source, Prop):
                raise AlgebraParseError(f"unnest needs var.key items in {body!r}")
            h.expect("->")
            items.append((source, h.name()))
            if not h.accept(","):
                break
        h.expect("]")
        h.end()
        return (lambda c: Unnest(c, tuple(items))), 1
    if op == "join":
        h.end()
        return (lambda l, r: NaturalJoin(l, r)), 2
    if op == "join*":
        h.expect("[")
        bounds = h.bounds()
        path_var = h.tail_path()
        h.expect("]")
        h.end()
        return (lambda l, r: TransitiveJoin(l, r, bounds.min, bounds.max, path_var)), 2
    raise AlgebraParseError(f"unknown operator {op!r}")


def parse_algebra(text: str) -> AlgebraExpr:
    """Inverse of :func:`pretty`."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise AlgebraParseError("empty algebra text")

    def parse_at(i: int, indent: int) -> tuple[AlgebraExpr, int]:
        line = lines[i]
        actual = len(line) - len(line.lstrip(" "))
        if actual != indent:
            raise AlgebraParseError(f"line {i + 1}: expected indent {indent}, got {actual}")
        stripped = line.strip()
        m = _HEADER.match(stripped)
        if m is None:
            raise AlgebraParseError(f"line {i + 1}: unknown operator in {stripped!r}")
        build, arity = _parse_header(m.group(1), stripped[m.end():])
        kids = []
        j = i + 1
        for _ in range(arity):
            if j >= len(lines):
                raise AlgebraParseError(f"line {i + 1}: missing operand")
            kid, j = parse_at(j, indent + 2)
            kids.append(kid)
        node = build(*kids)
        if isinstance(node, TransitiveJoin) and not isinstance(node.right, GetEdges):
            raise AlgebraParseError(f"line {i + 1}: join* needs get-edges on the right")
        return node, j

    expr, end = parse_at(0, 0)
    if end != len(lines):
        raise AlgebraParseError(f"line {end + 1}: unexpected trailing operator")
    return expr
