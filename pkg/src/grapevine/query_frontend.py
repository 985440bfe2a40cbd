"""Parser for the supported openCypher fragment.

Supported::

    MATCH [path =] (a[:Label])-[[r][:TYPE][*[min][..[max]]]]->(b[:Label])...
    [WHERE cmp AND cmp ...]
    RETURN item [AS name], ...

Constructs outside the fragment raise :class:`UnsupportedFeature` naming the
construct; malformed input raises :class:`CypherSyntaxError` with a 1-based
line and column.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from grapevine.terms import Attr, Comparison, Literal, Operand, Prop, format_literal, is_identifier


class QueryError(Exception):
    pass


class CypherSyntaxError(QueryError):
    def __init__(self, line: int, column: int, message: str) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class UnsupportedFeature(QueryError):
    def __init__(self, construct: str, line: int | None = None, column: int | None = None) -> None:
        where = f" at {line}:{column}" if line is not None else ""
        super().__init__(f"unsupported feature: {construct}{where}")
        self.construct = construct
        self.line = line
        self.column = column


class SemanticError(QueryError):
    pass


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class PatternNode:
    var: str | None
    label: str | None = None


@dataclass(frozen=True)
class PatternEdge:
    var: str | None = None
    type: str | None = None
    min: int = 1
    max: int | None = 1
    variable_length: bool = False


@dataclass(frozen=True)
class PatternGraph:
    nodes: tuple[PatternNode, ...]
    edges: tuple[PatternEdge, ...] = ()
    path_binding: str | None = None


@dataclass(frozen=True)
class ReturnItem:
    expr: Attr | Prop
    alias: str | None = None

    @property
    def name(self) -> str:
        if self.alias is not None:
            return self.alias
        if isinstance(self.expr, Attr):
            return self.expr.name
        return f"{self.expr.var}.{self.expr.key}"


@dataclass(frozen=True)
class QueryAst:
    match: PatternGraph
    where: tuple[Comparison, ...] = ()
    returns: tuple[ReturnItem, ...] = field(default=())

    def bound_variables(self) -> list[str]:
        names = [n.var for n in self.match.nodes if n.var is not None]
        names += [e.var for e in self.match.edges if e.var is not None]
        if self.match.path_binding is not None:
            names.append(self.match.path_binding)
        return names


# -- tokenizer -------------------------------------------------------------

KEYWORDS = {
    "MATCH", "WHERE", "RETURN", "AS", "AND", "OR", "NOT", "XOR", "TRUE", "FALSE", "NULL",
    "OPTIONAL", "WITH", "SKIP", "LIMIT", "ORDER", "BY", "UNWIND", "DISTINCT", "CREATE",
    "MERGE", "DELETE", "DETACH", "SET", "REMOVE", "CALL", "UNION", "IN", "IS", "CASE",
    "STARTS", "ENDS", "CONTAINS", "ASC", "DESC", "ASCENDING", "DESCENDING", "FOREACH",
    "LOAD", "USING", "EXISTS",
}
AGGREGATES = {"count", "sum", "avg", "min", "max", "collect", "stdev", "stdevp",
              "percentilecont", "percentiledisc"}
UPDATING = {"CREATE", "MERGE", "DELETE", "DETACH", "SET", "REMOVE", "FOREACH", "LOAD", "CALL"}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|/\*.*?\*/)
  | (?P<float>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<str>'(?:[^'\\\n]|\\.)*'|"(?:[^"\\\n]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<quoted>`(?:[^`]|``)+`)
  | (?P<op>->|<-|<>|<=|>=|\.\.|!=|[-=<>()\[\]{}:,.*+/%|$^;!])
    """,
    re.VERBOSE | re.DOTALL,
)
_ESCAPES = {"n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f",
            "\\": "\\", "'": "'", '"': '"'}


@dataclass(frozen=True)
class Token:
    kind: str  # name, quoted, keyword, int, float, str, op, eof
    text: str
    value: object
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        column = pos - line_start + 1
        if m is None:
            raise CypherSyntaxError(line, column, f"unexpected character {text[pos]!r}")
        kind, raw = m.lastgroup, m.group()
        if kind != "ws":
            if kind == "name" and raw.upper() in KEYWORDS:
                tokens.append(Token("keyword", raw, raw.upper(), line, column))
            elif kind == "quoted":
                tokens.append(Token("name", raw, raw[1:-1].replace("``", "`"), line, column))
            elif kind == "int":
                tokens.append(Token(kind, raw, int(raw), line, column))
            elif kind == "float":
                tokens.append(Token(kind, raw, float(raw), line, column))
            elif kind == "str":
                tokens.append(Token(kind, raw, _unescape(raw, line, column), line, column))
            else:
                tokens.append(Token(kind, raw, raw, line, column))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + raw.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", None, line, pos - line_start + 1))
    return tokens


def _unescape(raw: str, line: int, column: int) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            nxt = body[i + 1]
            if nxt not in _ESCAPES:
                raise CypherSyntaxError(line, column + i + 1, f"invalid escape \\{nxt}")
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


# -- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str) -> None:
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None) -> CypherSyntaxError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return CypherSyntaxError(tok.line, tok.column, f"{message}, found {found}")

    def unsupported(self, construct: str, tok: Token | None = None) -> UnsupportedFeature:
        tok = tok or self.tok
        return UnsupportedFeature(construct, tok.line, tok.column)

    def is_op(self, text: str, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "op" and tok.text == text

    def is_kw(self, word: str, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "keyword" and tok.value == word

    def expect_op(self, text: str) -> Token:
        if not self.is_op(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        if not self.is_kw(word):
            raise self.error(f"expected {word}")
        return self.advance()

    def identifier(self, what: str) -> str:
        if self.tok.kind != "name":
            raise self.error(f"expected {what}")
        return self.advance().value

    def symbolic_name(self, what: str) -> str:
        # labels, types and property keys may reuse keywords
        if self.tok.kind in ("name", "keyword"):
            tok = self.advance()
            return tok.value if tok.kind == "name" else tok.text
        raise self.error(f"expected {what}")

    # query := MATCH pattern [WHERE conj] RETURN items
    def query(self) -> QueryAst:
        self.leading_clause()
        self.expect_kw("MATCH")
        pattern = self.pattern()
        if self.is_op(","):
            raise self.unsupported("multiple comma-separated patterns")
        where: tuple[Comparison, ...] = ()
        if self.is_kw("WHERE"):
            self.advance()
            where = self.conjunction()
        self.clause_boundary()
        self.expect_kw("RETURN")
        if self.is_kw("DISTINCT"):
            raise self.unsupported("DISTINCT")
        returns = self.return_items()
        self.trailing()
        return QueryAst(pattern, where, returns)

    def leading_clause(self) -> None:
        tok = self.tok
        if self.is_kw("OPTIONAL"):
            raise self.unsupported("OPTIONAL MATCH")
        for word in ("WITH", "UNWIND", "RETURN"):
            if self.is_kw(word):
                construct = "RETURN without MATCH" if word == "RETURN" else word
                raise self.unsupported(construct)
        if tok.kind == "keyword" and tok.value in UPDATING:
            raise self.unsupported(f"updating clause {tok.value}")

    def clause_boundary(self) -> None:
        tok = self.tok
        if self.is_kw("MATCH"):
            raise self.unsupported("multiple MATCH clauses")
        if self.is_kw("OPTIONAL"):
            raise self.unsupported("OPTIONAL MATCH")
        for word in ("WITH", "UNWIND", "ORDER", "SKIP", "LIMIT"):
            if self.is_kw(word):
                raise self.unsupported("ORDER BY" if word == "ORDER" else word)
        if tok.kind == "keyword" and tok.value in UPDATING:
            raise self.unsupported(f"updating clause {tok.value}")
        if self.is_kw("OR") or self.is_kw("XOR"):
            raise self.unsupported(tok.value)

    def trailing(self) -> None:
        if self.is_kw("ORDER"):
            raise self.unsupported("ORDER BY")
        for word in ("SKIP", "LIMIT", "UNION", "WITH", "UNWIND", "MATCH"):
            if self.is_kw(word):
                construct = "multiple MATCH clauses" if word == "MATCH" else word
                raise self.unsupported(construct)
        if self.is_op(";"):
            self.advance()
        if self.tok.kind != "eof":
            raise self.error("expected end of query")

    # pattern := [name =] node (edge node)*
    def pattern(self) -> PatternGraph:
        path = None
        if self.tok.kind == "name" and self.is_op("=", self.peek()):
            path = self.advance().value
            self.advance()
        nodes = [self.node()]
        edges = []
        while self.is_op("-") or self.is_op("<-"):
            edges.append(self.edge())
            nodes.append(self.node())
        if path is not None and not edges:
            raise self.unsupported("path binding without relationships")
        return PatternGraph(tuple(nodes), tuple(edges), path)

    def node(self) -> PatternNode:
        self.expect_op("(")
        var = self.identifier("variable") if self.tok.kind == "name" else None
        label = None
        if self.is_op(":"):
            self.advance()
            label = self.symbolic_name("label")
            if self.is_op(":"):
                raise self.unsupported("multiple labels in a pattern node")
        if self.is_op("{"):
            raise self.unsupported("inline property map")
        if self.is_kw("WHERE"):
            raise self.unsupported("inline WHERE in pattern")
        self.expect_op(")")
        return PatternNode(var, label)

    def edge(self) -> PatternEdge:
        if self.is_op("<-"):
            raise self.unsupported("incoming relationship")
        self.expect_op("-")
        var = rtype = None
        min_len, max_len, variable = 1, 1, False
        if self.is_op("["):
            self.advance()
            if self.tok.kind == "name":
                var = self.advance().value
            if self.is_op(":"):
                self.advance()
                rtype = self.symbolic_name("relationship type")
                if self.is_op("|"):
                    raise self.unsupported("relationship type alternatives")
            if self.is_op("*"):
                star = self.advance()
                variable = True
                min_len, max_len = self.length_range()
                if min_len < 1:
                    raise self.unsupported("zero-length relationship", star)
                if var is not None:
                    raise self.unsupported("variable bound to a variable-length relationship", star)
            if self.is_op("{"):
                raise self.unsupported("inline property map")
            self.expect_op("]")
        # "-->" and "]->" both end in a single '->' token
        if self.is_op("->"):
            self.advance()
        elif self.is_op("-"):
            raise self.unsupported("undirected relationship")
        else:
            raise self.error("expected '->'")
        return PatternEdge(var, rtype, min_len, max_len, variable)

    def length_range(self) -> tuple[int, int | None]:
        low: int | None = None
        high: int | None = None
        if self.tok.kind == "int":
            low = self.advance().value
        if self.is_op(".."):
            self.advance()
            if self.tok.kind == "int":
                high = self.advance().value
            if low is None:
                low = 1
        elif low is not None:
            high = low
        else:
            low = 1
        if high is not None and high < low:
            raise self.error("relationship length upper bound below lower bound")
        return low, high

    def conjunction(self) -> tuple[Comparison, ...]:
        comparisons = [self.comparison()]
        while True:
            if self.is_kw("AND"):
                self.advance()
                comparisons.append(self.comparison())
            elif self.is_kw("OR") or self.is_kw("XOR"):
                raise self.unsupported(self.tok.value)
            else:
                return tuple(comparisons)

    def comparison(self) -> Comparison:
        if self.is_kw("NOT"):
            raise self.unsupported("NOT")
        if self.is_op("("):
            raise self.unsupported("parenthesized predicate")
        left = self.operand()
        tok = self.tok
        if tok.kind == "op" and tok.text in ("=", "<>", "<", "<=", ">", ">="):
            self.advance()
        elif tok.kind == "op" and tok.text == "!=":
            raise self.error("'!=' is not an openCypher operator (use '<>')")
        elif tok.kind == "keyword" and tok.value in ("IN", "IS", "STARTS", "ENDS", "CONTAINS"):
            raise self.unsupported(f"{tok.value} predicate")
        elif tok.kind == "op" and tok.text in ("+", "-", "*", "/", "%", "^"):
            raise self.unsupported("arithmetic expression")
        else:
            raise self.error("expected a comparison operator")
        right = self.operand()
        if self.tok.kind == "op" and self.tok.text in ("=", "<>", "<", "<=", ">", ">="):
            raise self.unsupported("chained comparison")
        if self.tok.kind == "op" and self.tok.text in ("+", "-", "*", "/", "%", "^"):
            raise self.unsupported("arithmetic expression")
        return Comparison(left, tok.text, right)

    def operand(self) -> Operand:
        tok = self.tok
        if tok.kind in ("int", "float", "str"):
            self.advance()
            return Literal(tok.value)
        if self.is_op("-") and self.peek().kind in ("int", "float"):
            self.advance()
            return Literal(-self.advance().value)
        if self.is_kw("TRUE") or self.is_kw("FALSE"):
            self.advance()
            return Literal(tok.value == "TRUE")
        if self.is_kw("NULL"):
            raise self.unsupported("null literal")
        if self.is_op("$"):
            raise self.unsupported("query parameter")
        if self.is_op("["):
            raise self.unsupported("list literal")
        if self.is_op("{"):
            raise self.unsupported("map literal")
        if tok.kind == "keyword" and tok.value in ("CASE", "EXISTS"):
            raise self.unsupported(tok.value)
        if tok.kind == "name":
            if self.is_op("(", self.peek()):
                raise self.function_call(tok)
            var = self.advance().value
            if not self.is_op("."):
                raise self.error("comparison operands must be variable.property or a literal")
            self.advance()
            key = self.symbolic_name("property key")
            if self.is_op("."):
                raise self.unsupported("nested property access")
            return Prop(var, key)
        raise self.error("expected an operand")

    def function_call(self, tok: Token) -> UnsupportedFeature:
        if tok.value.lower() in AGGREGATES:
            return self.unsupported(f"aggregation function {tok.value}", tok)
        return self.unsupported(f"function call {tok.value}", tok)

    def return_items(self) -> tuple[ReturnItem, ...]:
        items = [self.return_item()]
        while self.is_op(","):
            self.advance()
            items.append(self.return_item())
        return tuple(items)

    def return_item(self) -> ReturnItem:
        tok = self.tok
        if self.is_op("*"):
            raise self.unsupported("RETURN *")
        if self.is_op("["):
            raise self.unsupported("list literal in RETURN")
        if self.is_op("{"):
            raise self.unsupported("map literal in RETURN")
        if tok.kind in ("int", "float", "str") or self.is_kw("TRUE") or self.is_kw("FALSE") \
                or self.is_kw("NULL"):
            raise self.unsupported("literal in RETURN")
        if tok.kind == "keyword" and tok.value in ("CASE", "EXISTS", "DISTINCT"):
            raise self.unsupported(tok.value)
        if tok.kind != "name":
            raise self.error("expected a return item")
        if self.is_op("(", self.peek()):
            raise self.function_call(tok)
        var = self.advance().value
        expr: Attr | Prop = Attr(var)
        if self.is_op("."):
            self.advance()
            expr = Prop(var, self.symbolic_name("property key"))
            if self.is_op("."):
                raise self.unsupported("nested property access")
        if self.tok.kind == "op" and self.tok.text in ("+", "-", "*", "/", "%", "^"):
            raise self.unsupported("arithmetic expression")
        if self.is_op("["):
            raise self.unsupported("list indexing")
        alias = None
        if self.is_kw("AS"):
            self.advance()
            alias = self.identifier("alias")
        return ReturnItem(expr, alias)


def _check_semantics(ast: QueryAst) -> None:
    seen: set[str] = set()
    for name in ast.bound_variables():
        if name in seen:
            raise SemanticError(f"variable {name!r} is bound more than once")
        seen.add(name)
    path = ast.match.path_binding
    refs: list[Attr | Prop] = [o for c in ast.where for o in c.operands() if not isinstance(o, Literal)]
    refs += [item.expr for item in ast.returns]
    for ref in refs:
        var = ref.name if isinstance(ref, Attr) else ref.var
        if var not in seen:
            raise SemanticError(f"variable {var!r} is not bound in MATCH")
        if isinstance(ref, Prop) and var == path:
            raise SemanticError(f"path variable {var!r} has no properties")
    names: set[str] = set()
    for item in ast.returns:
        if item.name in names:
            raise SemanticError(f"duplicate return column {item.name!r}")
        names.add(item.name)


def parse(text: str) -> QueryAst:
    """Parse query text into a :class:`QueryAst`.

    Raises :class:`CypherSyntaxError`, :class:`UnsupportedFeature` or
    :class:`SemanticError`; never anything else.
    """
    try:
        ast = _Parser(text).query()
    except RecursionError:
        raise CypherSyntaxError(1, 1, "query nesting too deep") from None
    _check_semantics(ast)
    return ast


# -- formatting ------------------------------------------------------------


def _q(name: str) -> str:
    if is_identifier(name) and name.upper() not in KEYWORDS:
        return name
    return "`" + name.replace("`", "``") + "`"


def _format_node(node: PatternNode) -> str:
    inner = "" if node.var is None else _q(node.var)
    if node.label is not None:
        inner += ":" + _q(node.label)
    return f"({inner})"


def _format_edge(edge: PatternEdge) -> str:
    inner = "" if edge.var is None else _q(edge.var)
    if edge.type is not None:
        inner += ":" + _q(edge.type)
    if edge.variable_length:
        if edge.max is None:
            inner += "*" if edge.min == 1 else f"*{edge.min}.."
        elif edge.min == edge.max:
            inner += f"*{edge.min}"
        else:
            inner += f"*{edge.min}..{edge.max}"
    return f"-[{inner}]->"


def _format_operand(operand: Operand) -> str:
    if isinstance(operand, Literal):
        return format_literal(operand.value)
    if isinstance(operand, Attr):
        return _q(operand.name)
    return f"{_q(operand.var)}.{_q(operand.key)}"


def format_query(ast: QueryAst) -> str:
    """Render an AST back to query text that re-parses to an equal AST."""
    parts = [_format_node(ast.match.nodes[0])]
    for edge, node in zip(ast.match.edges, ast.match.nodes[1:]):
        parts.append(_format_edge(edge))
        parts.append(_format_node(node))
    pattern = "".join(parts)
    if ast.match.path_binding is not None:
        pattern = f"{_q(ast.match.path_binding)} = {pattern}"
    text = f"MATCH {pattern}"
    if ast.where:
        text += " WHERE " + " AND ".join(
            f"{_format_operand(c.left)} {c.op} {_format_operand(c.right)}" for c in ast.where
        )
    items = []
    for item in ast.returns:
        rendered = _format_operand(item.expr)
        if item.alias is not None:
            rendered += f" AS {_q(item.alias)}"
        items.append(rendered)
    return text + " RETURN " + ", ".join(items)
