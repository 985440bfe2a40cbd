"""Compilation passes: query AST -> GRA -> NRA -> FRA.

``compile_to_gra`` maps the pattern onto get-vertices/expand-out,
``expand_to_joins`` replaces expands with (transitive) joins and turns
property accesses into attribute-specific unnests, and
``push_down_properties`` moves those unnests into the base operators so each
one requests exactly the properties the query consumes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterable

from grapevine.algebra_ir import (
    AlgebraExpr,
    Bounds,
    Dialect,
    ExpandOut,
    GetEdges,
    GetVertices,
    NaturalJoin,
    Projection,
    Selection,
    TransitiveJoin,
    Unnest,
    dialect_of,
    schema_of,
    walk,
)
from grapevine.query_frontend import QueryAst, parse
from grapevine.terms import Attr, Comparison, Literal, Operand, Prop


class AmbiguousBinding(Exception):
    def __init__(self, var: str, binders: int) -> None:
        super().__init__(f"variable {var!r} is bound by {binders} base operators, expected 1")
        self.var = var
        self.binders = binders


_SYMMETRIC = ("=", "<>")


def _operand_key(operand: Operand) -> tuple:
    if isinstance(operand, Literal):
        return (1, type(operand.value).__name__, repr(operand.value))
    return (0, str(operand))


def canonical_comparison(comparison: Comparison) -> Comparison:
    """Order the operands of ``=``/``<>`` deterministically (references first, then by text)."""
    if comparison.op in _SYMMETRIC and _operand_key(comparison.right) < _operand_key(comparison.left):
        return Comparison(comparison.right, comparison.op, comparison.left)
    return comparison


# -- step 1 ----------------------------------------------------------------


def _fresh_names(used: set[str], prefix: str) -> Iterable[str]:
    i = 0
    while True:
        name = f"_{prefix}{i}"
        i += 1
        if name not in used:
            used.add(name)
            yield name


def compile_to_gra(ast: QueryAst) -> AlgebraExpr:
    pattern = ast.match
    used = set(ast.bound_variables())
    vertex_names = _fresh_names(used, "v")
    node_vars = [n.var if n.var is not None else next(vertex_names) for n in pattern.nodes]

    first = pattern.nodes[0]
    expr: AlgebraExpr = GetVertices(node_vars[0], first.label)
    path_var = pattern.path_binding
    for i, edge in enumerate(pattern.edges):
        target = pattern.nodes[i + 1]
        length = Bounds(edge.min, edge.max) if edge.variable_length else None
        expr = ExpandOut(
            expr,
            from_var=node_vars[i],
            to_var=node_vars[i + 1],
            to_label=target.label,
            edge_type=edge.type,
            edge_var=edge.var,
            length=length,
            path_var=path_var,
        )
    if ast.where:
        expr = Selection(expr, tuple(canonical_comparison(c) for c in ast.where))
    columns = tuple((item.expr, item.name) for item in ast.returns)
    expr = Projection(expr, columns)
    schema_of(expr)
    return expr


# -- step 2 ----------------------------------------------------------------


def label_of(expr: AlgebraExpr, var: str) -> str | None:
    """Label constraint under which ``var`` was bound inside ``expr``."""
    for node in walk(expr):
        if isinstance(node, GetVertices) and node.var == var:
            return node.label
        if isinstance(node, ExpandOut) and node.to_var == var:
            return node.to_label
        if isinstance(node, GetEdges):
            if node.tgt_var == var:
                return node.tgt_label
    return None


@dataclass
class _Unnesting:
    used: set[str]
    # (var, key) -> attribute already unnested somewhere below
    available: dict[tuple[str, str], str]

    def fresh(self, prop: Prop) -> str:
        stem = prop.var + prop.key[:1].upper()
        candidates = [stem, prop.var + prop.key[:1].upper() + prop.key[1:]]
        for name in candidates:
            if name not in self.used:
                self.used.add(name)
                return name
        i = 2
        while f"{stem}{i}" in self.used:
            i += 1
        self.used.add(f"{stem}{i}")
        return f"{stem}{i}"

    def resolve(self, operands: Iterable[Operand]) -> tuple[list[tuple[Prop, str]], dict[Prop, str]]:
        items: list[tuple[Prop, str]] = []
        mapping: dict[Prop, str] = {}
        for operand in operands:
            if not isinstance(operand, Prop) or operand in mapping:
                continue
            key = (operand.var, operand.key)
            if key in self.available:
                mapping[operand] = self.available[key]
            else:
                name = self.fresh(operand)
                mapping[operand] = name
                self.available[key] = name
                items.append((operand, name))
        return items, mapping


def _replace(operand: Operand, mapping: dict[Prop, str]) -> Operand:
    if isinstance(operand, Prop):
        return Attr(mapping[operand])
    return operand


def _all_names(expr: AlgebraExpr) -> set[str]:
    names: set[str] = set()
    for node in walk(expr):
        for f in dataclasses.fields(node):
            value = getattr(node, f.name)
            if isinstance(value, str):
                names.add(value)
        if isinstance(node, Projection):
            names.update(name for _, name in node.columns)
        if isinstance(node, Unnest):
            names.update(name for _, name in node.items)
        if isinstance(node, GetVertices):
            names.update(a for _, a in node.props)
        if isinstance(node, GetEdges):
            names.update(a for _, a in node.src_props + node.edge_props + node.tgt_props)
    return names


def expand_to_joins(gra: AlgebraExpr) -> AlgebraExpr:
    state = _Unnesting(_all_names(gra), {})
    return _to_joins(gra, state)


def _to_joins(expr: AlgebraExpr, state: _Unnesting) -> AlgebraExpr:
    if isinstance(expr, ExpandOut):
        child = _to_joins(expr.child, state)
        edges = GetEdges(
            src_var=expr.from_var,
            src_label=label_of(child, expr.from_var),
            edge_var=expr.edge_var,
            edge_type=expr.edge_type,
            tgt_var=expr.to_var,
            tgt_label=expr.to_label,
        )
        if expr.length is None and expr.path_var is None:
            return NaturalJoin(child, edges)
        bounds = expr.length or Bounds(1, 1)
        return TransitiveJoin(child, edges, bounds.min, bounds.max, expr.path_var)

    if isinstance(expr, Selection):
        child = _to_joins(expr.child, state)
        items, mapping = state.resolve(o for c in expr.predicate for o in c.operands())
        if items:
            child = Unnest(child, tuple(items))
        predicate = tuple(
            Comparison(_replace(c.left, mapping), c.op, _replace(c.right, mapping))
            for c in expr.predicate
        )
        return Selection(child, predicate)

    if isinstance(expr, Projection):
        child = _to_joins(expr.child, state)
        items, mapping = state.resolve(src for src, _ in expr.columns)
        if items:
            child = Unnest(child, tuple(items))
        columns = tuple((_replace(src, mapping), name) for src, name in expr.columns)
        return Projection(child, columns)

    if isinstance(expr, Unnest):
        child = _to_joins(expr.child, state)
        for prop, name in expr.items:
            state.available[(prop.var, prop.key)] = name
        return Unnest(child, expr.items)

    if isinstance(expr, NaturalJoin):
        return NaturalJoin(_to_joins(expr.left, state), _to_joins(expr.right, state))

    if isinstance(expr, TransitiveJoin):
        return dataclasses.replace(expr, left=_to_joins(expr.left, state))

    return expr


# -- step 3 ----------------------------------------------------------------


def _binders(expr: AlgebraExpr, var: str) -> list[AlgebraExpr]:
    """Base operators that introduce ``var``; shared join attributes belong to the left side."""
    if isinstance(expr, GetVertices):
        return [expr] if expr.var == var else []
    if isinstance(expr, GetEdges):
        roles = [v for v in (expr.src_var, expr.edge_var, expr.tgt_var) if v == var]
        return [expr] * len(roles)
    if isinstance(expr, (Selection, Unnest, ExpandOut)):
        return _binders(expr.child, var)
    if isinstance(expr, Projection):
        passes = any(isinstance(src, Attr) and src.name == var == name for src, name in expr.columns)
        return _binders(expr.child, var) if passes else []
    if isinstance(expr, NaturalJoin):
        left = _binders(expr.left, var)
        return left if left else _binders(expr.right, var)
    if isinstance(expr, TransitiveJoin):
        left = _binders(expr.left, var)
        if left:
            return left
        ge = expr.right
        return [ge] if var in (ge.tgt_var, ge.edge_var) else []
    return []


def push_down_properties(nra: AlgebraExpr) -> AlgebraExpr:
    requests: dict[int, list[tuple[str, str, str]]] = {}  # id(base) -> (var, key, attr)
    _collect_requests(nra, requests)
    return _strip_unnests(nra, requests)


def _collect_requests(expr: AlgebraExpr, requests: dict[int, list]) -> None:
    if isinstance(expr, Unnest):
        for prop, name in expr.items:
            binders = _binders(expr.child, prop.var)
            if len(binders) != 1:
                raise AmbiguousBinding(prop.var, len(binders))
            requests.setdefault(id(binders[0]), []).append((prop.var, prop.key, name))
    for f in ("child", "left", "right"):
        sub = getattr(expr, f, None)
        if sub is not None:
            _collect_requests(sub, requests)


def _strip_unnests(expr: AlgebraExpr, requests: dict[int, list]) -> AlgebraExpr:
    if isinstance(expr, Unnest):
        return _strip_unnests(expr.child, requests)
    if isinstance(expr, GetVertices):
        extra = tuple((key, name) for _, key, name in requests.get(id(expr), ()))
        return dataclasses.replace(expr, props=expr.props + extra) if extra else expr
    if isinstance(expr, GetEdges):
        mine = requests.get(id(expr), ())
        if not mine:
            return expr
        src = tuple((k, n) for v, k, n in mine if v == expr.src_var)
        edge = tuple((k, n) for v, k, n in mine if v == expr.edge_var)
        tgt = tuple((k, n) for v, k, n in mine if v == expr.tgt_var)
        return dataclasses.replace(
            expr,
            src_props=expr.src_props + src,
            edge_props=expr.edge_props + edge,
            tgt_props=expr.tgt_props + tgt,
        )
    if isinstance(expr, (Selection, Projection, ExpandOut)):
        return dataclasses.replace(expr, child=_strip_unnests(expr.child, requests))
    if isinstance(expr, (NaturalJoin, TransitiveJoin)):
        return dataclasses.replace(
            expr,
            left=_strip_unnests(expr.left, requests),
            right=_strip_unnests(expr.right, requests),
        )
    return expr


# -- whole pipeline --------------------------------------------------------


@dataclass(frozen=True)
class CompiledQuery:
    ast: QueryAst
    gra: AlgebraExpr
    nra: AlgebraExpr
    fra: AlgebraExpr


def compile_query(source: str | QueryAst) -> CompiledQuery:
    ast = parse(source) if isinstance(source, str) else source
    gra = compile_to_gra(ast)
    nra = expand_to_joins(gra)
    fra = push_down_properties(nra)
    assert dialect_of(gra) >= dialect_of(nra) >= dialect_of(fra) == Dialect.FRA
    schema_of(fra)
    return CompiledQuery(ast, gra, nra, fra)


def prop_requests(expr: AlgebraExpr) -> list[tuple[str, str]]:
    """All ``(var, key)`` pairs requested by base operators."""
    out: list[tuple[str, str]] = []
    for node in walk(expr):
        if isinstance(node, GetVertices):
            out += [(node.var, key) for key, _ in node.props]
        elif isinstance(node, GetEdges):
            out += [(node.src_var, key) for key, _ in node.src_props]
            out += [(node.edge_var, key) for key, _ in node.edge_props]
            out += [(node.tgt_var, key) for key, _ in node.tgt_props]
    return out
