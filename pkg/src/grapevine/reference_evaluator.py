"""Brute-force evaluation of algebra trees in any dialect.

Operators are evaluated straight from their definitions over the vertex
relation ``alpha`` and edge relation ``beta``: get-vertices is a selection
and projection of ``alpha``; expand-out, get-edges and the joins are nested
loops over ``beta`` and ``alpha``; variable-length steps enumerate trails
(walks with pairwise-distinct edges) depth first. Nothing here is
incremental and nothing is shared with :mod:`grapevine.ivm_engine` except
:func:`grapevine.values.compare`.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Any, Iterator

from grapevine.algebra_ir import (
    AlgebraExpr,
    ExpandOut,
    GetEdges,
    GetVertices,
    Kind,
    NaturalJoin,
    Projection,
    Schema,
    Selection,
    TransitiveJoin,
    Unnest,
    schema_of,
)
from grapevine.graph_store import PropertyGraph, alpha_relation, beta_relation
from grapevine.terms import Attr, Literal, Operand, Prop
from grapevine.values import MISSING, Path, compare


@dataclass
class Stats:
    """Tuples produced, summed over all operators."""

    tuples: int = 0


class _Relations:
    """``alpha``/``beta`` materialized once per evaluation."""

    def __init__(self, graph: PropertyGraph) -> None:
        self.alpha = alpha_relation(graph)
        self.beta = beta_relation(graph)
        self.vertex_props: dict[int, dict[str, Any]] = {}
        self.vertex_labels: dict[int, set] = defaultdict(set)
        for (vid, label, props), _ in self.alpha.items():
            self.vertex_props[vid] = dict(props)
            self.vertex_labels[vid].add(label)
        self.edge_props: dict[int, dict[str, Any]] = {}
        self.out: dict[int, list[tuple[int, int, str]]] = defaultdict(list)
        for (eid, s, t, etype, props), _ in self.beta.items():
            self.edge_props[eid] = dict(props)
            self.out[s].append((eid, t, etype))
        for edges in self.out.values():
            edges.sort()

    def has_label(self, vid: int, label: str | None) -> bool:
        if vid not in self.vertex_props:
            return False
        return label is None or label in self.vertex_labels[vid]

    def prop(self, kind: Kind, ident: int, key: str) -> Any:
        table = self.vertex_props if kind is Kind.VERTEX else self.edge_props
        return table[ident].get(key, MISSING)


def evaluate(graph: PropertyGraph, expr: AlgebraExpr, stats: Stats | None = None) -> Counter:
    """Result bag of ``expr`` on ``graph`` (tuples ordered as ``schema_of(expr)``)."""
    schema_of(expr)
    return _eval(_Relations(graph), expr, stats if stats is not None else Stats())


def _eval(rel: _Relations, expr: AlgebraExpr, stats: Stats) -> Counter:
    out = _EVAL[type(expr)](rel, expr, stats)
    stats.tuples += len(out)
    return out


def _get_vertices(rel: _Relations, expr: GetVertices, stats: Stats) -> Counter:
    out: Counter = Counter()
    seen: set[int] = set()
    for (vid, label, props), m in rel.alpha.items():
        if expr.label is None:
            # one row per vertex, whatever its label count
            if vid in seen:
                continue
            seen.add(vid)
            m = 1
        elif label != expr.label:
            continue
        pmap = dict(props)
        row = (vid,) + tuple(pmap.get(key, MISSING) for key, _ in expr.props)
        out[row] += m
    return out


def _endpoint(rel: _Relations, vid: int, label: str | None, props) -> tuple | None:
    if not rel.has_label(vid, label):
        return None
    return tuple(rel.vertex_props[vid].get(key, MISSING) for key, _ in props)


def _get_edges(rel: _Relations, expr: GetEdges, stats: Stats) -> Counter:
    out: Counter = Counter()
    for (eid, s, t, etype, props), m in rel.beta.items():
        if expr.edge_type is not None and etype != expr.edge_type:
            continue
        src = _endpoint(rel, s, expr.src_label, expr.src_props)
        tgt = _endpoint(rel, t, expr.tgt_label, expr.tgt_props)
        if src is None or tgt is None:
            continue
        pmap = dict(props)
        head = (s, eid, t) if expr.edge_var is not None else (s, t)
        row = head + src + tuple(pmap.get(k, MISSING) for k, _ in expr.edge_props) + tgt
        out[row] += m
    return out


def _trails(
    rel: _Relations,
    start: int,
    edge_type: str | None,
    min_len: int,
    max_len: int | None,
    forbidden: frozenset[int],
) -> Iterator[tuple[int, ...]]:
    """All trails from ``start`` with min_len..max_len hops avoiding ``forbidden`` edges."""

    def steps(at: int) -> Iterator[tuple[int, int]]:
        for eid, t, etype in rel.out.get(at, ()):
            if edge_type is None or etype == edge_type:
                yield eid, t

    ids = [start]
    used = set(forbidden)
    if min_len <= 0:
        yield tuple(ids)
    if max_len == 0:
        return
    # explicit stack: chains can be longer than the recursion limit
    stack = [steps(start)]
    while stack:
        for eid, t in stack[-1]:
            if eid in used:
                continue
            used.add(eid)
            ids += (eid, t)
            hops = len(stack)
            if hops >= min_len:
                yield tuple(ids)
            if max_len is None or hops < max_len:
                stack.append(steps(t))
            else:
                used.discard(eid)
                del ids[-2:]
            break
        else:
            stack.pop()
            if stack:
                used.discard(ids[-2])
                del ids[-2:]


def _path_value(row: tuple, schema: Schema, path_var: str | None, trail: tuple[int, ...]):
    """(new path or None, whether it replaces an existing path column)."""
    if path_var is None:
        return None, False
    if path_var in schema:
        prefix: Path = row[schema.index(path_var)]
        return Path(prefix.ids + trail[1:]), True
    return Path(trail), False


def _forbidden(row: tuple, schema: Schema, path_var: str | None) -> frozenset[int]:
    if path_var is not None and path_var in schema:
        return frozenset(row[schema.index(path_var)].edges)
    return frozenset()


def _emit_path(row: tuple, schema: Schema, path_var: str | None, trail, extra: tuple) -> tuple:
    path, replaces = _path_value(row, schema, path_var, trail)
    if path is None:
        return row + extra
    if replaces:
        i = schema.index(path_var)
        return row[:i] + (path,) + row[i + 1:] + extra
    return row + extra + (path,)


def _expand_out(rel: _Relations, expr: ExpandOut, stats: Stats) -> Counter:
    child = _eval(rel, expr.child, stats)
    schema = schema_of(expr.child)
    src_i = schema.index(expr.from_var)
    if expr.length is None:
        lo, hi = 1, 1
    else:
        lo, hi = expr.length.min, expr.length.max
    out: Counter = Counter()
    for row, m in child.items():
        start = row[src_i]
        for trail in _trails(rel, start, expr.edge_type, lo, hi, _forbidden(row, schema, expr.path_var)):
            end = trail[-1]
            if not rel.has_label(end, expr.to_label):
                continue
            extra = ((trail[1],) if expr.edge_var is not None else ()) + (end,)
            out[_emit_path(row, schema, expr.path_var, trail, extra)] += m
    return out


def _operand(rel: _Relations, schema: Schema, row: tuple, operand: Operand) -> Any:
    if isinstance(operand, Literal):
        return operand.value
    if isinstance(operand, Attr):
        return row[schema.index(operand.name)]
    ident = row[schema.index(operand.var)]
    return rel.prop(schema.kind(operand.var), ident, operand.key)


def _selection(rel: _Relations, expr: Selection, stats: Stats) -> Counter:
    child = _eval(rel, expr.child, stats)
    schema = schema_of(expr.child)
    out: Counter = Counter()
    for row, m in child.items():
        if all(
            compare(c.op, _operand(rel, schema, row, c.left), _operand(rel, schema, row, c.right))
            for c in expr.predicate
        ):
            out[row] += m
    return out


def _projection(rel: _Relations, expr: Projection, stats: Stats) -> Counter:
    child = _eval(rel, expr.child, stats)
    schema = schema_of(expr.child)
    out: Counter = Counter()
    for row, m in child.items():
        out[tuple(_operand(rel, schema, row, src) for src, _ in expr.columns)] += m
    return out


def _unnest(rel: _Relations, expr: Unnest, stats: Stats) -> Counter:
    child = _eval(rel, expr.child, stats)
    schema = schema_of(expr.child)
    out: Counter = Counter()
    for row, m in child.items():
        out[row + tuple(_operand(rel, schema, row, p) for p, _ in expr.items)] += m
    return out


def _natural_join(rel: _Relations, expr: NaturalJoin, stats: Stats) -> Counter:
    left = _eval(rel, expr.left, stats)
    right = _eval(rel, expr.right, stats)
    ls, rs = schema_of(expr.left), schema_of(expr.right)
    shared = [n for n in rs.names if n in ls]
    li = [ls.index(n) for n in shared]
    ri = [rs.index(n) for n in shared]
    keep = [i for i, n in enumerate(rs.names) if n not in ls]
    out: Counter = Counter()
    for lrow, lm in left.items():
        for rrow, rm in right.items():
            if all(lrow[a] == rrow[b] for a, b in zip(li, ri)):
                out[lrow + tuple(rrow[i] for i in keep)] += lm * rm
    return out


def _transitive_join(rel: _Relations, expr: TransitiveJoin, stats: Stats) -> Counter:
    left = _eval(rel, expr.left, stats)
    schema = schema_of(expr.left)
    ge = expr.right
    src_i = schema.index(ge.src_var)
    out: Counter = Counter()
    for row, m in left.items():
        start = row[src_i]
        src = _endpoint(rel, start, ge.src_label, ge.src_props)
        if src is None:
            continue
        forbidden = _forbidden(row, schema, expr.path_var)
        for trail in _trails(rel, start, ge.edge_type, expr.min, expr.max, forbidden):
            end = trail[-1]
            tgt = _endpoint(rel, end, ge.tgt_label, ge.tgt_props)
            if tgt is None:
                continue
            extra: tuple = ()
            edge_props: tuple = ()
            if ge.edge_var is not None:
                extra = (trail[1],)
                edge_props = tuple(rel.edge_props[trail[1]].get(k, MISSING) for k, _ in ge.edge_props)
            extra += (end,) + src + edge_props + tgt
            out[_emit_path(row, schema, expr.path_var, trail, extra)] += m
    return out


_EVAL = {
    GetVertices: _get_vertices,
    GetEdges: _get_edges,
    ExpandOut: _expand_out,
    Selection: _selection,
    Projection: _projection,
    Unnest: _unnest,
    NaturalJoin: _natural_join,
    TransitiveJoin: _transitive_join,
}
