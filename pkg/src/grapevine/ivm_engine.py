"""Incremental maintenance of FRA expressions.

:func:`instantiate` turns an FRA tree into a network of stateful operator
nodes over base operators registered with the graph. Each transaction's base
deltas are pushed bottom-up through the network; every node turns the signed
changes of its inputs into the signed change of its output.

The transitive join keeps every trail (edge-distinct walk) of up to ``max``
hops from each start vertex currently supplied by its left input, indexed by
start vertex, end vertex and contained edge. Inserting an edge ``e = (s, t)``
extends the stored trails ending at ``s`` by ``e`` and then by every trail
from ``t``; deleting ``e`` retracts exactly the trails indexed under ``e``.
"""

from __future__ import annotations

import json
from collections import Counter
from typing import Any, Iterable, Iterator, Mapping

from grapevine.algebra_ir import (
    AlgebraExpr,
    Dialect,
    GetEdges,
    GetVertices,
    Kind,
    NaturalJoin,
    Projection,
    Schema,
    Selection,
    TransitiveJoin,
    dialect_of,
    schema_of,
)
from grapevine.graph_store import (
    DeltaBag,
    NegativeMultiplicity,
    PropertyGraph,
    base_rows,
)
from grapevine.terms import Attr, Literal
from grapevine.values import Path, compare, value_to_json

Delta = dict  # row -> signed multiplicity


def _add(out: Delta, row: tuple, m: int) -> None:
    total = out.get(row, 0) + m
    if total:
        out[row] = total
    else:
        out.pop(row, None)


def _apply(index: dict[Any, Counter], key: Any, row: tuple, m: int) -> None:
    bucket = index.setdefault(key, Counter())
    total = bucket.get(row, 0) + m
    if total < 0:
        raise NegativeMultiplicity(f"index entry {row!r} would reach {total}")
    if total:
        bucket[row] = total
    else:
        bucket.pop(row, None)
        if not bucket:
            del index[key]


class _Node:
    schema: Schema

    def step(self, deltas: Mapping[int, DeltaBag]) -> Delta:
        raise NotImplementedError


class _Base(_Node):
    def __init__(self, view: ViewHandle, op: GetVertices | GetEdges) -> None:
        self.op = op
        self.schema = schema_of(op)
        self.base_id = view._register(op)
        self.view = view

    def step(self, deltas: Mapping[int, DeltaBag]) -> Delta:
        delta = deltas.get(self.base_id)
        if not delta:
            return {}
        self.view.tuples_processed += len(delta)
        return dict(delta.changes)


def _getter(schema: Schema, operand):
    if isinstance(operand, Literal):
        value = operand.value
        return lambda row: value
    if isinstance(operand, Attr):
        i = schema.index(operand.name)
        return lambda row: row[i]
    raise ValueError(f"{operand} is not a flat operand; compile to FRA first")


class _Select(_Node):
    def __init__(self, view: ViewHandle, child: _Node, expr: Selection) -> None:
        self.child = child
        self.schema = child.schema
        self.view = view
        self.tests = [
            (c.op, _getter(child.schema, c.left), _getter(child.schema, c.right))
            for c in expr.predicate
        ]

    def matches(self, row: tuple) -> bool:
        return all(compare(op, left(row), right(row)) for op, left, right in self.tests)

    def step(self, deltas):
        out = {row: m for row, m in self.child.step(deltas).items() if self.matches(row)}
        self.view.tuples_processed += len(out)
        return out


class _Project(_Node):
    def __init__(self, view: ViewHandle, child: _Node, expr: Projection) -> None:
        self.child = child
        self.view = view
        self.schema = schema_of(expr)
        self.positions = []
        for source, _ in expr.columns:
            if not isinstance(source, Attr):
                raise ValueError(f"projection of {source} is not flat; compile to FRA first")
            self.positions.append(child.schema.index(source.name))

    def step(self, deltas):
        out: Delta = {}
        for row, m in self.child.step(deltas).items():
            _add(out, tuple(row[i] for i in self.positions), m)
        self.view.tuples_processed += len(out)
        return out


class _Join(_Node):
    """Natural join with hash indexes on the shared attributes of both inputs."""

    def __init__(self, view: ViewHandle, left: _Node, right: _Node, expr: NaturalJoin) -> None:
        self.left, self.right, self.view = left, right, view
        self.schema = schema_of(expr)
        ls, rs = left.schema, right.schema
        shared = [n for n in rs.names if n in ls]
        self.lkey = [ls.index(n) for n in shared]
        self.rkey = [rs.index(n) for n in shared]
        self.keep = [i for i, n in enumerate(rs.names) if n not in ls]
        self.left_index: dict[tuple, Counter] = {}
        self.right_index: dict[tuple, Counter] = {}

    def combine(self, lrow: tuple, rrow: tuple) -> tuple:
        return lrow + tuple(rrow[i] for i in self.keep)

    def step(self, deltas):
        dl = self.left.step(deltas)
        dr = self.right.step(deltas)
        out: Delta = {}
        dr_by_key: dict[tuple, list] = {}
        for rrow, rm in dr.items():
            dr_by_key.setdefault(tuple(rrow[i] for i in self.rkey), []).append((rrow, rm))
        # dL x R_old + dL x dR
        for lrow, lm in dl.items():
            key = tuple(lrow[i] for i in self.lkey)
            for rrow, rm in self.right_index.get(key, {}).items():
                _add(out, self.combine(lrow, rrow), lm * rm)
            for rrow, rm in dr_by_key.get(key, ()):
                _add(out, self.combine(lrow, rrow), lm * rm)
        # L_old x dR
        for key, items in dr_by_key.items():
            for lrow, lm in self.left_index.get(key, {}).items():
                for rrow, rm in items:
                    _add(out, self.combine(lrow, rrow), lm * rm)
        for lrow, lm in dl.items():
            _apply(self.left_index, tuple(lrow[i] for i in self.lkey), lrow, lm)
        for rrow, rm in dr.items():
            _apply(self.right_index, tuple(rrow[i] for i in self.rkey), rrow, rm)
        self.view.tuples_processed += len(out)
        return out


class _TransJoin(_Node):
    """Left input joined with every trail of ``right``'s edges from the left's source vertex."""

    def __init__(self, view: ViewHandle, left: _Node, expr: TransitiveJoin) -> None:
        ge = expr.right
        self.left, self.view = left, view
        self.schema = schema_of(expr)
        self.min, self.max = expr.min, expr.max
        self.with_edge = ge.edge_var is not None
        ls = left.schema
        self.src_i = ls.index(ge.src_var)
        self.path_i = ls.index(expr.path_var) if expr.path_var in ls else None
        self.new_path = expr.path_var is not None and self.path_i is None

        # three feeds: the typed edge set and both endpoint vertex scans
        edge_props = tuple((k, f"_ep{i}") for i, (k, _) in enumerate(ge.edge_props))
        self.edge_feed = _Base(view, GetEdges("_s", None, "_e", ge.edge_type, "_t", None,
                                              edge_props=edge_props))
        self.src_feed = _Base(view, GetVertices(
            "_v", ge.src_label, tuple((k, f"_sp{i}") for i, (k, _) in enumerate(ge.src_props))))
        self.tgt_feed = _Base(view, GetVertices(
            "_v", ge.tgt_label, tuple((k, f"_tp{i}") for i, (k, _) in enumerate(ge.tgt_props))))

        self.lefts: dict[int, Counter] = {}  # start vertex -> left rows
        self.src_rows: dict[int, Counter] = {}  # vertex -> source property rows
        self.tgt_rows: dict[int, Counter] = {}
        self.edges: dict[int, tuple[int, int, tuple]] = {}  # edge -> (s, t, props)
        self.out_adj: dict[int, dict[int, int]] = {}  # vertex -> {edge: target}

        self.walks: dict[int, tuple[int, tuple[int, ...]]] = {}  # id -> (start, ids)
        self.by_start: dict[int, set[int]] = {}
        self.by_end: dict[int, set[int]] = {}
        self.by_edge: dict[int, set[int]] = {}
        self._next_walk = 0

    # -- trail bookkeeping ------------------------------------------------

    def _extensions(self, prefix: tuple[int, ...], used: set[int]) -> Iterator[tuple[int, ...]]:
        """``prefix`` and each trail continuing it, up to ``max`` hops in total."""
        yield prefix
        hops0 = len(prefix) // 2
        if self.max is not None and hops0 >= self.max:
            return
        ids = list(prefix)
        frames = [list(self.out_adj.get(prefix[-1], {}).items())]
        cursors = [0]
        while frames:
            frame, k = frames[-1], cursors[-1]
            if k == len(frame):
                frames.pop()
                cursors.pop()
                if frames:
                    used.discard(ids[-2])
                    del ids[-2:]
                continue
            cursors[-1] = k + 1
            eid, t = frame[k]
            if eid in used:
                continue
            used.add(eid)
            ids += (eid, t)
            yield tuple(ids)
            if self.max is None or hops0 + len(frames) < self.max:
                frames.append(list(self.out_adj.get(t, {}).items()))
                cursors.append(0)
            else:
                used.discard(eid)
                del ids[-2:]

    def _register_walk(self, start: int, ids: tuple[int, ...]) -> int:
        wid = self._next_walk
        self._next_walk += 1
        self.walks[wid] = (start, ids)
        self.by_start.setdefault(start, set()).add(wid)
        self.by_end.setdefault(ids[-1], set()).add(wid)
        for eid in ids[1::2]:
            self.by_edge.setdefault(eid, set()).add(wid)
        return wid

    def _drop_walk(self, wid: int) -> None:
        start, ids = self.walks.pop(wid)
        for index, key in [(self.by_start, start), (self.by_end, ids[-1])] + [
            (self.by_edge, eid) for eid in ids[1::2]
        ]:
            bucket = index.get(key)
            if bucket is not None:
                bucket.discard(wid)
                if not bucket:
                    del index[key]

    def _track(self, start: int) -> None:
        for ids in self._extensions((start,), set()):
            self._register_walk(start, ids)

    def _untrack(self, start: int) -> None:
        for wid in list(self.by_start.get(start, ())):
            self._drop_walk(wid)

    # -- output -----------------------------------------------------------

    def _emit(
        self,
        out: Delta,
        wid: int,
        sign: int,
        lefts: Iterable[tuple[tuple, int]] | None = None,
        srcs: Iterable[tuple[tuple, int]] | None = None,
        tgts: Iterable[tuple[tuple, int]] | None = None,
    ) -> None:
        start, ids = self.walks[wid]
        if len(ids) // 2 < self.min:
            return
        end = ids[-1]
        lefts = list(self.lefts.get(start, {}).items() if lefts is None else lefts)
        srcs = list(self.src_rows.get(start, {}).items() if srcs is None else srcs)
        tgts = list(self.tgt_rows.get(end, {}).items() if tgts is None else tgts)
        if not (lefts and srcs and tgts):
            return
        head: tuple = (ids[1],) if self.with_edge else ()
        head += (end,)
        edge_props = self.edges[ids[1]][2] if self.with_edge else ()
        walk_edges = ids[1::2]
        for lrow, lm in lefts:
            if self.path_i is not None:
                prefix: Path = lrow[self.path_i]
                if not prefix.edges or set(prefix.edges).isdisjoint(walk_edges):
                    path = Path(prefix.ids + ids[1:])
                else:
                    continue
                base = lrow[: self.path_i] + (path,) + lrow[self.path_i + 1:]
            else:
                base = lrow
            for srow, sm in srcs:
                for trow, tm in tgts:
                    row = base + head + srow + edge_props + trow
                    if self.new_path:
                        row += (Path(ids),)
                    _add(out, row, sign * lm * sm * tm)

    # -- propagation ------------------------------------------------------

    def step(self, deltas):
        out: Delta = {}
        # each input is folded in against the already-updated earlier inputs
        for lrow, m in self.left.step(deltas).items():
            start = lrow[self.src_i]
            if start not in self.lefts:
                if m < 0:
                    raise NegativeMultiplicity(f"retracting unseen left row {lrow!r}")
                self.lefts[start] = Counter()
                self._track(start)
            for wid in self.by_start.get(start, ()):
                self._emit(out, wid, 1, lefts=[(lrow, m)])
            _apply(self.lefts, start, lrow, m)
            if start not in self.lefts:
                self._untrack(start)

        edge_delta = self.edge_feed.step(deltas)
        for (s, eid, t, *props), m in sorted(edge_delta.items(), key=lambda kv: kv[1]):
            if m < 0:
                for wid in list(self.by_edge.get(eid, ())):
                    self._emit(out, wid, -1)
                    self._drop_walk(wid)
                del self.edges[eid]
                del self.out_adj[s][eid]
            else:
                self.edges[eid] = (s, t, tuple(props))
                self.out_adj.setdefault(s, {})[eid] = t
                for wid in list(self.by_end.get(s, ())):
                    start, ids = self.walks[wid]
                    if self.max is not None and len(ids) // 2 >= self.max:
                        continue
                    used = set(ids[1::2])
                    used.add(eid)
                    for new_ids in self._extensions(ids + (eid, t), used):
                        self._emit(out, self._register_walk(start, new_ids), 1)

        for (v, *srow), m in self.src_feed.step(deltas).items():
            for wid in self.by_start.get(v, ()):
                self._emit(out, wid, 1, srcs=[(tuple(srow), m)])
            _apply(self.src_rows, v, tuple(srow), m)

        for (w, *trow), m in self.tgt_feed.step(deltas).items():
            for wid in self.by_end.get(w, ()):
                self._emit(out, wid, 1, tgts=[(tuple(trow), m)])
            _apply(self.tgt_rows, w, tuple(trow), m)

        self.view.tuples_processed += len(out)
        return out

    def trail_count(self) -> int:
        return len(self.walks)


class ViewHandle:
    """A materialized, incrementally maintained query result."""

    def __init__(self, graph: PropertyGraph, fra: AlgebraExpr) -> None:
        if dialect_of(fra) is not Dialect.FRA:
            raise ValueError(f"views are built from FRA expressions, got {dialect_of(fra).name}")
        self.graph = graph
        self.expr = fra
        self.schema = schema_of(fra)
        self.base_ids: list[int] = []
        self.tuples_processed = 0
        self.result: Counter = Counter()
        self.root = self._build(fra)

    def _register(self, op: GetVertices | GetEdges) -> int:
        base_id = self.graph.register_base(op)
        self.base_ids.append(base_id)
        return base_id

    def _build(self, expr: AlgebraExpr) -> _Node:
        if isinstance(expr, (GetVertices, GetEdges)):
            return _Base(self, expr)
        if isinstance(expr, Selection):
            return _Select(self, self._build(expr.child), expr)
        if isinstance(expr, Projection):
            return _Project(self, self._build(expr.child), expr)
        if isinstance(expr, NaturalJoin):
            return _Join(self, self._build(expr.left), self._build(expr.right), expr)
        if isinstance(expr, TransitiveJoin):
            return _TransJoin(self, self._build(expr.left), expr)
        raise ValueError(f"cannot maintain {type(expr).__name__} incrementally")

    def close(self) -> None:
        """Stop receiving deltas from the graph."""
        for base_id in self.base_ids:
            self.graph.unregister_base(base_id)
        self.base_ids = []


def instantiate(graph: PropertyGraph, fra: AlgebraExpr) -> ViewHandle:
    """Build the operator network for ``fra`` and evaluate it once in full."""
    view = ViewHandle(graph, fra)
    ops = graph.base_ops
    initial = {
        base_id: DeltaBag(schema_of(ops[base_id]).names, base_rows(graph, ops[base_id]))
        for base_id in view.base_ids
    }
    on_transaction(view, initial)
    return view


def on_transaction(view: ViewHandle, base_deltas: Mapping[int, DeltaBag]) -> DeltaBag:
    """Propagate one transaction's base deltas; returns the change of the view."""
    relevant = {b: base_deltas[b] for b in view.base_ids if b in base_deltas}
    if not relevant:
        return DeltaBag(view.schema.names)
    delta = DeltaBag(view.schema.names, view.root.step(relevant))
    delta.apply_to(view.result)
    return delta


def read_view(view: ViewHandle) -> Counter:
    return Counter(view.result)


def render_row(schema: Schema, row: tuple) -> dict[str, Any]:
    """JSON form of a tuple: vertices and edges as ids, paths as id arrays."""
    return {name: value_to_json(value) for (name, _), value in zip(schema, row)}


def serialize_rows(schema: Schema, rows: Mapping[tuple, int]) -> list[dict[str, Any]]:
    """``{"tuple", "multiplicity"}`` records sorted by their serialized tuple."""
    records = [
        (json.dumps(render_row(schema, row), sort_keys=False), row, m) for row, m in rows.items()
    ]
    records.sort(key=lambda r: r[0])
    return [{"tuple": render_row(schema, row), "multiplicity": m} for _, row, m in records]


def vertex_only(row: tuple, schema: Schema) -> tuple:
    """Replace each path by its vertex sequence (edges omitted)."""
    return tuple(
        value.vertices if kind is Kind.PATH else value for (_, kind), value in zip(schema, row)
    )


__all__ = [
    "ViewHandle",
    "instantiate",
    "on_transaction",
    "read_view",
    "render_row",
    "serialize_rows",
    "vertex_only",
]
