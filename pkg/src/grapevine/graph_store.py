"""Property graph storage, base relations and transactional updates.

The store keeps vertices and edges in dictionaries keyed by their ids and
exposes the nested vertex relation (``alpha``) and edge relation (``beta``).
Base operators (``GetVertices``/``GetEdges`` instances) are registered with
the graph; :func:`apply_transaction` then reports for each of them the signed
change of its output.
"""

from __future__ import annotations

import copy
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Union

from grapevine.algebra_ir import GetEdges, GetVertices, schema_of
from grapevine.values import MISSING, check_value, value_from_json, value_to_json

Row = tuple


class GraphError(Exception):
    pass


class UnknownId(GraphError):
    pass


class DuplicateId(GraphError):
    pass


class DanglingVertexRemoval(GraphError):
    pass


class NegativeMultiplicity(RuntimeError):
    """A delta would drive a multiplicity below zero; always a bug."""


@dataclass
class VertexRecord:
    id: int
    labels: frozenset[str] = frozenset()
    properties: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.labels = frozenset(self.labels)
        for value in self.properties.values():
            check_value(value, allow_path=False)


@dataclass
class EdgeRecord:
    id: int
    source: int
    target: int
    type: str
    properties: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for value in self.properties.values():
            check_value(value, allow_path=False)


# -- update operations -----------------------------------------------------


@dataclass(frozen=True)
class AddVertex:
    vertex: VertexRecord


@dataclass(frozen=True)
class RemoveVertex:
    id: int


@dataclass(frozen=True)
class AddEdge:
    edge: EdgeRecord


@dataclass(frozen=True)
class RemoveEdge:
    id: int


@dataclass(frozen=True)
class SetVertexProperty:
    id: int
    key: str
    value: Any


@dataclass(frozen=True)
class RemoveVertexProperty:
    id: int
    key: str


@dataclass(frozen=True)
class SetEdgeProperty:
    id: int
    key: str
    value: Any


@dataclass(frozen=True)
class RemoveEdgeProperty:
    id: int
    key: str


UpdateOp = Union[
    AddVertex,
    RemoveVertex,
    AddEdge,
    RemoveEdge,
    SetVertexProperty,
    RemoveVertexProperty,
    SetEdgeProperty,
    RemoveEdgeProperty,
]


# -- deltas ----------------------------------------------------------------


class DeltaBag:
    """Signed multiset of tuples over ``schema``; zero entries are dropped."""

    __slots__ = ("schema", "changes")

    def __init__(self, schema: Iterable[str] = (), changes: Mapping[Row, int] | None = None):
        self.schema = tuple(schema)
        self.changes: dict[Row, int] = {}
        if changes:
            for row, m in changes.items():
                self.add(row, m)

    def add(self, row: Row, multiplicity: int) -> None:
        if not multiplicity:
            return
        total = self.changes.get(row, 0) + multiplicity
        if total:
            self.changes[row] = total
        else:
            del self.changes[row]

    def update(self, other: DeltaBag | Mapping[Row, int]) -> None:
        items = other.changes if isinstance(other, DeltaBag) else other
        for row, m in items.items():
            self.add(row, m)

    def negated(self) -> DeltaBag:
        return DeltaBag(self.schema, {row: -m for row, m in self.changes.items()})

    def apply_to(self, bag: Counter) -> None:
        """Add the changes to ``bag`` in place, refusing negative results."""
        for row, m in self.changes.items():
            if bag.get(row, 0) + m < 0:
                raise NegativeMultiplicity(
                    f"tuple {row!r} would reach multiplicity {bag.get(row, 0) + m}"
                )
        for row, m in self.changes.items():
            total = bag.get(row, 0) + m
            if total:
                bag[row] = total
            else:
                bag.pop(row, None)

    @classmethod
    def difference(cls, schema: Iterable[str], new: Mapping[Row, int], old: Mapping[Row, int]) -> DeltaBag:
        delta = cls(schema, new)
        for row, m in old.items():
            delta.add(row, -m)
        return delta

    def items(self):
        return self.changes.items()

    def __len__(self) -> int:
        return len(self.changes)

    def __bool__(self) -> bool:
        return bool(self.changes)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, DeltaBag):
            return self.changes == other.changes
        if isinstance(other, Mapping):
            return self.changes == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        return f"DeltaBag({list(self.schema)}, {self.changes!r})"


# -- the graph -------------------------------------------------------------


BaseOp = Union[GetVertices, GetEdges]


class PropertyGraph:
    def __init__(self) -> None:
        self.vertices: dict[int, VertexRecord] = {}
        self.edges: dict[int, EdgeRecord] = {}
        self._out: dict[int, set[int]] = {}
        self._in: dict[int, set[int]] = {}
        self._base_ops: dict[int, BaseOp] = {}
        self._next_base_id = 0

    # construction helpers, not transactional
    def add_vertex(self, id: int, labels: Iterable[str] = (), **properties: Any) -> VertexRecord:
        _apply_op(self, AddVertex(VertexRecord(id, frozenset(labels), dict(properties))))
        return self.vertices[id]

    def add_edge(self, id: int, source: int, target: int, type: str, **properties: Any) -> EdgeRecord:
        _apply_op(self, AddEdge(EdgeRecord(id, source, target, type, dict(properties))))
        return self.edges[id]

    def out_edges(self, vertex: int) -> set[int]:
        return self._out.get(vertex, set())

    def in_edges(self, vertex: int) -> set[int]:
        return self._in.get(vertex, set())

    def incident_edges(self, vertex: int) -> set[int]:
        return self.out_edges(vertex) | self.in_edges(vertex)

    def has_id(self, id: int) -> bool:
        return id in self.vertices or id in self.edges

    def copy(self) -> PropertyGraph:
        """Deep copy of the data; registered base operators are not copied."""
        clone = PropertyGraph()
        clone.vertices = copy.deepcopy(self.vertices)
        clone.edges = copy.deepcopy(self.edges)
        clone._out = {v: set(es) for v, es in self._out.items()}
        clone._in = {v: set(es) for v, es in self._in.items()}
        return clone

    def register_base(self, op: BaseOp) -> int:
        if not isinstance(op, (GetVertices, GetEdges)):
            raise TypeError(f"only get-vertices/get-edges can be registered, got {op!r}")
        schema_of(op)
        base_id = self._next_base_id
        self._next_base_id += 1
        self._base_ops[base_id] = op
        return base_id

    def unregister_base(self, base_id: int) -> None:
        self._base_ops.pop(base_id, None)

    @property
    def base_ops(self) -> Mapping[int, BaseOp]:
        return dict(self._base_ops)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PropertyGraph):
            return NotImplemented
        return self.vertices == other.vertices and self.edges == other.edges

    def __repr__(self) -> str:
        return f"PropertyGraph({len(self.vertices)} vertices, {len(self.edges)} edges)"


# -- base relations --------------------------------------------------------


def frozen_properties(properties: Mapping[str, Any]) -> tuple[tuple[str, Any], ...]:
    return tuple(sorted(properties.items(), key=lambda kv: kv[0]))


def alpha_relation(graph: PropertyGraph) -> Counter:
    """Rows ``(id, label, properties)``, one per (vertex, label) pair.

    A vertex without labels contributes a single row with label ``None`` so
    that it stays visible to label-free vertex scans.
    """
    rows: Counter = Counter()
    for v in graph.vertices.values():
        props = frozen_properties(v.properties)
        for label in sorted(v.labels) or [None]:
            rows[(v.id, label, props)] += 1
    return rows


def beta_relation(graph: PropertyGraph) -> Counter:
    """Rows ``(id, s, t, type, properties)``, one per edge."""
    rows: Counter = Counter()
    for e in graph.edges.values():
        rows[(e.id, e.source, e.target, e.type, frozen_properties(e.properties))] += 1
    return rows


def _lookup(properties: Mapping[str, Any], requests) -> tuple:
    return tuple(properties.get(key, MISSING) for key, _ in requests)


def vertex_row(graph: PropertyGraph, op: GetVertices, vid: int) -> Row | None:
    v = graph.vertices.get(vid)
    if v is None or (op.label is not None and op.label not in v.labels):
        return None
    return (vid,) + _lookup(v.properties, op.props)


def edge_row(graph: PropertyGraph, op: GetEdges, eid: int) -> Row | None:
    e = graph.edges.get(eid)
    if e is None or (op.edge_type is not None and e.type != op.edge_type):
        return None
    src, tgt = graph.vertices[e.source], graph.vertices[e.target]
    if op.src_label is not None and op.src_label not in src.labels:
        return None
    if op.tgt_label is not None and op.tgt_label not in tgt.labels:
        return None
    head = (e.source, e.id, e.target) if op.edge_var is not None else (e.source, e.target)
    return (
        head
        + _lookup(src.properties, op.src_props)
        + _lookup(e.properties, op.edge_props)
        + _lookup(tgt.properties, op.tgt_props)
    )


def _rows_for(graph: PropertyGraph, op: BaseOp, ids: Iterable[int]) -> Counter:
    rows: Counter = Counter()
    make = vertex_row if isinstance(op, GetVertices) else edge_row
    for id_ in ids:
        row = make(graph, op, id_)
        if row is not None:
            rows[row] += 1
    return rows


def base_rows(graph: PropertyGraph, op: BaseOp) -> Counter:
    """Full output of a base operator, computed directly from the store."""
    ids = graph.vertices if isinstance(op, GetVertices) else graph.edges
    return _rows_for(graph, op, ids)


# -- transactions ----------------------------------------------------------


def _check_new_id(graph: PropertyGraph, id_: int) -> None:
    if not isinstance(id_, int) or isinstance(id_, bool) or id_ < 0:
        raise GraphError(f"ids must be unsigned integers, got {id_!r}")
    if graph.has_id(id_):
        raise DuplicateId(f"id {id_} is already in use")


def _vertex(graph: PropertyGraph, vid: int) -> VertexRecord:
    try:
        return graph.vertices[vid]
    except KeyError:
        raise UnknownId(f"no vertex with id {vid}") from None


def _edge(graph: PropertyGraph, eid: int) -> EdgeRecord:
    try:
        return graph.edges[eid]
    except KeyError:
        raise UnknownId(f"no edge with id {eid}") from None


def _set_prop(props: dict[str, Any], key: str, value: Any):
    check_value(value, allow_path=False)
    old = props.get(key, MISSING)
    props[key] = value
    return old


def _apply_op(graph: PropertyGraph, op: UpdateOp) -> UpdateOp | None:
    """Apply one op and return the op that undoes it (None for a no-op)."""
    if isinstance(op, AddVertex):
        v = op.vertex
        _check_new_id(graph, v.id)
        graph.vertices[v.id] = VertexRecord(v.id, v.labels, dict(v.properties))
        return RemoveVertex(v.id)

    if isinstance(op, RemoveVertex):
        v = _vertex(graph, op.id)
        if graph.incident_edges(op.id):
            raise DanglingVertexRemoval(
                f"vertex {op.id} still has incident edges {sorted(graph.incident_edges(op.id))}"
            )
        del graph.vertices[op.id]
        graph._out.pop(op.id, None)
        graph._in.pop(op.id, None)
        return AddVertex(v)

    if isinstance(op, AddEdge):
        e = op.edge
        _check_new_id(graph, e.id)
        _vertex(graph, e.source)
        _vertex(graph, e.target)
        graph.edges[e.id] = EdgeRecord(e.id, e.source, e.target, e.type, dict(e.properties))
        graph._out.setdefault(e.source, set()).add(e.id)
        graph._in.setdefault(e.target, set()).add(e.id)
        return RemoveEdge(e.id)

    if isinstance(op, RemoveEdge):
        e = _edge(graph, op.id)
        del graph.edges[op.id]
        graph._out[e.source].discard(op.id)
        graph._in[e.target].discard(op.id)
        return AddEdge(e)

    if isinstance(op, (SetVertexProperty, SetEdgeProperty)):
        vertex = isinstance(op, SetVertexProperty)
        record = _vertex(graph, op.id) if vertex else _edge(graph, op.id)
        old = _set_prop(record.properties, op.key, op.value)
        if old is MISSING:
            return (RemoveVertexProperty if vertex else RemoveEdgeProperty)(op.id, op.key)
        return type(op)(op.id, op.key, old)

    if isinstance(op, (RemoveVertexProperty, RemoveEdgeProperty)):
        vertex = isinstance(op, RemoveVertexProperty)
        record = _vertex(graph, op.id) if vertex else _edge(graph, op.id)
        if op.key not in record.properties:
            return None
        old = record.properties.pop(op.key)
        return (SetVertexProperty if vertex else SetEdgeProperty)(op.id, op.key, old)

    raise TypeError(f"not an update operation: {op!r}")


def _apply_all(graph: PropertyGraph, tx: list[UpdateOp]) -> list[UpdateOp]:
    """Apply ``tx`` atomically; returns the inverse transaction."""
    undo: list[UpdateOp] = []
    try:
        for op in tx:
            inverse = _apply_op(graph, op)
            if inverse is not None:
                undo.append(inverse)
    except Exception:
        for inverse in reversed(undo):
            _apply_op(graph, inverse)
        raise
    undo.reverse()
    return undo


def _touched(tx: list[UpdateOp]) -> tuple[set[int], set[int]]:
    vertices: set[int] = set()
    edges: set[int] = set()
    for op in tx:
        if isinstance(op, AddVertex):
            vertices.add(op.vertex.id)
        elif isinstance(op, AddEdge):
            edges.add(op.edge.id)
        elif isinstance(op, (RemoveVertex, SetVertexProperty, RemoveVertexProperty)):
            vertices.add(op.id)
        else:
            edges.add(op.id)
    return vertices, edges


def apply_transaction(graph: PropertyGraph, tx: list[UpdateOp]) -> dict[int, DeltaBag]:
    """Apply ``tx`` as one unit and return the non-empty delta of every registered base operator.

    On the first failing operation the graph is restored and the error
    re-raised.
    """
    if not tx:
        return {}
    touched_v, touched_e = _touched(tx)
    # edges added later in tx are already in touched_e
    affected_e = set(touched_e)
    for vid in touched_v:
        affected_e |= graph.incident_edges(vid)

    def snapshot() -> dict[int, Counter]:
        out = {}
        for base_id, op in graph._base_ops.items():
            ids = touched_v if isinstance(op, GetVertices) else affected_e
            out[base_id] = _rows_for(graph, op, ids)
        return out

    before = snapshot()
    _apply_all(graph, tx)
    after = snapshot()

    deltas = {}
    for base_id, op in graph._base_ops.items():
        delta = DeltaBag.difference(schema_of(op).names, after[base_id], before[base_id])
        if delta:
            deltas[base_id] = delta
    return deltas


def inverse_transaction(graph: PropertyGraph, tx: list[UpdateOp]) -> list[UpdateOp]:
    """The transaction that undoes ``tx`` when applied right after it."""
    return _apply_all(graph.copy(), tx)


# -- JSON-lines I/O --------------------------------------------------------


def _props_from_json(raw: Any) -> dict[str, Any]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ValueError(f"properties must be an object, got {raw!r}")
    return {str(k): value_from_json(v) for k, v in raw.items()}


def _props_to_json(props: Mapping[str, Any]) -> dict[str, Any]:
    return {k: value_to_json(v) for k, v in sorted(props.items())}


def vertex_from_json(raw: Mapping[str, Any]) -> VertexRecord:
    return VertexRecord(
        _int_id(raw["id"]), frozenset(raw.get("labels", ())), _props_from_json(raw.get("properties"))
    )


def edge_from_json(raw: Mapping[str, Any]) -> EdgeRecord:
    return EdgeRecord(
        _int_id(raw["id"]),
        _int_id(raw["source"]),
        _int_id(raw["target"]),
        str(raw["type"]),
        _props_from_json(raw.get("properties")),
    )


def _int_id(raw: Any) -> int:
    if not isinstance(raw, int) or isinstance(raw, bool) or raw < 0:
        raise ValueError(f"ids must be unsigned integers, got {raw!r}")
    return raw


def vertex_to_json(v: VertexRecord) -> dict[str, Any]:
    return {"id": v.id, "labels": sorted(v.labels), "properties": _props_to_json(v.properties)}


def edge_to_json(e: EdgeRecord) -> dict[str, Any]:
    return {
        "id": e.id,
        "source": e.source,
        "target": e.target,
        "type": e.type,
        "properties": _props_to_json(e.properties),
    }


def _json_lines(lines: Iterable[str]) -> Iterator[tuple[int, dict]]:
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(record, dict):
            raise ValueError(f"line {lineno}: expected a JSON object")
        yield lineno, record


def load_graph(lines: Iterable[str]) -> PropertyGraph:
    """Read the JSON-lines graph format; vertices may follow the edges that use them."""
    vertices, edges = [], []
    for lineno, record in _json_lines(lines):
        try:
            if "vertex" in record:
                vertices.append(vertex_from_json(record["vertex"]))
            elif "edge" in record:
                edges.append(edge_from_json(record["edge"]))
            else:
                raise ValueError("expected a 'vertex' or 'edge' record")
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    graph = PropertyGraph()
    _apply_all(graph, [AddVertex(v) for v in vertices] + [AddEdge(e) for e in edges])
    return graph


def dump_graph(graph: PropertyGraph) -> list[str]:
    lines = [json.dumps({"vertex": vertex_to_json(v)}) for _, v in sorted(graph.vertices.items())]
    lines += [json.dumps({"edge": edge_to_json(e)}) for _, e in sorted(graph.edges.items())]
    return lines


_OP_NAMES = {
    AddVertex: "add_vertex",
    RemoveVertex: "remove_vertex",
    AddEdge: "add_edge",
    RemoveEdge: "remove_edge",
    SetVertexProperty: "set_vertex_property",
    RemoveVertexProperty: "remove_vertex_property",
    SetEdgeProperty: "set_edge_property",
    RemoveEdgeProperty: "remove_edge_property",
}
_OPS_BY_NAME = {name: cls for cls, name in _OP_NAMES.items()}


def op_from_json(raw: Mapping[str, Any]) -> UpdateOp:
    name = raw.get("op")
    cls = _OPS_BY_NAME.get(name)
    if cls is None:
        raise ValueError(f"unknown update op {name!r}")
    if cls is AddVertex:
        return AddVertex(vertex_from_json(raw["vertex"]))
    if cls is AddEdge:
        return AddEdge(edge_from_json(raw["edge"]))
    if cls in (RemoveVertex, RemoveEdge):
        return cls(_int_id(raw["id"]))
    if cls in (SetVertexProperty, SetEdgeProperty):
        return cls(_int_id(raw["id"]), str(raw["key"]), value_from_json(raw["value"]))
    return cls(_int_id(raw["id"]), str(raw["key"]))


def op_to_json(op: UpdateOp) -> dict[str, Any]:
    out: dict[str, Any] = {"op": _OP_NAMES[type(op)]}
    if isinstance(op, AddVertex):
        out["vertex"] = vertex_to_json(op.vertex)
    elif isinstance(op, AddEdge):
        out["edge"] = edge_to_json(op.edge)
    else:
        out["id"] = op.id
        if hasattr(op, "key"):
            out["key"] = op.key
        if hasattr(op, "value"):
            out["value"] = value_to_json(op.value)
    return out


def load_updates(lines: Iterable[str]) -> list[tuple[int, list[UpdateOp]]]:
    """Group update lines into transactions by their ascending, contiguous ``tx`` field."""
    txs: list[tuple[int, list[UpdateOp]]] = []
    for lineno, record in _json_lines(lines):
        try:
            tx_no = record["tx"]
            if not isinstance(tx_no, int) or isinstance(tx_no, bool) or tx_no < 1:
                raise ValueError(f"tx must be a positive integer, got {tx_no!r}")
            op = op_from_json(record)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if txs and tx_no == txs[-1][0]:
            txs[-1][1].append(op)
        elif not txs or tx_no == txs[-1][0] + 1:
            txs.append((tx_no, [op]))
        else:
            expected = txs[-1][0] + 1 if txs else "any"
            raise ValueError(f"line {lineno}: tx {tx_no} out of sequence (expected {expected})")
    return txs


def dump_updates(txs: Iterable[tuple[int, list[UpdateOp]]]) -> list[str]:
    return [json.dumps({"tx": n, **op_to_json(op)}) for n, ops in txs for op in ops]
