"""Compile the running-example query, print every stage and replay a few updates."""

from grapevine.algebra_ir import dialect_of, pretty, schema_of
from grapevine.algebra_rewriter import compile_query
from grapevine.graph_store import (
    AddEdge,
    AddVertex,
    EdgeRecord,
    PropertyGraph,
    RemoveEdge,
    SetVertexProperty,
    VertexRecord,
    apply_transaction,
)
from grapevine.ivm_engine import instantiate, on_transaction, serialize_rows

QUERY = "MATCH t = (p:Post)-[:REPLY*]->(c:Comm) WHERE p.lang = c.lang RETURN p, t"


def main() -> None:
    graph = PropertyGraph()
    graph.add_vertex(1, ["Post"], lang="en")
    graph.add_vertex(2, ["Comm"], lang="en")
    graph.add_vertex(3, ["Comm"], lang="en")
    graph.add_edge(101, 1, 2, "REPLY")
    graph.add_edge(102, 2, 3, "REPLY")

    compiled = compile_query(QUERY)
    for step, expr in enumerate((compiled.gra, compiled.nra, compiled.fra), start=1):
        print(f"-- step {step} ({dialect_of(expr).name})\n{pretty(expr)}\n")

    view = instantiate(graph, compiled.fra)
    schema = schema_of(compiled.fra)
    print("initial:", serialize_rows(schema, view.result))
    updates = {
        "append Comm 4 after 3": [
            AddVertex(VertexRecord(4, frozenset({"Comm"}), {"lang": "en"})),
            AddEdge(EdgeRecord(103, 3, 4, "REPLY", {})),
        ],
        "vertex 3 switches to de": [SetVertexProperty(3, "lang", "de")],
        "delete edge 102": [RemoveEdge(102)],
    }
    for title, tx in updates.items():
        delta = on_transaction(view, apply_transaction(graph, tx))
        print(f"{title}:", serialize_rows(schema, delta.changes))


if __name__ == "__main__":
    main()
