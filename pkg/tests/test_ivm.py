import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import CORPUS, random_graph, random_transaction

from grapevine.algebra_ir import Kind, Schema
from grapevine.algebra_rewriter import compile_query
from grapevine.graph_store import (
    AddEdge,
    AddVertex,
    DeltaBag,
    EdgeRecord,
    PropertyGraph,
    RemoveEdge,
    SetVertexProperty,
    VertexRecord,
    apply_transaction,
)
from grapevine.ivm_engine import instantiate, on_transaction, read_view, serialize_rows
from grapevine.reference_evaluator import evaluate
from grapevine.values import MISSING, Bag, Path

P12 = Path((1, 101, 2))
P123 = Path((1, 101, 2, 102, 3))


@pytest.fixture
def view(running_graph, running_query):
    return instantiate(running_graph, compile_query(running_query).fra)


def test_initial_view(view):
    assert read_view(view) == Counter({(1, P12): 1, (1, P123): 1})


def test_empty_graph_view(running_query):
    assert read_view(instantiate(PropertyGraph(), compile_query(running_query).fra)) == Counter()


def test_literal_filter_view(running_graph):
    view = instantiate(running_graph, compile_query("MATCH (a:Post) WHERE a.lang = 'en' RETURN a").fra)
    assert read_view(view) == Counter({(1,): 1})


def test_insert_tail(view, running_graph):
    tx = [AddVertex(VertexRecord(4, frozenset({"Comm"}), {"lang": "en"})), AddEdge(EdgeRecord(103, 3, 4, "REPLY", {}))]
    delta = on_transaction(view, apply_transaction(running_graph, tx))
    assert delta == {(1, Path((1, 101, 2, 102, 3, 103, 4))): 1}


def test_delete_middle_edge(view, running_graph):
    delta = on_transaction(view, apply_transaction(running_graph, [RemoveEdge(102)]))
    assert delta == {(1, P123): -1}
    assert read_view(view) == Counter({(1, P12): 1})


def test_property_change(view, running_graph):
    delta = on_transaction(view, apply_transaction(running_graph, [SetVertexProperty(3, "lang", "de")]))
    assert delta == {(1, P123): -1}


def test_empty_transaction(view, running_graph):
    assert not on_transaction(view, apply_transaction(running_graph, []))


def test_read_view_is_a_copy(view):
    snapshot = read_view(view)
    snapshot.clear()
    assert read_view(view)


def test_closed_view_stops_listening(view, running_graph):
    view.close()
    assert apply_transaction(running_graph, [RemoveEdge(102)]) == {}


def test_rejects_non_fra(running_graph, running_query):
    with pytest.raises(ValueError):
        instantiate(running_graph, compile_query(running_query).gra)


def test_edge_reinserted_with_new_id_is_a_new_path(view, running_graph):
    on_transaction(view, apply_transaction(running_graph, [RemoveEdge(102)]))
    delta = on_transaction(view, apply_transaction(running_graph, [AddEdge(EdgeRecord(109, 2, 3, "REPLY", {}))]))
    assert delta == {(1, Path((1, 101, 2, 109, 3))): 1}


def test_several_views_share_a_graph(running_graph, running_query):
    a = instantiate(running_graph, compile_query(running_query).fra)
    b = instantiate(running_graph, compile_query("MATCH (x)-[:REPLY]->(y) RETURN x, y").fra)
    deltas = apply_transaction(running_graph, [RemoveEdge(101)])
    on_transaction(a, deltas)
    on_transaction(b, deltas)
    assert read_view(a) == Counter()
    assert read_view(b) == Counter({(2, 3): 1})


def test_serialization_order_and_rendering():
    schema = Schema((("p", Kind.VERTEX), ("t", Kind.PATH), ("x", Kind.VALUE)))
    rows = {(2, Path((2,)), MISSING): 1, (1, P12, Bag(["b", "a"])): 3}
    records = serialize_rows(schema, rows)
    assert records == [
        {"tuple": {"p": 1, "t": [1, 101, 2], "x": ["a", "b"]}, "multiplicity": 3},
        {"tuple": {"p": 2, "t": [2], "x": None}, "multiplicity": 1},
    ]


def test_delta_bag_of_view_carries_schema(view, running_graph):
    delta = on_transaction(view, apply_transaction(running_graph, [RemoveEdge(101)]))
    assert isinstance(delta, DeltaBag) and delta.schema == ("p", "t")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(CORPUS), st.integers(0, 10**6))
def test_oracle_equivalence_property(query, seed):
    rng = random.Random(seed)
    compiled = compile_query(query)
    graph, ids = random_graph(rng, max_vertices=15, max_edges=25)
    view = instantiate(graph, compiled.fra)
    assert read_view(view) == evaluate(graph, compiled.fra)
    for _ in range(5):
        on_transaction(view, apply_transaction(graph, random_transaction(rng, graph, ids)))
        assert read_view(view) == evaluate(graph, compiled.gra)
