import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import CORPUS, random_graph

from grapevine.algebra_ir import (
    ExpandOut,
    GetEdges,
    GetVertices,
    NaturalJoin,
    Projection,
    Selection,
    TransitiveJoin,
    Unnest,
    pretty,
    walk,
)
from grapevine.algebra_rewriter import (
    canonical_comparison,
    compile_query,
    compile_to_gra,
    expand_to_joins,
    prop_requests,
    push_down_properties,
)
from grapevine.query_frontend import parse
from grapevine.reference_evaluator import evaluate
from grapevine.terms import Attr, Comparison, Literal, Prop


def referenced_props(query: str) -> set[tuple[str, str]]:
    """(var, key) pairs written in WHERE and RETURN, read off the AST."""
    ast = parse(query)
    operands = [o for c in ast.where for o in (c.left, c.right)] + [r.expr for r in ast.returns]
    return {(o.var, o.key) for o in operands if isinstance(o, Prop)}


def test_minimal_query():
    gra = compile_to_gra(parse("MATCH (n) RETURN n"))
    assert gra == Projection(GetVertices("n"), ((Attr("n"), "n"),))


def test_single_hop_compiles_to_expand_then_join():
    compiled = compile_query("MATCH (a:Post)-[:REPLY]->(b:Comm) RETURN b")
    assert compiled.gra == Projection(
        ExpandOut(GetVertices("a", "Post"), "a", "b", "Comm", "REPLY"), ((Attr("b"), "b"),)
    )
    assert compiled.nra.child == NaturalJoin(
        GetVertices("a", "Post"), GetEdges("a", "Post", None, "REPLY", "b", "Comm")
    )


def test_literal_filter_pushes_one_request():
    fra = compile_query("MATCH (a:Post) WHERE a.lang = 'en' RETURN a").fra
    assert fra == Projection(
        Selection(GetVertices("a", "Post", (("lang", "aL"),)), (Comparison(Attr("aL"), "=", Literal("en")),)),
        ((Attr("a"), "a"),),
    )
    assert prop_requests(fra) == [("a", "lang")]


def test_passes_without_work_are_identities():
    expr = Projection(NaturalJoin(GetVertices("a"), GetEdges("a", None, None, "R", "b", None)), ((Attr("b"), "b"),))
    assert expand_to_joins(expr) == expr
    assert push_down_properties(expr) == expr


def test_canonical_operand_order():
    c = Comparison(Literal(1), "=", Prop("a", "x"))
    assert canonical_comparison(c) == Comparison(Prop("a", "x"), "=", Literal(1))
    lt = Comparison(Literal(1), "<", Prop("a", "x"))
    assert canonical_comparison(lt) == lt


def test_unnest_names_avoid_collisions():
    nra = compile_query("MATCH (c)-[:R]->(cL) WHERE c.lang = c.lag RETURN cL.lang").nra
    names = [name for node in [nra, nra.child] for _, name in getattr(node.child, "items", ())]
    assert len(names) == len(set(names)) and "cL" not in names


def test_path_bound_single_hop_becomes_bounded_transitive_join():
    nra = compile_query("MATCH t = (a)-[:R]->(b) RETURN t").nra
    join = nra.child
    assert isinstance(join, TransitiveJoin) and (join.min, join.max, join.path_var) == (1, 1, "t")


def test_transitive_join_target_props_go_to_get_edges(running_query):
    fra = compile_query(running_query).fra
    join = fra.child.child
    assert join.left.props == (("lang", "pL"),)
    assert join.right.tgt_props == (("lang", "cL"),)
    assert join.right.src_props == ()


@pytest.mark.parametrize("query", CORPUS)
def test_pass_idempotence(query):
    compiled = compile_query(query)
    assert compile_to_gra(compiled.ast) == compiled.gra
    assert expand_to_joins(compiled.nra) == compiled.nra
    assert push_down_properties(compiled.fra) == compiled.fra


@pytest.mark.parametrize("query", CORPUS)
def test_no_unnest_survives(query):
    compiled = compile_query(query)
    assert not any(isinstance(n, ExpandOut) for n in walk(compiled.nra))
    assert not any(isinstance(n, (Unnest, ExpandOut)) for n in walk(compiled.fra))
    assert "unnest" not in pretty(compiled.fra)


@pytest.mark.parametrize("query", CORPUS)
def test_schema_minimality(query):
    requests = prop_requests(compile_query(query).fra)
    assert len(requests) == len(set(requests))
    assert set(requests) == referenced_props(query)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CORPUS), st.integers(0, 10**6))
def test_semantics_preserved_property(query, seed):
    compiled = compile_query(query)
    graph, _ = random_graph(random.Random(seed), max_vertices=20, max_edges=30)
    gra = evaluate(graph, compiled.gra)
    assert evaluate(graph, compiled.nra) == gra
    assert evaluate(graph, compiled.fra) == gra
