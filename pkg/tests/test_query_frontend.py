import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import CORPUS

from grapevine.query_frontend import (
    CypherSyntaxError,
    PatternEdge,
    PatternGraph,
    PatternNode,
    QueryAst,
    QueryError,
    ReturnItem,
    SemanticError,
    UnsupportedFeature,
    format_query,
    parse,
)
from grapevine.terms import Attr, Comparison, Literal, Prop


def test_running_example_ast(running_query):
    ast = parse(running_query)
    assert ast.match == PatternGraph(
        nodes=(PatternNode("p", "Post"), PatternNode("c", "Comm")),
        edges=(PatternEdge(None, "REPLY", 1, None, True),),
        path_binding="t",
    )
    assert ast.where == (Comparison(Prop("p", "lang"), "=", Prop("c", "lang")),)
    assert [item.name for item in ast.returns] == ["p", "t"]


def test_minimal_query():
    ast = parse("MATCH (n) RETURN n")
    assert ast.match.nodes == (PatternNode("n", None),)
    assert ast.where == ()
    assert ast.returns == (ReturnItem(Attr("n")),)


@pytest.mark.parametrize(
    "text,edge",
    [
        ("MATCH (a)-[:R]->(b) RETURN a", PatternEdge(None, "R")),
        ("MATCH (a)-->(b) RETURN a", PatternEdge()),
        ("MATCH (a)-[r]->(b) RETURN r", PatternEdge("r")),
        ("MATCH (a)-[:R*2]->(b) RETURN a", PatternEdge(None, "R", 2, 2, True)),
        ("MATCH (a)-[:R*2..]->(b) RETURN a", PatternEdge(None, "R", 2, None, True)),
        ("MATCH (a)-[:R*..3]->(b) RETURN a", PatternEdge(None, "R", 1, 3, True)),
        ("MATCH (a)-[*1..1]->(b) RETURN a", PatternEdge(None, None, 1, 1, True)),
    ],
)
def test_edge_forms(text, edge):
    assert parse(text).match.edges == (edge,)


def test_literals_and_aliases():
    ast = parse("match (n:`My Label`) where n.x >= -2.5 and n.s <> 'it\\'s' and n.b = TRUE return n.x as x")
    assert ast.match.nodes[0].label == "My Label"
    ops = [(c.op, c.right) for c in ast.where]
    assert ops[0] == (">=", Literal(-2.5))
    assert ops[2] == ("=", Literal(True))
    assert ast.returns[0].name == "x"


@pytest.mark.parametrize(
    "text,construct",
    [
        ("MATCH (n) RETURN n ORDER BY n.x", "ORDER BY"),
        ("OPTIONAL MATCH (n) RETURN n", "OPTIONAL MATCH"),
        ("MATCH (n) WITH n RETURN n", "WITH"),
        ("MATCH (n) RETURN n SKIP 1", "SKIP"),
        ("MATCH (n) RETURN n LIMIT 1", "LIMIT"),
        ("MATCH (n) UNWIND n.xs AS x RETURN x", "UNWIND"),
        ("MATCH (n) RETURN count(n)", "aggregation"),
        ("MATCH (n) RETURN [1, 2]", "list"),
        ("MATCH (n) WHERE n.x = 1 OR n.x = 2 RETURN n", "OR"),
        ("MATCH (n)<-[:R]-(m) RETURN n", "incoming"),
        ("MATCH (n)-[:R]-(m) RETURN n", "undirected"),
        ("MATCH (n:A:B) RETURN n", "label"),
        ("MATCH (n {x: 1}) RETURN n", "propert"),
        ("MATCH (n)-[r:R*]->(m) RETURN n", "variable"),
        ("MATCH (n), (m) RETURN n", "pattern"),
        ("MATCH (n) RETURN DISTINCT n", "DISTINCT"),
        ("MATCH (n) WHERE n.x = null RETURN n", "null"),
        ("MATCH (n)-[:R*0..2]->(m) RETURN n", "zero"),
        ("CREATE (n) RETURN n", "CREATE"),
    ],
)
def test_unsupported(text, construct):
    with pytest.raises(UnsupportedFeature) as info:
        parse(text)
    assert construct.lower() in info.value.construct.lower()


@pytest.mark.parametrize(
    "text",
    ["MATCH (n RETURN n", "MATCH (n) RETURN", "MATCH n RETURN n", "MATCH (n) WHERE RETURN n", "MATCH (n) RETURN n.", "'"],
)
def test_syntax_errors_have_positions(text):
    with pytest.raises(CypherSyntaxError) as info:
        parse(text)
    assert info.value.line >= 1 and info.value.column >= 1


@pytest.mark.parametrize(
    "text",
    [
        "MATCH (n) RETURN m",
        "MATCH (n)-[:R]->(n) RETURN n",
        "MATCH t = (n)-[:R]->(m) WHERE t.x = 1 RETURN n",
        "MATCH (n) RETURN n.x AS y, n AS y",
    ],
)
def test_semantic_errors(text):
    with pytest.raises(SemanticError):
        parse(text)


def test_error_position():
    with pytest.raises(UnsupportedFeature) as info:
        parse("MATCH (n)\nRETURN n LIMIT 3")
    assert (info.value.line, info.value.column) == (2, 10)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="MATCHRETURNWHEREmatch ()[]-><=:*.,'`abn0123 \n", max_size=60))
def test_parse_is_total(text):
    try:
        parse(text)
    except QueryError:
        pass


names = st.sampled_from(["a", "b", "c", "d", "e", "f", "g", "h", "n", "end"])
labels = st.one_of(st.none(), st.sampled_from(["Post", "Comm", "weird label", "MATCH"]))
literals = st.one_of(st.integers(-3, 3), st.sampled_from([0.5, "x", "it's", True, False])).map(Literal)


@st.composite
def query_asts(draw):
    hops = draw(st.integers(0, 3))
    vars_ = draw(st.lists(names, min_size=2 * hops + 2, max_size=2 * hops + 2, unique=True))
    nodes = tuple(PatternNode(vars_[i], draw(labels)) for i in range(hops + 1))
    edges = []
    for i in range(hops):
        if draw(st.booleans()):
            lo = draw(st.integers(1, 3))
            hi = draw(st.one_of(st.none(), st.integers(lo, 4)))
            edges.append(PatternEdge(None, draw(st.one_of(st.none(), st.just("R"))), lo, hi, True))
        else:
            edges.append(PatternEdge(draw(st.one_of(st.none(), st.just(vars_[hops + 1 + i]))), draw(st.one_of(st.none(), st.just("R")))))
    path = "p" if hops and draw(st.booleans()) else None
    props = [Prop(n.var, draw(st.sampled_from(["x", "lang", "end"]))) for n in nodes]
    where = tuple(
        Comparison(draw(st.sampled_from(props)), draw(st.sampled_from(["=", "<>", "<", ">="])),
                   draw(st.one_of(literals, st.sampled_from(props))))
        for _ in range(draw(st.integers(0, 2)))
    )
    returns = (ReturnItem(Attr(nodes[0].var)),) + tuple(
        ReturnItem(p, alias) for p, alias in zip(props[1:2], [draw(st.one_of(st.none(), st.just("out")))])
    )
    return QueryAst(PatternGraph(nodes, tuple(edges), path), where, returns)


@settings(max_examples=200, deadline=None)
@given(query_asts())
def test_format_reparse_round_trip(ast):
    assert parse(format_query(ast)) == ast


@pytest.mark.parametrize("text", CORPUS)
def test_corpus_round_trips(text):
    ast = parse(text)
    assert parse(format_query(ast)) == ast
