"""Incrementally maintained openCypher views over property graphs."""

from grapevine.algebra_ir import Dialect, dialect_of, parse_algebra, pretty, schema_of
from grapevine.algebra_rewriter import CompiledQuery, compile_query, prop_requests
from grapevine.graph_store import PropertyGraph, apply_transaction, load_graph, load_updates
from grapevine.ivm_engine import ViewHandle, instantiate, on_transaction, read_view
from grapevine.query_frontend import parse
from grapevine.reference_evaluator import evaluate
from grapevine.values import MISSING, Bag, Path

__all__ = [
    "Bag",
    "CompiledQuery",
    "Dialect",
    "MISSING",
    "Path",
    "PropertyGraph",
    "ViewHandle",
    "apply_transaction",
    "compile_query",
    "dialect_of",
    "evaluate",
    "instantiate",
    "load_graph",
    "load_updates",
    "on_transaction",
    "parse",
    "parse_algebra",
    "pretty",
    "prop_requests",
    "read_view",
    "schema_of",
]
