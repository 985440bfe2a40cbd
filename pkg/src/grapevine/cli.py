"""``grapevine``: maintain Cypher views over a graph while replaying an update stream.

Example::

    grapevine --graph g.jsonl --query q.cypher --updates u.jsonl --emit deltas --stats

stdout carries one JSON object per line. Snapshots are
``{"tx", "view", "kind": "snapshot", "rows": [...]}``; in delta mode every
changed tuple after the initial snapshot becomes
``{"tx", "view", "kind": "delta", "tuple", "multiplicity"}``. With
``--stats`` a CSV ``tx,view,mode,tuples,seconds`` goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence, TextIO

from grapevine.algebra_ir import AlgebraExpr, SchemaError, schema_of
from grapevine.algebra_rewriter import AmbiguousBinding, compile_query
from grapevine.graph_store import (
    DeltaBag,
    GraphError,
    PropertyGraph,
    apply_transaction,
    load_graph,
    load_updates,
)
from grapevine.ivm_engine import instantiate, on_transaction, serialize_rows
from grapevine.query_frontend import CypherSyntaxError, SemanticError, UnsupportedFeature
from grapevine.reference_evaluator import Stats, evaluate

EXIT_OK, EXIT_LOAD, EXIT_SEMANTIC = 0, 1, 2


class _Failure(Exception):
    def __init__(self, status: int, message: str) -> None:
        super().__init__(message)
        self.status = status


@dataclass
class _FullView:
    """Re-evaluates from scratch on every transaction."""

    graph: PropertyGraph
    expr: AlgebraExpr
    result: Counter = field(default_factory=Counter)
    tuples: int = 0

    def refresh(self) -> DeltaBag:
        stats = Stats()
        new = evaluate(self.graph, self.expr, stats)
        self.tuples = stats.tuples
        delta = DeltaBag.difference(schema_of(self.expr).names, new, self.result)
        self.result = new
        return delta


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grapevine", description=__doc__.split("\n")[0])
    parser.add_argument("--graph", required=True, help="JSON-lines property graph")
    parser.add_argument("--query", action="append", required=True, help="Cypher file (repeatable)")
    parser.add_argument("--updates", help="JSON-lines update stream, '-' for stdin")
    parser.add_argument("--emit", choices=("snapshots", "deltas"), default="snapshots")
    parser.add_argument("--full", action="store_true", help="re-evaluate from scratch per transaction")
    parser.add_argument("--stats", action="store_true", help="per-transaction CSV stats on stderr")
    return parser


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as f:
            return f.read()
    except OSError as exc:
        raise _Failure(EXIT_LOAD, f"cannot read {path}: {exc.strerror}") from None


def _compile(path: str) -> AlgebraExpr:
    text = _read(path)
    try:
        return compile_query(text).fra
    except CypherSyntaxError as exc:
        raise _Failure(EXIT_LOAD, f"{path}: {exc}") from None
    except (UnsupportedFeature, SemanticError, SchemaError, AmbiguousBinding) as exc:
        raise _Failure(EXIT_SEMANTIC, f"{path}: {exc}") from None


def _emit_snapshot(out: TextIO, tx: int, view: int, expr: AlgebraExpr, rows: Counter) -> None:
    record = {"tx": tx, "view": view, "kind": "snapshot", "rows": serialize_rows(schema_of(expr), rows)}
    out.write(json.dumps(record) + "\n")


def _emit_delta(out: TextIO, tx: int, view: int, expr: AlgebraExpr, delta: DeltaBag) -> None:
    for entry in serialize_rows(schema_of(expr), delta.changes):
        out.write(json.dumps({"tx": tx, "view": view, "kind": "delta", **entry}) + "\n")


def run(args: argparse.Namespace, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    try:
        try:
            graph = load_graph(_read(args.graph).splitlines())
        except (ValueError, GraphError) as exc:
            raise _Failure(EXIT_LOAD, f"{args.graph}: {exc}") from None
        exprs = [_compile(path) for path in args.query]
        updates = []
        if args.updates is not None:
            try:
                updates = load_updates(_read(args.updates).splitlines())
            except ValueError as exc:
                raise _Failure(EXIT_LOAD, f"{args.updates}: {exc}") from None
    except _Failure as failure:
        err.write(f"grapevine: {failure}\n")
        return failure.status

    mode = "full" if args.full else "ivm"
    if args.stats:
        err.write("tx,view,mode,tuples,seconds\n")

    views: list = []
    for k, expr in enumerate(exprs):
        start = time.perf_counter()
        if args.full:
            view = _FullView(graph, expr)
            view.refresh()
            tuples = view.tuples
        else:
            view = instantiate(graph, expr)
            tuples = view.tuples_processed
        elapsed = time.perf_counter() - start
        views.append(view)
        _emit_snapshot(out, 0, k, expr, view.result)
        if args.stats:
            err.write(f"0,{k},{mode},{tuples},{elapsed:.6f}\n")

    for tx, ops in updates:
        try:
            base_deltas = apply_transaction(graph, ops)
        except GraphError as exc:
            err.write(f"grapevine: transaction {tx} rejected: {exc}\n")
            return EXIT_LOAD
        for k, (expr, view) in enumerate(zip(exprs, views)):
            start = time.perf_counter()
            if args.full:
                delta = view.refresh()
                tuples = view.tuples
            else:
                before = view.tuples_processed
                delta = on_transaction(view, base_deltas)
                tuples = view.tuples_processed - before
            elapsed = time.perf_counter() - start
            if args.emit == "snapshots":
                _emit_snapshot(out, tx, k, expr, view.result)
            else:
                _emit_delta(out, tx, k, expr, delta)
            if args.stats:
                err.write(f"{tx},{k},{mode},{tuples},{elapsed:.6f}\n")
    out.flush()
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    return run(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
