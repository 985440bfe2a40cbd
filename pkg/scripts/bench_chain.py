"""Tail insertion on REPLY chains: incremental maintenance vs full re-evaluation.

    python3 scripts/bench_chain.py --sizes 250 500 1000 2000
"""

import argparse
import io
import json
import tempfile
from pathlib import Path

from grapevine.cli import build_parser, run
from grapevine.graph_store import PropertyGraph, dump_graph

QUERY = "MATCH t = (p:Post)-[:REPLY*]->(c:Comm) WHERE p.lang = c.lang RETURN p, t"


def chain(n: int) -> PropertyGraph:
    graph = PropertyGraph()
    for i in range(1, n + 1):
        graph.add_vertex(i, ["Post" if i == 1 else "Comm"], lang="en")
    for i in range(1, n):
        graph.add_edge(100000 + i, i, i + 1, "REPLY")
    return graph


def tail_insert(n: int) -> list[str]:
    vertex = {"id": n + 1, "labels": ["Comm"], "properties": {"lang": "en"}}
    edge = {"id": 100000 + n, "source": n, "target": n + 1, "type": "REPLY"}
    return [json.dumps({"tx": 1, "op": "add_vertex", "vertex": vertex}),
            json.dumps({"tx": 1, "op": "add_edge", "edge": edge})]


def measure(workdir: Path, n: int, full: bool) -> tuple[int, float]:
    (workdir / "g.jsonl").write_text("\n".join(dump_graph(chain(n))) + "\n")
    (workdir / "u.jsonl").write_text("\n".join(tail_insert(n)) + "\n")
    (workdir / "q.cypher").write_text(QUERY + "\n")
    argv = ["--graph", str(workdir / "g.jsonl"), "--query", str(workdir / "q.cypher"),
            "--updates", str(workdir / "u.jsonl"), "--emit", "deltas", "--stats"]
    err = io.StringIO()
    run(build_parser().parse_args(argv + (["--full"] if full else [])), out=io.StringIO(), err=err)
    row = err.getvalue().splitlines()[-1].split(",")
    return int(row[3]), float(row[4])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2000])
    args = parser.parse_args()
    print("n,ivm_tuples,full_tuples,ratio,ivm_seconds,full_seconds")
    with tempfile.TemporaryDirectory() as tmp:
        for n in args.sizes:
            ivm_t, ivm_s = measure(Path(tmp), n, full=False)
            full_t, full_s = measure(Path(tmp), n, full=True)
            print(f"{n},{ivm_t},{full_t},{ivm_t / full_t:.4f},{ivm_s:.6f},{full_s:.6f}")


if __name__ == "__main__":
    main()
