"""Command-line interface.

Subcommands: load, query, explain, stats, bench, oracle-check, gen.  The store
directory defaults to ``$REACHJOIN_DATA`` (or ``./reachjoin-data``).  Every
command exits 0 on success; failures print ``error [stage]: message`` and exit
with a nonzero status.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .generate import gen_instance, hierarchy_graph, to_ntriples, write_instance
from .optimizer import PlanningError, explain_dot, explain_text
from .oracle import oracle_query
from .partition import PartitionAssignment, load_partition_file
from .query import QueryError
from .rdf import MalformedLine, load_ntriples
from .runtime import Engine, EngineConfig, ExecutionError
from .stats import DEFAULT_SAMPLE_SIZE
from .store import Store

DATA_ENV = "REACHJOIN_DATA"
DEFAULT_DATA = "reachjoin-data"


class CliError(Exception):
    def __init__(self, stage: str, message: str, code: int = 2):
        super().__init__(message)
        self.stage = stage
        self.code = code


def _data_dir(args) -> Path:
    return Path(args.data_dir or os.environ.get(DATA_ENV) or DEFAULT_DATA)


def _query_text(args) -> str:
    if args.execute is not None:
        return args.execute
    if args.query_file is None:
        raise CliError("input", "give a query file or -e TEXT")
    return Path(args.query_file).read_text(encoding="utf-8")


def _engine(args, store: Store) -> Engine:
    return Engine(store, EngineConfig(transport=args.transport, gamma=args.gamma, star_scope=args.star_scope))


def _load_store(args) -> Store:
    d = _data_dir(args)
    if not (d / "meta.json").exists():
        raise CliError("io", f"no store at {d}; run 'reachjoin load' first")
    return Store.load(d)


# --------------------------------------------------------------------------
# commands

def cmd_load(args) -> int:
    t0 = time.perf_counter()
    arr, dictionary = load_ntriples(args.data, strict=not args.lenient)
    if args.partition_file:
        assignment = load_partition_file(args.partition_file, dictionary, args.slaves)
    else:
        assignment = PartitionAssignment(args.slaves)
    store = Store.build(arr, dictionary, k=args.slaves, assignment=assignment,
                        sample_size=args.sample_size, seed=args.seed)
    out = _data_dir(args)
    store.save(out)
    print(store.summary())
    print(f"stored at {out} in {time.perf_counter() - t0:.3f} s")
    return 0


def cmd_query(args) -> int:
    text = _query_text(args)
    store = _load_store(args)
    with _engine(args, store) as engine:
        if args.explain_only:
            print(explain_text(engine.plan(text)))
            return 0
        res = engine.execute(text)
    print("\t".join(f"?{v.name}" for v in res.schema))
    for row in res.decoded():
        print("\t".join(row))
    print(f"# {len(res)} rows in {res.elapsed:.4f} s", file=sys.stderr)
    if args.audit:
        for line in res.audit.lines():
            print(f"# {line}", file=sys.stderr)
    return 0


def cmd_explain(args) -> int:
    text = _query_text(args)
    store = _load_store(args)
    with _engine(args, store) as engine:
        plan = engine.plan(text)
    print(explain_dot(plan) if args.format == "dot" else explain_text(plan))
    return 0


def cmd_stats(args) -> int:
    store = _load_store(args)
    cat = store.catalog
    dec = store.dictionary.decode
    print(store.summary())
    print(f"vertices: {cat.vertex_count}; reach sample size {cat.sample_size}, seed {cat.sample_seed}")
    print("property\tcard\t|V^p|\treachSel")
    for p in sorted(cat.reach_sel):
        print(f"{dec(p)}\t{cat.card_property(p)}\t{cat.property_vertices.get(p, 0)}\t{cat.reach_sel[p]:.6f}")
    return 0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def cmd_bench(args) -> int:
    if args.mode == "strong":
        report = bench_mod.strong_scaling(args.universities, _int_list(args.k_list), runs=args.runs,
                                          transport=args.transport, sample_size=args.sample_size)
    else:
        report = bench_mod.weak_scaling(args.universities, _float_list(args.scales), _int_list(args.k_list),
                                        runs=args.runs, transport=args.transport, sample_size=args.sample_size)
    print(report.to_text())
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
        print(f"csv written to {args.csv}")
    if not report.cardinalities_consistent():
        raise CliError("bench", "result cardinalities differ across k", code=1)
    return 0


def cmd_oracle_check(args) -> int:
    text = _query_text(args)
    store = _load_store(args)
    with _engine(args, store) as engine:
        res = engine.execute(text)
    expected = oracle_query(store.triples(), store.dictionary, text, args.star_scope)
    got = res.row_set()
    missing, extra = expected.rows - got, got - expected.rows
    print(f"engine {len(got)} rows, oracle {len(expected)} rows")
    dec = store.dictionary.decode
    for tag, rows in (("missing", missing), ("extra", extra)):
        for row in sorted(rows)[:20]:
            print(f"{tag}\t" + "\t".join(str(dec(t)) for t in row))
    if missing or extra:
        raise CliError("oracle-check", f"{len(missing)} missing and {len(extra)} extra rows", code=1)
    print("results agree")
    return 0


def cmd_gen(args) -> int:
    out = Path(args.out)
    if args.hierarchy:
        out.mkdir(parents=True, exist_ok=True)
        triples = hierarchy_graph(np.random.default_rng(args.seed), args.hierarchy)
        (out / "dataset.nt").write_text(to_ntriples(triples))
        for name in bench_mod.L_QUERIES:
            (out / f"{name}.rq").write_text(bench_mod.l_query(name) + "\n")
        print(f"{len(triples)} triples written to {out}")
        return 0
    inst = gen_instance(args.seed, args.vertices, args.properties, args.edge_factor, args.shape,
                        n_queries=args.queries)
    files = write_instance(inst, out, args.star_scope)
    print(f"{len(inst.triples)} triples, {len(inst.queries)} queries written to {out}")
    for f in files:
        print(f"  {f}")
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reachjoin", description="Distributed in-memory engine for SPARQL queries with property paths.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, engine: bool = True) -> None:
        p.add_argument("--data-dir", help=f"store directory (default ${DATA_ENV} or ./{DEFAULT_DATA})")
        if engine:
            p.add_argument("--transport", choices=["inproc", "delay", "socket"], default="inproc")
            p.add_argument("--star-scope", choices=["vd", "vp"], default="vd",
                           help="zero-length path domain: all data vertices (vd) or the property's vertices (vp)")
            p.add_argument("--gamma", type=float, default=1.0, help="shipping cost weight")

    def query_input(p) -> None:
        p.add_argument("query_file", nargs="?")
        p.add_argument("-e", "--execute", metavar="TEXT", help="inline query text")

    p = sub.add_parser("load", help="index an N-Triples file into a store directory")
    p.add_argument("data")
    p.add_argument("--slaves", "-k", type=int, default=1)
    p.add_argument("--partition-file", help="termLexical<TAB>partition lines (file-based assignment)")
    p.add_argument("--sample-size", type=int, default=DEFAULT_SAMPLE_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lenient", action="store_true", help="skip malformed lines instead of failing")
    common(p, engine=False)
    p.set_defaults(func=cmd_load)

    p = sub.add_parser("query", help="run a query")
    query_input(p)
    p.add_argument("--audit", action="store_true", help="print the message audit")
    p.add_argument("--explain-only", action="store_true", help="print the plan without executing")
    common(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("explain", help="print the chosen plan")
    query_input(p)
    p.add_argument("--format", choices=["text", "dot"], default="text")
    common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("stats", help="print store statistics")
    common(p, engine=False)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("bench", help="strong or weak scaling over generated hierarchy data")
    p.add_argument("--mode", choices=["strong", "weak"], default="strong")
    p.add_argument("--universities", type=int, default=50, help="data size at scale 1")
    p.add_argument("--k-list", default="1,2,4")
    p.add_argument("--scales", default="0.2,0.6,1.0", help="weak mode: one scale per k")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--transport", choices=["inproc", "delay", "socket"], default="socket")
    p.add_argument("--sample-size", type=int, default=2000)
    p.add_argument("--csv", help="also write the report as CSV")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", help="compare engine and reference evaluator on a query")
    query_input(p)
    common(p)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("gen", help="generate a random instance with oracle answers")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--vertices", type=int, default=200)
    p.add_argument("--properties", type=int, default=4)
    p.add_argument("--edge-factor", type=float, default=2.0)
    p.add_argument("--shape", choices=["chain", "star", "random"], default="random")
    p.add_argument("--queries", type=int, default=5)
    p.add_argument("--star-scope", choices=["vd", "vp"], default="vd")
    p.add_argument("--hierarchy", type=int, metavar="UNIVERSITIES",
                   help="write hierarchy data with the L-queries instead")
    p.set_defaults(func=cmd_gen)
    return ap


STAGES = [
    (MalformedLine, "parse-data"),
    (QueryError, "parse-query"),
    (PlanningError, "plan"),
    (ExecutionError, "runtime"),
    (OSError, "io"),
]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except CliError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:
        for kind, stage in STAGES:
            if isinstance(exc, kind):
                print(f"error [{stage}]: {exc}", file=sys.stderr)
                return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
