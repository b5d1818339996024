"""Strong- and weak-scaling benchmark harness over generated hierarchy data.

CSV schema (one row per (mode, scale, k, query)):

    mode,scale,k,triples,query,median_seconds,rows,messages

``query`` is ``GEOMEAN`` on the per-configuration summary row, whose
``median_seconds`` is the geometric mean of the query medians.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import gmean

from .generate import RDF_TYPE, encode_triples, hierarchy_graph
from .runtime import Engine, EngineConfig
from .store import Store

CORPUS = Path(__file__).resolve().parents[2] / "corpus" / "appendix"
RDF_PREFIX = f"PREFIX rdf: <{RDF_TYPE[:-len('type')]}>\n"

# the L-queries of the corpus, with a standard rdf: declaration so rdf:type resolves
L_QUERIES = {
    "L1": "SELECT * WHERE { ?x rdf:type ub:ResearchGroup . ?x ub:subOrganizationOf* ?y . "
          "?y rdf:type ub:University . }",
    "L2": "SELECT * WHERE { ?x rdf:type ub:FullProfessor . ?x ub:headOf ?d . "
          "?d ub:subOrganizationOf* ?y . ?y rdf:type ub:University . }",
    "L3": "SELECT * WHERE { ?r1 rdf:type ub:ResearchGroup . ?r1 ub:subOrganizationOf* ?y . "
          "?y rdf:type ub:University . ?r2 rdf:type ub:ResearchGroup . ?r2 ub:subOrganizationOf* ?y . }",
}
UB_PREFIX = "PREFIX ub: <http://www.lehigh.edu/~zhp2/2004/0401/univ-bench.owl#>\n"

CSV_FIELDS = ["mode", "scale", "k", "triples", "query", "median_seconds", "rows", "messages"]


def l_query(name: str) -> str:
    return RDF_PREFIX + UB_PREFIX + L_QUERIES[name]


def triples_per_university() -> int:
    return len(hierarchy_graph(np.random.default_rng(0), 1))


def universities_for(n_triples: int) -> int:
    return max(1, round(n_triples / triples_per_university()))


@dataclass
class BenchRow:
    mode: str
    scale: float
    k: int
    triples: int
    medians: dict[str, float] = field(default_factory=dict)
    rows: dict[str, int] = field(default_factory=dict)
    messages: dict[str, int] = field(default_factory=dict)

    @property
    def geo_mean(self) -> float:
        vals = [max(v, 1e-9) for v in self.medians.values()]
        return float(gmean(vals)) if vals else float("nan")


@dataclass
class BenchReport:
    rows: list[BenchRow]
    queries: list[str]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            for q in self.queries:
                w.writerow([r.mode, r.scale, r.k, r.triples, q, f"{r.medians[q]:.6f}", r.rows[q], r.messages[q]])
            w.writerow([r.mode, r.scale, r.k, r.triples, "GEOMEAN", f"{r.geo_mean:.6f}", "", ""])
        return buf.getvalue()

    def to_text(self) -> str:
        head = ["mode", "scale", "k", "triples"] + [f"{q} [s]" for q in self.queries] + ["geo-mean [s]"]
        body = [[r.mode, f"{r.scale:g}", str(r.k), str(r.triples)]
                + [f"{r.medians[q]:.4f}" for q in self.queries] + [f"{r.geo_mean:.4f}"] for r in self.rows]
        widths = [max(len(x) for x in col) for col in zip(head, *body)]
        fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(b) for b in body])

    def cardinalities_consistent(self) -> bool:
        """Within one data scale every k must return the same result sizes."""
        by_scale: dict[float, dict[str, int]] = {}
        for r in self.rows:
            seen = by_scale.setdefault(r.scale, dict(r.rows))
            if seen != r.rows:
                return False
        return True


def time_queries(engine: Engine, queries: dict[str, str], runs: int) -> tuple[dict, dict, dict]:
    medians, rows, messages = {}, {}, {}
    for name, text in queries.items():
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            res = engine.execute(text)
            times.append(time.perf_counter() - t0)
        medians[name] = statistics.median(times)
        rows[name] = len(res)
        messages[name] = res.audit.messages if res.audit else 0
    return medians, rows, messages


def _measure(mode: str, scale: float, arr: np.ndarray, dictionary, k: int, queries: dict[str, str],
             runs: int, transport: str, sample_size: int) -> BenchRow:
    store = Store.build(arr, dictionary, k=k, sample_size=sample_size)
    with Engine(store, EngineConfig(transport=transport)) as engine:
        medians, rows, messages = time_queries(engine, queries, runs)
    return BenchRow(mode, scale, k, len(arr), medians, rows, messages)


def hierarchy_data(universities: int, seed: int = 0):
    return encode_triples(hierarchy_graph(np.random.default_rng(seed), universities))


def strong_scaling(universities: int, k_list: Sequence[int], queries: dict[str, str] | None = None,
                   runs: int = 3, transport: str = "socket", sample_size: int = 2000,
                   seed: int = 0) -> BenchReport:
    """Fixed data, varying number of partitions."""
    queries = queries or {q: l_query(q) for q in L_QUERIES}
    arr, d = hierarchy_data(universities, seed)
    rows = [_measure("strong", 1.0, arr, d, k, queries, runs, transport, sample_size) for k in k_list]
    return BenchReport(rows, list(queries))


def weak_scaling(universities: int, scales: Sequence[float], k_list: Sequence[int],
                 queries: dict[str, str] | None = None, runs: int = 3, transport: str = "socket",
                 sample_size: int = 2000, seed: int = 0,
                 data: Callable[[int, int], tuple] = hierarchy_data) -> BenchReport:
    """Data size and partition count grown in equal proportion (scale i pairs with k i)."""
    if len(scales) != len(k_list):
        raise ValueError("weak scaling needs one k per scale")
    queries = queries or {q: l_query(q) for q in L_QUERIES}
    out = []
    for scale, k in zip(scales, k_list):
        arr, d = data(max(1, round(universities * scale)), seed)
        out.append(_measure("weak", scale, arr, d, k, queries, runs, transport, sample_size))
    return BenchReport(out, list(queries))
