"""Reproducible random instances: data graphs, SwPP queries and precomputed oracle answers.

Two data shapes are provided:

* ``random_graph``: uniform vertices, skewed property choice, and per-property
  backbone chains so that transitive paths are long and cyclic in places.
* ``hierarchy_graph``: a university-style organisation tree
  (university <- department <- group <- subgroup via ``subOrganizationOf``)
  with typed members, the shape the L-queries of the corpus expect.

Queries are grown from witness bindings in the data so most of them have
non-empty answers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .oracle import Oracle, RowLimitExceeded, evaluate_text, oracle_query
from .rdf import Dictionary, Term, parse_ntriples_text

EX = "http://example.org/"
UB = "http://www.lehigh.edu/~zhp2/2004/0401/univ-bench.owl#"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

QUERY_SHAPES = ("chain", "star", "random")


def _iri(x: str) -> Term:
    return Term.iri(x)


# --------------------------------------------------------------------------
# data graphs

def random_graph(rng: np.random.Generator, vertices: int, properties: int,
                 edge_factor: float) -> list[tuple[Term, Term, Term]]:
    """About ``edge_factor * vertices`` distinct edges over ``properties`` labels."""
    verts = [_iri(f"{EX}v{i}") for i in range(vertices)]
    props = [_iri(f"{EX}p{j}") for j in range(properties)]
    lits = [Term.literal(f'"l{i}"') for i in range(max(1, vertices // 20))]
    weights = 1.0 / np.arange(1, properties + 1)
    weights /= weights.sum()
    n_edges = int(edge_factor * vertices)
    out: set[tuple[Term, Term, Term]] = set()
    # backbone: a random walk per property, making long paths likely
    for j in range(properties):
        length = int(rng.integers(2, max(3, vertices // max(properties, 1)) + 1))
        walk = rng.choice(vertices, size=min(length, vertices), replace=False)
        for a, b in zip(walk[:-1], walk[1:]):
            out.add((verts[a], props[j], verts[b]))
        if rng.random() < 0.5 and len(walk) > 2:      # close a cycle now and then
            out.add((verts[walk[-1]], props[j], verts[walk[int(rng.integers(0, len(walk) - 1))]]))
    while len(out) < n_edges + properties:
        s = int(rng.integers(vertices))
        p = int(rng.choice(properties, p=weights))
        if rng.random() < 0.05:
            out.add((verts[s], props[p], lits[int(rng.integers(len(lits)))]))
        else:
            out.add((verts[s], props[p], verts[int(rng.integers(vertices))]))
    return sorted(out)


def chain_graph(length: int, prop: str = f"{EX}next") -> list[tuple[Term, Term, Term]]:
    """A single directed path v0 -> v1 -> ... -> v<length>; its diameter is ``length``."""
    p = _iri(prop)
    return [(_iri(f"{EX}c{i}"), p, _iri(f"{EX}c{i + 1}")) for i in range(length)]


def hierarchy_graph(rng: np.random.Generator, universities: int, departments: int = 4,
                    groups: int = 3, subgroups: int = 2, people: int = 6) -> list[tuple[Term, Term, Term]]:
    """Organisation tree of depth 3 with typed nodes and members."""
    t = _iri(RDF_TYPE)
    sub = _iri(UB + "subOrganizationOf")
    cls = {n: _iri(UB + n) for n in ("University", "Department", "ResearchGroup", "FullProfessor",
                                     "AssistantProfessor", "GraduateStudent")}
    head, works, member, advisor, degree = (_iri(UB + n) for n in
                                            ("headOf", "worksFor", "memberOf", "advisor", "doctoralDegreeFrom"))
    out: list[tuple[Term, Term, Term]] = []
    unis = [_iri(f"http://www.University{u}.edu") for u in range(universities)]
    for u, uni in enumerate(unis):
        out.append((uni, t, cls["University"]))
        for d in range(departments):
            dep = _iri(f"http://www.Department{d}.University{u}.edu")
            out += [(dep, t, cls["Department"]), (dep, sub, uni)]
            for g in range(groups):
                grp = _iri(f"http://www.Department{d}.University{u}.edu/ResearchGroup{g}")
                out += [(grp, t, cls["ResearchGroup"]), (grp, sub, dep)]
                for s in range(subgroups):
                    sg = _iri(f"http://www.Department{d}.University{u}.edu/ResearchGroup{g}/Sub{s}")
                    out += [(sg, t, cls["ResearchGroup"]), (sg, sub, grp)]
            prof = None
            for i in range(people):
                person = _iri(f"http://www.Department{d}.University{u}.edu/Person{i}")
                if i == 0:
                    prof = person
                    out += [(person, t, cls["FullProfessor"]), (person, head, dep)]
                elif i < 3:
                    out.append((person, t, cls["AssistantProfessor"]))
                else:
                    out += [(person, t, cls["GraduateStudent"]), (person, advisor, prof)]
                out.append((person, works if i < 3 else member, dep))
                out.append((person, degree, unis[int(rng.integers(universities))]))
    return out


def to_ntriples(triples: list[tuple[Term, Term, Term]]) -> str:
    buf = io.StringIO()
    for s, p, o in triples:
        buf.write(f"{s.n3()} {p.n3()} {o.n3()} .\n")
    return buf.getvalue()


def encode_triples(triples: list[tuple[Term, Term, Term]],
                   dictionary: Dictionary | None = None) -> tuple[np.ndarray, Dictionary]:
    """Encode term triples directly, skipping N-Triples text (ids in first-seen order)."""
    d = dictionary if dictionary is not None else Dictionary()
    enc = d.encode
    arr = np.fromiter((enc(x) for t in triples for x in t), dtype=np.int64, count=3 * len(triples))
    return arr.reshape(-1, 3), d


# --------------------------------------------------------------------------
# queries

class _Adjacency:
    def __init__(self, triples: list[tuple[Term, Term, Term]]):
        self.out: dict[Term, list[tuple[Term, Term]]] = {}
        self.inc: dict[Term, list[tuple[Term, Term]]] = {}
        self.by_prop: dict[Term, dict[Term, list[Term]]] = {}
        for s, p, o in triples:
            self.out.setdefault(s, []).append((p, o))
            self.inc.setdefault(o, []).append((p, s))
            self.by_prop.setdefault(p, {}).setdefault(s, []).append(o)

    def walk(self, rng: np.random.Generator, start: Term, p: Term, steps: int) -> Term:
        cur = start
        for _ in range(steps):
            nxt = self.by_prop.get(p, {}).get(cur)
            if not nxt:
                break
            cur = nxt[int(rng.integers(len(nxt)))]
        return cur


def random_query(rng: np.random.Generator, triples: list[tuple[Term, Term, Term]],
                 patterns: int = 4, max_paths: int = 3, shape: str = "random") -> str:
    """A connected query of at most ``patterns`` patterns, grown along witness edges."""
    if shape not in QUERY_SHAPES:
        raise ValueError(f"query shape must be one of {QUERY_SHAPES}")
    adj = _Adjacency(triples)
    props = sorted(adj.by_prop)
    s0, _, _ = triples[int(rng.integers(len(triples)))]
    witness: dict[str, Term] = {"?x0": s0}
    order = ["?x0"]
    lines: list[str] = []
    n_paths = 0
    for _ in range(patterns):
        anchor = {"chain": order[-1], "star": order[0]}.get(shape) or order[int(rng.integers(len(order)))]
        w = witness[anchor]
        forward = rng.random() < 0.6 or w not in adj.inc
        edges = adj.out.get(w, []) if forward else adj.inc.get(w, [])
        if edges:
            p, other = edges[int(rng.integers(len(edges)))]
        else:
            p, other = props[int(rng.integers(len(props)))], None
        is_path = n_paths < max_paths and rng.random() < 0.5
        text_p = p.n3()
        if is_path:
            n_paths += 1
            mod = ["*", "+", "?"][int(rng.integers(3))]
            if other is not None and mod != "?":
                src = w if forward else other
                other = adj.walk(rng, src, p, int(rng.integers(0, 4))) if forward else other
            inverse = rng.random() < 0.25
            atom = f"{text_p}{mod}"
            if rng.random() < 0.25:                      # two-step chain
                p2 = props[int(rng.integers(len(props)))]
                atom = f"{atom}/{p2.n3()}" if rng.random() < 0.5 else f"{p2.n3()}?/{atom}"
                other = None
            text_p = f"^{atom}" if inverse else atom
            if inverse:
                forward = not forward
        # the other endpoint: fresh variable, constant, or an existing variable
        r = rng.random()
        end = None
        if other is not None and r < 0.15:
            end = other.n3()
        elif not is_path and r < 0.25 and len(order) > 1:
            cand = order[int(rng.integers(len(order)))]
            end = cand if cand != anchor else None
        if end is None or (end.startswith('"') and not forward):   # literals only as objects
            end = f"?x{len(order)}"
            witness[end] = other if other is not None else w
            order.append(end)
        lines.append(f"{anchor} {text_p} {end} ." if forward else f"{end} {text_p} {anchor} .")
    body = "\n  ".join(lines)
    return f"SELECT * WHERE {{\n  {body}\n}}\n"


# --------------------------------------------------------------------------
# instances

@dataclass
class Instance:
    seed: int
    triples: list[tuple[Term, Term, Term]]
    queries: list[str]
    params: dict = field(default_factory=dict)

    def ntriples(self) -> str:
        return to_ntriples(self.triples)

    def encoded(self):
        """(triple array, dictionary) of this instance."""
        return parse_ntriples_text(self.ntriples())


def gen_instance(seed: int, vertices: int = 200, properties: int = 4, edge_factor: float = 2.0,
                 query_shape: str = "random", n_queries: int = 1, patterns: int | None = None,
                 max_paths: int = 3, row_limit: int | None = None, attempts: int = 50) -> Instance:
    """Random data plus ``n_queries`` queries.

    With ``row_limit`` set, a query whose reference evaluation needs more
    intermediate bindings than the limit is redrawn (up to ``attempts`` times).
    """
    rng = np.random.default_rng(seed)
    triples = random_graph(rng, vertices, properties, edge_factor)
    check = None
    if row_limit is not None:
        arr, dictionary = encode_triples(triples)
        check = Oracle(arr)
    queries = []
    for _ in range(n_queries):
        for _ in range(attempts):
            n = patterns if patterns is not None else int(rng.integers(1, 7))
            q = random_query(rng, triples, n, max_paths, query_shape)
            if check is None:
                break
            try:
                evaluate_text(check, dictionary, q, row_limit)
                break
            except RowLimitExceeded:
                continue
        else:
            raise RuntimeError(f"no query within {row_limit} rows after {attempts} attempts")
        queries.append(q)
    params = {"vertices": vertices, "properties": properties, "edge_factor": edge_factor,
              "query_shape": query_shape, "row_limit": row_limit}
    return Instance(seed, triples, queries, params)


def format_answers(result, dictionary) -> str:
    """Tab-separated decoded answers with a header row, rows in sorted order."""
    header = "\t".join(f"?{v.name}" for v in result.schema)
    rows = sorted("\t".join(str(dictionary.decode(t)) for t in row) for row in result.rows)
    return "\n".join([header] + rows) + "\n"


def write_instance(inst: Instance, directory: str | Path, star_scope: str = "vd") -> list[Path]:
    """dataset.nt, query<i>.rq and answers<i>.tsv (oracle answers)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    data = d / "dataset.nt"
    data.write_text(inst.ntriples())
    arr, dictionary = inst.encoded()
    written = [data]
    for i, q in enumerate(inst.queries):
        qp, ap = d / f"query{i}.rq", d / f"answers{i}.tsv"
        qp.write_text(q)
        ap.write_text(format_answers(oracle_query(arr, dictionary, q, star_scope), dictionary))
        written += [qp, ap]
    return written
