"""Reference evaluator: linear scans, nested-loop joins and BFS reachability.

Deliberately shares nothing with the index, planner or runtime code; it only
uses the term and query types.  Results follow the engine's documented path
semantics:

* ``p*``: ``s == t`` with ``s`` in the zero-length scope, or a p-path of length >= 1
* ``p+``: ``s != t`` and a p-path of length >= 1
* ``p?``: ``s == t`` with ``s`` in the zero-length scope, or a direct p-edge

The zero-length scope is every vertex of the data graph (``"vd"``) or only the
vertices touching a p-edge (``"vp"``).
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .query import Modifier, QueryError, TriplePattern, Var, parse_query, rewrite_paths
from .rdf import Dictionary, Term

STAR_SCOPES = ("vd", "vp")


@dataclass(frozen=True)
class OracleResult:
    schema: tuple[Var, ...]
    rows: frozenset[tuple[int, ...]]

    def sorted_rows(self) -> list[tuple[int, ...]]:
        return sorted(self.rows)

    def __len__(self) -> int:
        return len(self.rows)


class RowLimitExceeded(RuntimeError):
    """An intermediate binding set grew past the caller's row limit."""


class _Graph:
    def __init__(self, triples: np.ndarray):
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        self.triples = {tuple(r) for r in t.tolist()}
        self.succ: dict[int, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
        self.pred: dict[int, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
        self.edges: dict[int, list[tuple[int, int]]] = defaultdict(list)
        self.vertices: set[int] = set()
        self.prop_vertices: dict[int, set[int]] = defaultdict(set)
        for s, p, o in sorted(self.triples):
            self.succ[p][s].add(o)
            self.pred[p][o].add(s)
            self.edges[p].append((s, o))
            self.vertices.update((s, o))
            self.prop_vertices[p].update((s, o))
        self._fwd: dict[tuple[int, int], frozenset[int]] = {}
        self._bwd: dict[tuple[int, int], frozenset[int]] = {}

    def _bfs(self, adj: dict[int, set[int]], start: int) -> frozenset[int]:
        """Vertices reached from ``start`` by paths of length >= 1."""
        seen: set[int] = set()
        queue = deque(adj.get(start, ()))
        seen.update(queue)
        while queue:
            v = queue.popleft()
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return frozenset(seen)

    def forward(self, p: int, s: int) -> frozenset[int]:
        key = (p, s)
        if key not in self._fwd:
            self._fwd[key] = self._bfs(self.succ.get(p, {}), s)
        return self._fwd[key]

    def backward(self, p: int, t: int) -> frozenset[int]:
        key = (p, t)
        if key not in self._bwd:
            self._bwd[key] = self._bfs(self.pred.get(p, {}), t)
        return self._bwd[key]


class Oracle:
    """Holds one data graph; evaluates any number of rewritten queries against it."""

    def __init__(self, triples: np.ndarray, star_scope: str = "vd"):
        if star_scope not in STAR_SCOPES:
            raise ValueError(f"star scope must be one of {STAR_SCOPES}")
        self.g = _Graph(triples)
        self.star_scope = star_scope

    def scope(self, p: int) -> set[int]:
        return self.g.vertices if self.star_scope == "vd" else self.g.prop_vertices.get(p, set())

    # --- single path predicates -------------------------------------------
    def holds(self, p: int, mod: Modifier, s: int, t: int) -> bool:
        if mod is Modifier.STAR:
            return (s == t and s in self.scope(p)) or t in self.g.forward(p, s)
        if mod is Modifier.PLUS:
            return s != t and t in self.g.forward(p, s)
        if mod is Modifier.OPT:
            return (s == t and s in self.scope(p)) or t in self.g.succ.get(p, {}).get(s, ())
        return (s, p, t) in self.g.triples

    def targets(self, p: int, mod: Modifier, s: int) -> set[int]:
        if mod is Modifier.OPT:
            out = set(self.g.succ.get(p, {}).get(s, ()))
        else:
            out = set(self.g.forward(p, s))
        if mod is Modifier.PLUS:
            out.discard(s)
        elif s in self.scope(p):
            out.add(s)
        return out

    def sources(self, p: int, mod: Modifier, t: int) -> set[int]:
        if mod is Modifier.OPT:
            out = set(self.g.pred.get(p, {}).get(t, ()))
        else:
            out = set(self.g.backward(p, t))
        if mod is Modifier.PLUS:
            out.discard(t)
        elif t in self.scope(p):
            out.add(t)
        return out

    def source_domain(self, p: int, mod: Modifier) -> set[int]:
        return set(self.g.prop_vertices.get(p, ())) if mod is Modifier.PLUS else set(self.scope(p))

    # --- pattern extension --------------------------------------------------
    def _extend(self, tp: TriplePattern, ids: dict, slot: dict[Var, int],
                binding: tuple) -> Iterable[tuple]:
        """Bindings are tuples over a fixed variable order; None marks unbound."""
        p = ids[tp.atom.prop]
        mod = tp.atom.modifier

        def value(node) -> tuple[int | None, bool, int | None]:
            if isinstance(node, Var):
                i = slot[node]
                return i, binding[i] is not None, binding[i]
            return None, True, ids[node]

        si, s_bound, s = value(tp.subject)
        oi, o_bound, o = value(tp.object)
        if s_bound and s is None or o_bound and o is None or p is None:
            return  # constant absent from the data
        if s_bound and o_bound:
            if self.holds(p, mod, s, o):
                yield binding
            return
        same_var = si is not None and si == oi
        if mod is Modifier.NONE:
            if s_bound:
                pairs = ((s, x) for x in self.g.succ.get(p, {}).get(s, ()))
            elif o_bound:
                pairs = ((x, o) for x in self.g.pred.get(p, {}).get(o, ()))
            else:
                pairs = iter(self.g.edges.get(p, ()))
        elif s_bound:
            pairs = ((s, x) for x in self.targets(p, mod, s))
        elif o_bound:
            pairs = ((x, o) for x in self.sources(p, mod, o))
        else:
            pairs = ((a, b) for a in sorted(self.source_domain(p, mod)) for b in self.targets(p, mod, a))
        for a, b in pairs:
            if same_var and a != b:
                continue
            nb = list(binding)
            if not s_bound:
                nb[si] = a
            if not o_bound:
                nb[oi] = b
            yield tuple(nb)

    def evaluate(self, patterns: Sequence[TriplePattern], output: Sequence[Var] | None,
                 dictionary: Dictionary, row_limit: int | None = None) -> OracleResult:
        ids: dict[Term, int | None] = {}
        for tp in patterns:
            for node in (tp.subject, tp.atom.prop, tp.object):
                if isinstance(node, Term):
                    ids[node] = dictionary.lookup(node)
        if output is None:
            output = []
            for tp in patterns:
                for x in tp.variables:
                    if not x.fresh and x not in output:
                        output.append(x)
        schema = tuple(output)
        slot: dict[Var, int] = {}
        for tp in patterns:
            for x in tp.variables:
                slot.setdefault(x, len(slot))
        for v in schema:
            if v not in slot:
                raise QueryError(f"projected variable {v} does not occur in the query")
        remaining = list(patterns)
        bindings: set[tuple] = {(None,) * len(slot)}
        bound: set[Var] = set()
        while remaining and bindings:
            tp = self._pick(remaining, bound)
            remaining.remove(tp)
            bound.update(tp.variables)
            # variables no later pattern and no output needs are dropped (set semantics)
            needed = set(schema).union(*(r.variables for r in remaining))
            drop = [slot[x] for x in bound if x not in needed]
            nxt: set[tuple] = set()
            for b in bindings:
                for nb in self._extend(tp, ids, slot, b):
                    if drop:
                        nb = list(nb)
                        for i in drop:
                            nb[i] = None
                        nb = tuple(nb)
                    nxt.add(nb)
                if row_limit is not None and len(nxt) > row_limit:
                    raise RowLimitExceeded(f"more than {row_limit} intermediate bindings")
            bindings = nxt
        rows = frozenset(tuple(b[slot[v]] for v in schema) for b in bindings) if not remaining else frozenset()
        return OracleResult(schema, rows)

    @staticmethod
    def _pick(remaining: list[TriplePattern], bound: set[Var]) -> TriplePattern:
        def score(tp: TriplePattern) -> tuple:
            nb = sum(1 for x in tp.variables if x in bound)
            consts = sum(1 for n in (tp.subject, tp.object) if not isinstance(n, Var))
            connected = nb > 0 or not bound
            return (not connected, -(nb + consts), tp.is_path)
        return min(remaining, key=score)


def oracle_evaluate(triples: np.ndarray, patterns: Sequence[TriplePattern], dictionary: Dictionary,
                    output: Sequence[Var] | None = None, star_scope: str = "vd",
                    row_limit: int | None = None) -> OracleResult:
    return Oracle(triples, star_scope).evaluate(patterns, output, dictionary, row_limit)


def evaluate_text(oracle: Oracle, dictionary: Dictionary, text: str, row_limit: int | None = None) -> OracleResult:
    parsed = parse_query(text)
    return oracle.evaluate(rewrite_paths(parsed.patterns), parsed.output_variables(), dictionary, row_limit)


def oracle_query(triples: np.ndarray, dictionary: Dictionary, text: str,
                 star_scope: str = "vd", row_limit: int | None = None) -> OracleResult:
    return evaluate_text(Oracle(triples, star_scope), dictionary, text, row_limit)


def brute_force_reach_closure(triples: np.ndarray, p: int, star_scope: str | None = "vd") -> set[tuple[int, int]]:
    """All (s, t) with a p-path of length >= 1, plus (v, v) for v in the zero-length scope.

    ``star_scope=None`` omits the self pairs.
    """
    g = _Graph(triples)
    out = {(s, t) for s in g.prop_vertices.get(p, ()) for t in g.forward(p, s)}
    if star_scope == "vd":
        out.update((v, v) for v in g.vertices)
    elif star_scope == "vp":
        out.update((v, v) for v in g.prop_vertices.get(p, ()))
    return out
