"""Parsing, path rewriting and query-graph construction for conjunctive path queries.

Accepted text::

    [PREFIX ns: <iri>]* | [@prefix ns: <iri> .]*
    SELECT (* | ?v ...) WHERE { s path o . s path o . ... }

where ``path`` is a ``/``-separated sequence of steps, each step an optional
``^`` followed by a property name and an optional ``?``, ``*`` or ``+``.
Subjects and objects are variables, ``<iri>``, prefixed or bare names, or
quoted literals.  An undeclared prefix is kept verbatim in the IRI, so
``ub:University`` matches ``<ub:University>`` in the data.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union

from .rdf import Term, TermKind


class QueryError(ValueError):
    """Base class of every query-frontend error."""


class QuerySyntaxError(QueryError):
    def __init__(self, message: str, text: str = "", pos: int = 0):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"syntax error at line {line}, column {col}: {message}")
        self.pos, self.line, self.column = pos, line, col


class UnsupportedFeature(QueryError):
    pass


class VariablePredicate(QueryError):
    pass


class DisconnectedQuery(QueryError):
    pass


# --------------------------------------------------------------------------
# terms of the query language

@dataclass(frozen=True, order=True)
class Var:
    """A query variable.  Internal names start with ``#`` and never clash with user names."""

    name: str

    @property
    def fresh(self) -> bool:
        return self.name.startswith("#")

    def __str__(self) -> str:
        return f"?_{self.name[1:]}" if self.fresh else f"?{self.name}"


Node = Union[Var, Term]


class Modifier(str, Enum):
    NONE = ""
    OPT = "?"
    STAR = "*"
    PLUS = "+"


@dataclass(frozen=True)
class PathAtom:
    prop: Term
    modifier: Modifier = Modifier.NONE
    inverted: bool = False

    @property
    def is_reach(self) -> bool:
        return self.modifier is not Modifier.NONE

    def __str__(self) -> str:
        return ("^" if self.inverted else "") + format_node(self.prop) + self.modifier.value


@dataclass(frozen=True)
class PathPattern:
    """A parsed pattern whose predicate is a whole path expression."""

    subject: Node
    path: tuple[PathAtom, ...]
    object: Node

    def __str__(self) -> str:
        path = "/".join(str(a) for a in self.path)
        return f"{format_node(self.subject)} {path} {format_node(self.object)} ."


@dataclass(frozen=True)
class TriplePattern:
    """A single-atom pattern; after rewriting ``atom.inverted`` is always False."""

    subject: Node
    atom: PathAtom
    object: Node

    @property
    def is_path(self) -> bool:
        return self.atom.is_reach

    @property
    def variables(self) -> tuple[Var, ...]:
        out: list[Var] = []
        for n in (self.subject, self.object):
            if isinstance(n, Var) and n not in out:
                out.append(n)
        return tuple(out)

    def __str__(self) -> str:
        return f"{format_node(self.subject)} {self.atom} {format_node(self.object)} ."


@dataclass
class ParsedQuery:
    patterns: list[PathPattern]
    projection: list[Var] | None = None  # None means SELECT *
    prefixes: dict[str, str] = field(default_factory=dict)

    def user_variables(self) -> list[Var]:
        seen: list[Var] = []
        for p in self.patterns:
            for n in (p.subject, p.object):
                if isinstance(n, Var) and not n.fresh and n not in seen:
                    seen.append(n)
        return seen

    def output_variables(self) -> list[Var]:
        return list(self.projection) if self.projection is not None else self.user_variables()


def format_node(n: Node) -> str:
    if isinstance(n, Var):
        return str(n)
    if n.kind is TermKind.LITERAL:
        return n.lexical
    if re.fullmatch(r"[A-Za-z_][\w\-]*(?::[\w\-.,%~]*)?", n.lexical) and not n.lexical.endswith("."):
        return n.lexical
    return f"<{n.lexical}>"


# --------------------------------------------------------------------------
# lexer

_UNSUPPORTED = {"FILTER", "UNION", "OPTIONAL", "MINUS", "BIND", "VALUES", "GRAPH", "SERVICE",
                "GROUP", "ORDER", "HAVING", "LIMIT", "OFFSET", "COUNT", "SUM", "AVG", "MIN",
                "MAX", "SAMPLE", "GROUP_CONCAT", "DISTINCT", "REDUCED", "ASK", "CONSTRUCT",
                "DESCRIBE", "FROM", "NOT", "EXISTS"}

_NAME_CHAR = r"[\w\-%~]"
_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>\s]*>)
  | (?P<lit>"(?:[^"\\]|\\.)*"(?:@[A-Za-z]+(?:-[A-Za-z0-9]+)*|\^\^(?:<[^<>\s]*>|[A-Za-z_][\w\-]*:\w*))?)
  | (?P<var>[?$][A-Za-z_]\w*)
  | (?P<atprefix>@prefix\b)
  | (?P<pname>[A-Za-z_][\w\-]*(?:\.[\w\-]+)*:(?:""" + _NAME_CHAR + r"""|[.,](?=""" + _NAME_CHAR + r"""))*)
  | (?P<pnamens>:(?:""" + _NAME_CHAR + r"""|[.,](?=""" + _NAME_CHAR + r"""))*)
  | (?P<name>[A-Za-z_][\w\-]*(?:\.[\w\-]+)*)
  | (?P<punct>[{}./^?*+;,|!()=<>])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int
    glued: bool  # no whitespace between this token and the previous one


def tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    glued = False
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind == "ws":
            glued = False
        else:
            if kind == "pnamens":
                kind = "pname"
            toks.append(_Tok(kind, m.group(), pos, glued))
            glued = True
        pos = m.end()
    return toks


# --------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}

    # helpers
    def peek(self, offset: int = 0) -> _Tok | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def error(self, msg: str, tok: _Tok | None = None) -> QuerySyntaxError:
        pos = tok.pos if tok is not None else len(self.text)
        return QuerySyntaxError(msg, self.text, pos)

    def next(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise self.error(f"unexpected end of query, expected {what}")
        self.i += 1
        return tok

    def is_keyword(self, tok: _Tok | None, word: str) -> bool:
        return tok is not None and tok.kind == "name" and tok.text.upper() == word

    def expect_punct(self, ch: str) -> _Tok:
        tok = self.next(repr(ch))
        if tok.kind != "punct" or tok.text != ch:
            self.check_unsupported(tok)
            raise self.error(f"expected {ch!r}, found {tok.text!r}", tok)
        return tok

    def check_unsupported(self, tok: _Tok) -> None:
        if tok.kind == "name" and tok.text.upper() in _UNSUPPORTED:
            raise UnsupportedFeature(f"{tok.text.upper()} is not supported (position {tok.pos})")
        if tok.kind == "punct" and tok.text in "|!()":
            raise UnsupportedFeature(f"path operator {tok.text!r} is not supported (position {tok.pos})")

    # grammar
    def parse(self) -> ParsedQuery:
        self.prologue()
        tok = self.next("SELECT")
        if not self.is_keyword(tok, "SELECT"):
            self.check_unsupported(tok)
            raise self.error(f"expected SELECT, found {tok.text!r}", tok)
        projection = self.projection()
        tok = self.peek()
        if self.is_keyword(tok, "WHERE"):
            self.i += 1
        self.expect_punct("{")
        patterns = self.group()
        self.expect_punct("}")
        tok = self.peek()
        if tok is not None:
            self.check_unsupported(tok)
            raise self.error(f"unexpected {tok.text!r} after query body", tok)
        if not patterns:
            raise self.error("empty WHERE clause")
        q = ParsedQuery(patterns, projection, dict(self.prefixes))
        if projection is not None:
            known = set(q.user_variables())
            for v in projection:
                if v not in known:
                    raise QueryError(f"projected variable {v} does not occur in the query")
        return q

    def prologue(self) -> None:
        while True:
            tok = self.peek()
            if tok is None:
                return
            if tok.kind == "atprefix" or self.is_keyword(tok, "PREFIX"):
                self.i += 1
                ns = self.next("prefix name")
                if ns.kind != "pname" or not ns.text.endswith(":"):
                    raise self.error("expected 'name:' after PREFIX", ns)
                iri = self.next("<iri>")
                if iri.kind != "iri":
                    raise self.error("expected <iri> in prefix declaration", iri)
                self.prefixes[ns.text[:-1]] = iri.text[1:-1]
                nxt = self.peek()
                if tok.kind == "atprefix" and nxt is not None and nxt.kind == "punct" and nxt.text == ".":
                    self.i += 1
            elif self.is_keyword(tok, "BASE"):
                raise UnsupportedFeature("BASE is not supported")
            else:
                return

    def projection(self) -> list[Var] | None:
        tok = self.next("projection")
        if tok.kind == "punct" and tok.text == "*":
            return None
        out: list[Var] = []
        while tok.kind == "var":
            out.append(Var(tok.text[1:]))
            nxt = self.peek()
            if nxt is None or nxt.kind != "var":
                break
            tok = self.next("variable")
        if not out:
            self.check_unsupported(tok)
            raise self.error(f"expected '*' or variables after SELECT, found {tok.text!r}", tok)
        return out

    def group(self) -> list[PathPattern]:
        patterns: list[PathPattern] = []
        while True:
            tok = self.peek()
            if tok is None or (tok.kind == "punct" and tok.text == "}"):
                return patterns
            self.check_unsupported(tok)
            if tok.kind == "punct" and tok.text == "{":
                raise UnsupportedFeature("nested group patterns are not supported")
            patterns.append(self.triple())
            tok = self.peek()
            if tok is not None and tok.kind == "punct" and tok.text == ".":
                self.i += 1
            elif tok is not None and tok.kind == "punct" and tok.text in ";,":
                raise UnsupportedFeature(f"{tok.text!r} abbreviations are not supported")
            elif not (tok is not None and tok.kind == "punct" and tok.text == "}"):
                if tok is not None:
                    self.check_unsupported(tok)
                raise self.error("expected '.' or '}' after triple pattern", tok)

    def node(self, role: str) -> Node:
        tok = self.next(role)
        if tok.kind == "var":
            return Var(tok.text[1:])
        if tok.kind == "lit":
            return Term.literal(self.expand_literal(tok))
        if tok.kind in ("iri", "pname", "name"):
            self.check_unsupported(tok)
            return self.term_of(tok)
        self.check_unsupported(tok)
        raise self.error(f"expected {role}, found {tok.text!r}", tok)

    def expand_literal(self, tok: _Tok) -> str:
        text = tok.text
        m = re.search(r"\^\^([A-Za-z_][\w\-]*):(\w*)$", text)
        if m and m.group(1) in self.prefixes:
            text = text[: m.start()] + f"^^<{self.prefixes[m.group(1)]}{m.group(2)}>"
        return text

    def term_of(self, tok: _Tok) -> Term:
        if tok.kind == "iri":
            lexical = tok.text[1:-1]
            if not lexical:
                raise self.error("empty IRI", tok)
            return Term.iri(lexical)
        if tok.kind == "pname":
            ns, _, local = tok.text.partition(":")
            if ns in self.prefixes:
                return Term.iri(self.prefixes[ns] + local)
            return Term.iri(tok.text)
        if tok.text == "a":
            return self.term_of(_Tok("pname", "rdf:type", tok.pos, False)) if "rdf" in self.prefixes \
                else Term.iri("rdf:type")
        return Term.iri(tok.text)

    def triple(self) -> PathPattern:
        s = self.node("subject")
        path = self.path()
        o = self.node("object")
        return PathPattern(s, tuple(path), o)

    def path(self) -> list[PathAtom]:
        atoms = [self.step()]
        while True:
            tok = self.peek()
            if tok is not None and tok.kind == "punct" and tok.text == "/":
                self.i += 1
                atoms.append(self.step())
            else:
                return atoms

    def step(self) -> PathAtom:
        tok = self.next("property")
        inverted = False
        if tok.kind == "punct" and tok.text == "^":
            inverted = True
            tok = self.next("property")
        if tok.kind == "var":
            raise VariablePredicate(f"variable predicate {tok.text} is not supported (position {tok.pos})")
        if tok.kind not in ("iri", "pname", "name"):
            self.check_unsupported(tok)
            raise self.error(f"expected property, found {tok.text!r}", tok)
        self.check_unsupported(tok)
        prop = self.term_of(tok)
        modifier = Modifier.NONE
        nxt = self.peek()
        if nxt is not None and nxt.glued and nxt.kind == "punct" and nxt.text in "?*+":
            modifier = Modifier(nxt.text)
            self.i += 1
        elif nxt is not None and nxt.glued and nxt.kind == "var":
            # "p?x" lexes as a variable; a glued '?' after a property is the modifier
            raise self.error("ambiguous '?' after property; separate the variable with a space", nxt)
        return PathAtom(prop, modifier, inverted)


def parse_query(text: str) -> ParsedQuery:
    """Parse query text; paths stay unexpanded (see :func:`rewrite_paths`)."""
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# rewriting

def rewrite_paths(patterns: Iterable[PathPattern]) -> list[TriplePattern]:
    """Expand ``/`` chains through fresh variables and resolve ``^`` by swapping endpoints."""
    counter = itertools.count()
    out: list[TriplePattern] = []
    for pat in patterns:
        nodes: list[Node] = [pat.subject]
        nodes += [Var(f"#pp{next(counter)}") for _ in range(len(pat.path) - 1)]
        nodes.append(pat.object)
        for i, atom in enumerate(pat.path):
            s, o = nodes[i], nodes[i + 1]
            if atom.inverted:
                s, o = o, s
            out.append(TriplePattern(s, PathAtom(atom.prop, atom.modifier, False), o))
    for tp in out:
        if tp.is_path and isinstance(tp.subject, Var) and tp.subject == tp.object:
            raise UnsupportedFeature(f"path pattern with the same variable at both ends: {tp}")
    return out


# --------------------------------------------------------------------------
# query graph

class VertexKind(str, Enum):
    PATTERN = "pattern"
    SINGLETON = "singleton"
    UNBOUND = "unbound"


@dataclass(frozen=True)
class QueryVertex:
    vid: int
    kind: VertexKind
    label: str
    variables: tuple[Var, ...]
    pattern: TriplePattern | None = None
    constant: Term | None = None
    domain: PathAtom | None = None  # unbound vertices: atom whose property bounds the domain

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class EquiEdge:
    u: int
    v: int
    variables: frozenset[Var]


@dataclass(frozen=True)
class ReachPredicate:
    """One path pattern: ``source`` reaches ``target`` under ``atom``."""

    index: int
    source: Var
    target: Var
    atom: PathAtom

    def __str__(self) -> str:
        return f"{self.source} {self.atom.prop.lexical}{self.atom.modifier.value} {self.target}"


@dataclass(frozen=True)
class ReachEdge:
    u: int  # houses the source variable
    v: int  # houses the target variable
    predicate: ReachPredicate


@dataclass
class QueryGraph:
    vertices: list[QueryVertex]
    equi_edges: list[EquiEdge]
    reach_edges: list[ReachEdge]
    predicates: list[ReachPredicate]
    output: list[Var]
    patterns: list[TriplePattern]

    def __len__(self) -> int:
        return len(self.vertices)

    def adjacency(self) -> list[int]:
        """Neighbour bitmask per vertex over both edge kinds."""
        adj = [0] * len(self.vertices)
        for e in itertools.chain(self.equi_edges, self.reach_edges):
            adj[e.u] |= 1 << e.v
            adj[e.v] |= 1 << e.u
        return adj

    def is_connected(self, mask: int | None = None) -> bool:
        if mask is None:
            mask = (1 << len(self.vertices)) - 1
        if mask == 0:
            return False
        adj = self.adjacency()
        seen = mask & -mask
        frontier = seen
        while frontier:
            nxt = 0
            m = frontier
            while m:
                low = m & -m
                nxt |= adj[low.bit_length() - 1]
                m ^= low
            nxt &= mask & ~seen
            seen |= nxt
            frontier = nxt
        return seen == mask

    def vertex_by_label(self, label: str) -> QueryVertex:
        for v in self.vertices:
            if v.label == label:
                return v
        raise KeyError(label)

    def to_dot(self) -> str:
        lines = ["graph query {"]
        for v in self.vertices:
            shape = {"pattern": "box", "singleton": "ellipse", "unbound": "diamond"}[v.kind.value]
            text = f"{v.label}\\n{v.pattern}" if v.pattern is not None else v.label
            lines.append(f'  v{v.vid} [shape={shape}, label="{_dot_escape(text)}"];')
        for e in self.equi_edges:
            names = ",".join(str(x) for x in sorted(e.variables))
            lines.append(f'  v{e.u} -- v{e.v} [label="{_dot_escape(names)}"];')
        for e in self.reach_edges:
            lines.append(f'  v{e.u} -- v{e.v} [style=dashed, label="{_dot_escape(str(e.predicate))}"];')
        lines.append("}")
        return "\n".join(lines)

    def describe(self) -> str:
        out = [f"vertices ({len(self.vertices)}):"]
        for v in self.vertices:
            extra = f"  {v.pattern}" if v.pattern is not None else ""
            if v.kind is VertexKind.UNBOUND:
                extra = f"  domain {v.domain}"
            out.append(f"  {v.label} [{v.kind.value}] vars={','.join(map(str, v.variables))}{extra}")
        for e in self.equi_edges:
            out.append(f"  equi {self.vertices[e.u]} - {self.vertices[e.v]} on "
                       + ",".join(str(x) for x in sorted(e.variables)))
        for e in self.reach_edges:
            out.append(f"  reach {self.vertices[e.u]} -> {self.vertices[e.v]} : {e.predicate}")
        return "\n".join(out)


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace("\\\\n", "\\n")


def build_query_graph(patterns: Sequence[TriplePattern], output: Sequence[Var] | None = None) -> QueryGraph:
    """Relation vertices for plain patterns, singleton/unbound vertices for path endpoints.

    Every path pattern adds a reach edge between each vertex housing its source
    variable and each (different) vertex housing its target variable.  When the
    only such pair is one relation holding both variables, an extra unbound
    vertex for the target is added so that the predicate still sits on an edge.
    """
    vertices: list[QueryVertex] = []
    for tp in patterns:
        if not tp.is_path:
            vertices.append(QueryVertex(len(vertices), VertexKind.PATTERN, f"R{len(vertices) + 1}",
                                        tp.variables, pattern=tp))
    housed: dict[Var, list[int]] = {}
    for v in vertices:
        for x in v.variables:
            housed.setdefault(x, []).append(v.vid)

    const_counter = itertools.count()
    predicates: list[ReachPredicate] = []
    endpoints: list[tuple[Var, Var]] = []
    for tp in patterns:
        if not tp.is_path:
            continue
        ends: list[Var] = []
        for node in (tp.subject, tp.object):
            if isinstance(node, Var):
                if node not in housed:
                    vid = len(vertices)
                    vertices.append(QueryVertex(vid, VertexKind.UNBOUND, f"U_{node}", (node,),
                                                domain=tp.atom))
                    housed[node] = [vid]
                ends.append(node)
            else:
                var = Var(f"#c{next(const_counter)}")
                vid = len(vertices)
                vertices.append(QueryVertex(vid, VertexKind.SINGLETON, f"R_{format_node(node)}", (var,),
                                            constant=node))
                housed[var] = [vid]
                ends.append(var)
        predicates.append(ReachPredicate(len(predicates), ends[0], ends[1], tp.atom))
        endpoints.append((ends[0], ends[1]))

    reach_edges: list[ReachEdge] = []
    for pred in predicates:
        pairs = [(u, v) for u in housed[pred.source] for v in housed[pred.target] if u != v]
        if not pairs:
            vid = len(vertices)
            vertices.append(QueryVertex(vid, VertexKind.UNBOUND, f"U_{pred.target}#{pred.index}",
                                        (pred.target,), domain=pred.atom))
            housed[pred.target].append(vid)
            pairs = [(u, vid) for u in housed[pred.source] if u != vid]
        reach_edges.extend(ReachEdge(u, v, pred) for u, v in pairs)

    equi_edges: list[EquiEdge] = []
    for a, b in itertools.combinations(vertices, 2):
        shared = set(a.variables) & set(b.variables)
        if shared:
            equi_edges.append(EquiEdge(a.vid, b.vid, frozenset(shared)))

    user_vars: list[Var] = []
    for tp in patterns:
        for x in tp.variables:
            if not x.fresh and x not in user_vars:
                user_vars.append(x)
    out = list(output) if output is not None else user_vars
    g = QueryGraph(vertices, equi_edges, reach_edges, predicates, out, list(patterns))
    if not vertices:
        raise QueryError("query has no patterns")
    if not g.is_connected():
        raise DisconnectedQuery("query graph is disconnected")
    return g


def compile_query(text: str) -> QueryGraph:
    parsed = parse_query(text)
    return build_query_graph(rewrite_paths(parsed.patterns), parsed.output_variables())


def format_query(parsed: ParsedQuery) -> str:
    """Canonical text of a parsed query (prefixes are already expanded)."""
    proj = "*" if parsed.projection is None else " ".join(str(v) for v in parsed.projection)
    body = "\n".join(f"  {p}" for p in parsed.patterns)
    return f"SELECT {proj} WHERE {{\n{body}\n}}"
