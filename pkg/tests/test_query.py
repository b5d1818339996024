from __future__ import annotations

import pytest

from reachjoin.query import (DisconnectedQuery, Modifier, PathAtom, QuerySyntaxError, UnsupportedFeature,
                             Var, VariablePredicate, VertexKind, build_query_graph, compile_query,
                             format_query, parse_query, rewrite_paths)
from reachjoin.rdf import Term

from _util import WORKED_EXAMPLE_QUERY


def test_concatenated_path_is_one_pattern():
    q = parse_query('SELECT * WHERE { ?person workedAt/locIn*/hasLabel "USA" }')
    assert len(q.patterns) == 1
    path = q.patterns[0].path
    assert [a.prop.lexical for a in path] == ["workedAt", "locIn", "hasLabel"]
    assert [a.modifier for a in path] == [Modifier.NONE, Modifier.STAR, Modifier.NONE]


def test_inverse_atom():
    q = parse_query("SELECT * WHERE { ?x ^p ?y }")
    assert q.patterns[0].path == (PathAtom(Term.iri("p"), Modifier.NONE, True),)


@pytest.mark.parametrize("mod", ["*", "+", "?"])
def test_modifiers(mod):
    q = parse_query(f"SELECT * WHERE {{ ?x <http://e/p>{mod} ?y }}")
    assert q.patterns[0].path[0].modifier.value == mod


@pytest.mark.parametrize("clause", ["FILTER(?x = ?y)", "OPTIONAL { ?x p ?z }", "UNION { ?x p ?z }"])
def test_excluded_fragment_rejected(clause):
    with pytest.raises(UnsupportedFeature):
        parse_query(f"SELECT * WHERE {{ ?x p ?y {clause} }}")


def test_variable_predicate_rejected():
    with pytest.raises(VariablePredicate):
        parse_query("SELECT * WHERE { ?x ?p ?y }")


@pytest.mark.parametrize("text", ["SELECT * WHERE { ?x p }", "SELECT * { ?x p ?y", "WHERE { ?x p ?y }"])
def test_syntax_errors(text):
    with pytest.raises(QuerySyntaxError):
        parse_query(text)


def test_prefixes_expand():
    q = parse_query("PREFIX ex: <http://e/> SELECT ?x WHERE { ?x ex:p ex:o . }")
    assert q.patterns[0].path[0].prop == Term.iri("http://e/p")
    assert q.patterns[0].object == Term.iri("http://e/o")
    assert q.projection == [Var("x")]


def test_rewrite_chain_introduces_fresh_variables():
    q = parse_query('SELECT * WHERE { ?p workedAt/locIn*/hasLabel "USA" }')
    out = rewrite_paths(q.patterns)
    assert [str(t) for t in out] == ["?p workedAt ?_pp0 .", "?_pp0 locIn* ?_pp1 .", '?_pp1 hasLabel "USA" .']
    assert all(v.fresh for v in out[0].variables[1:])


def test_rewrite_single_atom_unchanged():
    q = parse_query("SELECT * WHERE { ?x p* ?y }")
    assert [str(t) for t in rewrite_paths(q.patterns)] == ["?x p* ?y ."]


def test_rewrite_inverse_then_chain():
    out = rewrite_paths(parse_query("SELECT * WHERE { ?x ^p/q ?y }").patterns)
    assert [str(t) for t in out] == ["?_pp0 p ?x .", "?_pp0 q ?y ."]


def test_fresh_variables_never_projected():
    g = compile_query("SELECT * WHERE { ?x p/q ?y }")
    assert g.output == [Var("x"), Var("y")]


def test_worked_example_graph():
    g = compile_query(WORKED_EXAMPLE_QUERY)
    labels = [v.label for v in g.vertices]
    assert labels == ["R1", "R2", "R3", 'R_"USA"']
    assert [(labels[e.u], labels[e.v], set(e.variables)) for e in g.equi_edges] == [("R1", "R2", {Var("p")})]
    reach = {(labels[e.u], labels[e.v], e.predicate.atom.prop.lexical + e.predicate.atom.modifier.value)
             for e in g.reach_edges}
    assert reach == {("R1", 'R_"USA"', "locIn*"), ("R1", "R3", "workedWith*"),
                     ("R2", "R3", "workedWith*"), ("R1", "R3", "sameState*")}


def test_disconnected_query_rejected():
    with pytest.raises(DisconnectedQuery):
        compile_query("SELECT * WHERE { ?x p ?y . ?a q ?b }")


def test_lone_path_gets_two_unbound_vertices():
    g = compile_query("SELECT * WHERE { ?x locIn* ?y }")
    assert [v.kind for v in g.vertices] == [VertexKind.UNBOUND, VertexKind.UNBOUND]
    assert all(v.domain.prop == Term.iri("locIn") for v in g.vertices)
    assert len(g.reach_edges) == 1 and not g.equi_edges


def test_path_inside_one_pattern_gets_an_extra_vertex():
    g = compile_query("SELECT * WHERE { ?x p ?y . ?x q* ?y }")
    assert len(g.vertices) == 2 and g.vertices[1].kind is VertexKind.UNBOUND
    assert len(g.reach_edges) == 1


def test_same_variable_path_unsupported():
    with pytest.raises(UnsupportedFeature):
        compile_query("SELECT * WHERE { ?x p* ?x }")


def test_graph_renders():
    g = compile_query(WORKED_EXAMPLE_QUERY)
    assert g.to_dot().startswith("graph query {")
    assert "locIn*" in g.describe()


def test_format_round_trip():
    q = parse_query("SELECT ?x WHERE { ?x <http://e/p>*/^<http://e/q> \"v\"@en . }")
    again = parse_query(format_query(q))
    assert again.patterns == q.patterns and again.projection == q.projection


def test_build_query_graph_accepts_explicit_output():
    pats = rewrite_paths(parse_query("SELECT * WHERE { ?x p ?y . ?y q ?z }").patterns)
    g = build_query_graph(pats, [Var("z"), Var("x")])
    assert g.output == [Var("z"), Var("x")]
