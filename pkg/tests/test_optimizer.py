from __future__ import annotations

import numpy as np
import pytest

from reachjoin.generate import gen_instance
from reachjoin.optimizer import (CostConfig, CostModel, EquiCondition, Optimizer, PlanNode, PlanningError,
                                 annotate_sharding, explain_dot, explain_text, plan_query)
from reachjoin.query import Var, compile_query
from reachjoin.rdf import Dictionary, Term
from reachjoin.stats import CountTable, StatsCatalog
from reachjoin.store import Store

from _util import WORKED_EXAMPLE_QUERY, worked_example_store


def _catalog_with(card_p: dict[int, int], vertex_count=0, prop_vertices=None, reach=None):
    props = np.concatenate([np.full(n, p, np.int64) for p, n in card_p.items()])
    return StatsCatalog(card_key={"p": CountTable.of(props)}, vertex_count=vertex_count,
                        property_vertices=dict(prop_vertices or {}), reach_sel=dict(reach or {}))


def _dictionary(*names):
    d = Dictionary()
    for n in names:
        d.encode(Term.iri(n))
    return d


def test_singleton_leaf_cost_is_one():
    g = compile_query('SELECT * WHERE { ?u locIn* "USA" . ?u at ?x }')
    d = _dictionary("locIn", "at")
    d.encode(Term.literal('"USA"'))
    cat = _catalog_with({0: 5, 1: 5}, vertex_count=10, prop_vertices={0: 4}, reach={0: 0.5})
    model = CostModel(g, cat, d, CostConfig(k=3))
    single = next(v for v in g.vertices if v.label == 'R_"USA"')
    [leaf] = model.leaf_options(single)
    assert leaf.est_cost == 1.0 and leaf.est_card == 1.0


def test_pattern_leaf_cost_divides_by_partitions():
    g = compile_query("SELECT * WHERE { ?x p ?y }")
    cat = _catalog_with({0: 3000})
    leaves = CostModel(g, cat, _dictionary("p"), CostConfig(k=5)).leaf_options(g.vertices[0])
    assert {leaf.est_cost for leaf in leaves} == {600.0}
    assert {leaf.est_card for leaf in leaves} == {3000.0}


@pytest.mark.parametrize("query,scope", [("SELECT * WHERE { ?x locIn+ ?y }", "vd"),
                                         ("SELECT * WHERE { ?x locIn* ?y }", "vp")])
def test_unbound_leaf_cardinality_is_property_vertex_count(query, scope):
    g = compile_query(query)
    cat = _catalog_with({0: 50}, vertex_count=1000, prop_vertices={0: 42}, reach={0: 0.1})
    model = CostModel(g, cat, _dictionary("locIn"), CostConfig(star_scope=scope))
    assert [leaf.est_card for leaf in model.leaf_options(g.vertices[1])] == [42.0]


def test_star_unbound_over_all_vertices_by_default():
    g = compile_query("SELECT * WHERE { ?x locIn* ?y }")
    cat = _catalog_with({0: 50}, vertex_count=1000, prop_vertices={0: 42}, reach={0: 0.1})
    model = CostModel(g, cat, _dictionary("locIn"), CostConfig(star_scope="vd"))
    assert model.leaf_options(g.vertices[1])[0].est_card == 1000.0


def _leaf(card, vars_, shard=None, mask=1, cost=0.0):
    return PlanNode("DIS", mask, tuple(vars_), float(card), cost, shard, None)


def _model(k=1, gamma=1.0):
    g = compile_query("SELECT * WHERE { ?x p ?y . ?y p ?z }")
    return CostModel(g, _catalog_with({0: 10}), _dictionary("p"), CostConfig(k=k, gamma=gamma))


X, Y, Z = Var("x"), Var("y"), Var("z")


def test_join_cost_single_condition():
    m = _model()
    node = m._make("DHJ", _leaf(100, [X, Y]), _leaf(50, [Y, Z], mask=2), (EquiCondition(Y, 0.1),), Y,
                   (Y, None), (X, Y, Z), 3)
    assert node.join_cost == pytest.approx(500) and node.est_card == pytest.approx(500)


def test_zero_selectivity_collapses_cardinality():
    m = _model()
    node = m._make("DHJ", _leaf(100, [X, Y]), _leaf(50, [Y, Z], mask=2), (EquiCondition(Y, 0.0),), Y,
                   (Y, None), (X, Y, Z), 3)
    assert node.est_card == 0


def test_residual_cardinalities_across_conditions():
    m = _model()
    conds = (EquiCondition(Y, 0.1), EquiCondition(X, 0.5))
    node = m._make("DHJ", _leaf(100, [X, Y]), _leaf(50, [X, Y], mask=2), conds, Y, (Y, None), (X, Y), 3)
    assert node.join_cost == pytest.approx(500 + 250)
    assert node.est_card == pytest.approx(250)


def test_shipping_cost():
    m = _model(k=2)
    aligned = m._make("DHJ", _leaf(1000, [X, Y], shard=Y), _leaf(10, [Y, Z], shard=Y, mask=2),
                      (EquiCondition(Y, 0.1),), Y, (Y, None), (X, Y, Z), 3)
    assert aligned.ship_cost == 0 and aligned.reshard == (False, False)
    marked = m._make("DHJ", _leaf(1000, [X, Y], shard=X), _leaf(10, [Y, Z], shard=Y, mask=2),
                     (EquiCondition(Y, 0.1),), Y, (Y, None), (X, Y, Z), 3)
    assert marked.reshard == (True, False) and marked.ship_cost == pytest.approx(2000)


def test_cost_monotone_in_child_cost():
    m = _model()
    cond = (EquiCondition(Y, 0.1),)
    costs = [m._make("DHJ", _leaf(10, [X, Y], cost=c), _leaf(10, [Y, Z], mask=2, cost=5.0), cond, Y,
                     (Y, None), (X, Y, Z), 3).est_cost for c in (0.0, 3.0, 5.0, 9.0, 100.0)]
    assert costs == sorted(costs)


def test_single_vertex_plan_is_a_scan():
    store = worked_example_store()
    plan = plan_query(compile_query("SELECT * WHERE { ?x workedAt ?y }"), store.catalog, store.dictionary)
    assert plan.is_leaf and plan.op == "DIS"


def test_worked_example_plan_space_contains_two_condition_drj():
    store = worked_example_store(k=2)
    g = compile_query(WORKED_EXAMPLE_QUERY)
    opt = Optimizer(g, store.catalog, store.dictionary, CostConfig(k=2))
    r12, r3 = 0b0011, 0b0100
    found = []
    for plan in opt.exhaustive_plans(r12 | r3):
        if plan.op == "DRJ" and {c.vertex_set for c in plan.children} == {r12, r3}:
            found.append({str(c.predicate.atom.prop.lexical) for c in plan.reach_conditions})
    assert {"workedWith", "sameState"} in found


def test_both_condition_orders_enumerated():
    store = worked_example_store(k=2)
    g = compile_query(WORKED_EXAMPLE_QUERY)
    model = CostModel(g, store.catalog, store.dictionary, CostConfig(k=2))
    left = model.join_options(model.leaf_options(g.vertices[0])[0], model.leaf_options(g.vertices[1])[0])[0]
    orders = {tuple(c.predicate.atom.prop.lexical for c in p.reach_conditions)
              for p in model.join_options(left, model.leaf_options(g.vertices[2])[0])}
    assert {("workedWith", "sameState"), ("sameState", "workedWith")} <= orders


@pytest.mark.parametrize("seed", range(25))
def test_dp_matches_exhaustive_search(seed):
    inst = gen_instance(seed, vertices=40, n_queries=4, patterns=3)
    arr, d = inst.encoded()
    store = Store.build(arr, d, k=2, sample_size=300)
    for q in inst.queries:
        g = compile_query(q)
        if len(g) > 5:
            continue
        opt = Optimizer(g, store.catalog, store.dictionary, CostConfig(k=2))
        assert opt.enumerate().est_cost == pytest.approx(opt.exhaustive_min_cost())


def test_single_partition_plan_has_no_reshard_marks():
    store = worked_example_store(k=1)
    plan = plan_query(compile_query(WORKED_EXAMPLE_QUERY), store.catalog, store.dictionary)
    assert not any(any(n.reshard) for n in plan.walk())
    assert not any(any(n.reshard) for n in annotate_sharding(plan, 1).walk())


def test_merge_join_over_aligned_scans_marks_at_most_one_side():
    rows = "".join(f"<s{i}> <p> <o{i}> .\n<s{i}> <q> <o{i + 1}> .\n" for i in range(20))
    from reachjoin.rdf import parse_ntriples_text
    arr, d = parse_ntriples_text(rows)
    store = Store.build(arr, d, k=3, sample_size=200)
    g = compile_query("SELECT * WHERE { ?x p ?y . ?x q ?z }")
    opt = Optimizer(g, store.catalog, store.dictionary, CostConfig(k=3))
    dmj = [p for p in opt.exhaustive_plans() if p.op == "DMJ"]
    assert dmj and min(sum(p.reshard) for p in dmj) == 0
    assert all(sum(p.reshard) <= 1 for p in dmj if all(c.is_leaf for c in p.children)
               and p.children[0].shard_key == p.children[1].shard_key)


def test_drj_with_misaligned_sources_marks_both_sides():
    store = worked_example_store(k=2)
    g = compile_query("SELECT * WHERE { ?a workedAt ?u . ?b workedAt ?v . ?u sameState* ?v }")
    opt = Optimizer(g, store.catalog, store.dictionary, CostConfig(k=2))
    drj = [p for p in opt.exhaustive_plans() if p.op == "DRJ"]
    # scans sharded on ?a / ?b, reach condition needs ?u / ?v: both sides move
    assert any(p.reshard == (True, True) for p in drj
               if {c.shard_key for c in p.children} == {Var("a"), Var("b")})


def test_unknown_reach_property_is_a_planning_error():
    store = worked_example_store()
    with pytest.raises(PlanningError):
        plan_query(compile_query("SELECT * WHERE { ?x workedAt ?y . ?y nosuch* ?z }"),
                   store.catalog, store.dictionary)


def test_greedy_fallback_for_large_queries():
    store = worked_example_store(k=2)
    g = compile_query(WORKED_EXAMPLE_QUERY)
    plan = Optimizer(g, store.catalog, store.dictionary, CostConfig(k=2, dp_limit=2)).enumerate()
    assert plan.vertex_set == (1 << len(g)) - 1


def test_explain_renders():
    store = worked_example_store(k=2)
    plan = plan_query(compile_query(WORKED_EXAMPLE_QUERY), store.catalog, store.dictionary, CostConfig(k=2))
    text = explain_text(plan)
    assert "DRJ" in text and text.count("DIS") == 4
    assert explain_dot(plan).startswith("digraph")
