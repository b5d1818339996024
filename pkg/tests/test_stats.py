from __future__ import annotations

import networkx as nx
import numpy as np
import pytest

from reachjoin.partition import PartitionAssignment
from reachjoin.reach_index import build_property_reach_index
from reachjoin.stats import (CountTable, StatsCatalog, compute_cardinalities, compute_join_selectivities,
                             sample_reach_selectivity)
from reachjoin.triple_index import PartitionIndexes, build_indexes

from _util import random_edges, random_encoded


def _catalog(triples, k=1, n_terms=None):
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    n_terms = n_terms or (int(triples.max()) + 1 if len(triples) else 1)
    owners = PartitionAssignment(k).owner_array(n_terms)
    indexes = [build_indexes(triples, i, owners) for i in range(k)]
    return compute_join_selectivities(compute_cardinalities(indexes, n_terms))


def test_property_cardinality():
    cat = _catalog([[0, 9, 1], [1, 9, 2], [2, 9, 3], [0, 8, 1]])
    assert cat.card_property(9) == 3
    assert cat.card_ps(9, 0) == 1 and cat.card_po(8, 1) == 1
    assert cat.card_key["s"].get(0) == 2


def test_empty_dataset_gives_empty_tables():
    empty = np.empty((0, 3), np.int64)
    cat = compute_cardinalities([PartitionIndexes.build(0, empty, empty)], 1)
    assert all(len(t) == 0 for t in cat.card_key.values())
    assert all(len(t) == 0 for t in cat.card_pair.values())
    assert compute_join_selectivities(cat).join_sel == {}


@pytest.mark.parametrize("k", [2, 3, 5])
def test_partial_counts_merge_to_the_single_partition_values(k):
    arr, d = random_encoded(k, 120)
    one = _catalog(arr, 1, len(d))
    many = _catalog(arr, k, len(d))
    for name in one.card_key:
        assert one.card_key[name] == many.card_key[name]
    for name in one.card_pair:
        assert one.card_pair[name] == many.card_pair[name]
    assert one.join_sel == many.join_sel


def test_disjoint_values_have_zero_selectivity():
    cat = _catalog([[0, 10, 1], [2, 11, 3]])
    assert cat.join_selectivity(10, 11, "ss") == 0.0
    assert cat.join_selectivity(10, 11, "oo") == 0.0


def test_subject_self_join_selectivity():
    n = 8
    cat = _catalog([[i, 20, 10 + i] for i in range(n)])
    assert cat.join_selectivity(20, 20, "ss") == pytest.approx(1 / n)


def test_join_selectivity_against_nested_loop():
    arr, d = random_encoded(4, 60)
    cat = _catalog(arr, 2, len(d))
    t = np.unique(arr, axis=0)
    pos = {"s": 0, "o": 2}
    for pi in np.unique(t[:, 1]).tolist():
        for pj in np.unique(t[:, 1]).tolist():
            a, b = t[t[:, 1] == pi], t[t[:, 1] == pj]
            for role in ("ss", "so", "os", "oo"):
                size = int((a[:, pos[role[0]], None] == b[None, :, pos[role[1]]]).sum())
                assert cat.join_selectivity(pi, pj, role) == pytest.approx(size / (len(a) * len(b)))


def test_count_table_pairs_round_trip():
    t = CountTable.of_pairs(np.array([1, 1, 2]), np.array([5, 5, 7]), 10)
    assert dict(t.items()) == {(1, 5): 2, (2, 7): 1}


def test_reach_selectivity_one_component():
    n = 6
    edges = np.array([[i, (i + 1) % n] for i in range(n)])
    idx = build_property_reach_index(50, edges, np.arange(n) % 2, 2)
    assert sample_reach_selectivity(idx, sample_size=1000) == 1.0


def test_reach_selectivity_without_paths():
    n = 10
    edges = np.array([[i, i] for i in range(n)])          # self loops only: V^p = n vertices
    idx = build_property_reach_index(50, edges, np.zeros(n, dtype=np.int64), 1)
    assert sample_reach_selectivity(idx, sample_size=1000) == pytest.approx(1 / n)


def test_sampled_reach_selectivity_within_tolerance():
    rng = np.random.default_rng(7)
    n = 300
    edges = random_edges(rng, n, 330)
    g = nx.DiGraph(edges.tolist())
    exact = sum(len(nx.descendants(g, v)) + 1 for v in g.nodes) / g.number_of_nodes() ** 2
    idx = build_property_reach_index(50, edges, rng.integers(0, 3, size=n), 3)
    est = sample_reach_selectivity(idx, sample_size=10_000, seed=1)
    assert abs(est - exact) <= 0.05
    assert est == sample_reach_selectivity(idx, sample_size=10_000, seed=1)


def test_catalog_save_load(tmp_path):
    from reachjoin.store import Store
    arr, d = random_encoded(2, 50)
    store = Store.build(arr, d, k=2, sample_size=500)
    store.catalog.save(tmp_path / "stats.tsv")
    back = StatsCatalog.load(tmp_path / "stats.tsv")
    assert back.reach_sel == store.catalog.reach_sel
    assert back.join_sel == pytest.approx(store.catalog.join_sel)
    assert back.card_key == store.catalog.card_key and back.card_pair == store.catalog.card_pair
    assert back.property_vertices == store.catalog.property_vertices
