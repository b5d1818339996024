from __future__ import annotations

import networkx as nx
import numpy as np
import pytest

from reachjoin.reach_index import (UnknownProperty, build_bipartite_summary, build_property_reach_index,
                                   compress_boundaries, compute_boundaries, property_subgraph_from_edges)

from _util import random_edges

P = 100          # property id used throughout; vertex ids stay below it


def _owners(n, k, rng=None):
    if rng is None:
        return np.arange(n) % k
    return rng.integers(0, k, size=n)


# chain a -> b -> c with a, b on partition 0 and c on partition 1
A, B, C = 0, 1, 2
CHAIN = np.array([[A, B], [B, C]])
CHAIN_OWNERS = np.array([0, 0, 1])


def test_chain_boundaries():
    g0 = property_subgraph_from_edges(P, 0, CHAIN, CHAIN_OWNERS)
    g1 = property_subgraph_from_edges(P, 1, CHAIN, CHAIN_OWNERS)
    b0, b1 = compute_boundaries(g0, CHAIN_OWNERS), compute_boundaries(g1, CHAIN_OWNERS)
    assert b0.out_boundary.tolist() == [B] and b0.in_boundary.tolist() == []
    assert b1.in_boundary.tolist() == [C] and b1.out_boundary.tolist() == []


def test_chain_frontier_and_reachability():
    idx = build_property_reach_index(P, CHAIN, CHAIN_OWNERS, 2)
    assert idx.frontier_entries(A) == {0: [A], 1: [C]}
    assert idx.reaches(A, C) and idx.reaches(A, B)
    assert not idx.reaches(C, A)


def test_single_partition_has_no_boundaries():
    rng = np.random.default_rng(0)
    edges = random_edges(rng, 30, 60)
    idx = build_property_reach_index(P, edges, np.zeros(30, dtype=np.int64), 1)
    assert all(len(b.in_boundary) == 0 and len(b.out_boundary) == 0 for b in idx.boundaries)
    assert len(idx.summaries[0].edges) == 0


def test_two_cycle_is_one_component():
    edges = np.array([[0, 1], [1, 0], [1, 2]])
    idx = build_property_reach_index(P, edges, np.zeros(3, dtype=np.int64), 1)
    dag = idx.dags[0]
    assert dag.scc_of(0) == dag.scc_of(1) != dag.scc_of(2)
    assert idx.reaches(1, 0) and idx.reaches(0, 2) and not idx.reaches(2, 0)


def test_cycle_spanning_partitions():
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    idx = build_property_reach_index(P, edges, np.array([0, 1, 0, 1]), 2)
    for s in range(4):
        for t in range(4):
            assert idx.reaches(s, t)


def test_empty_property_is_unknown():
    with pytest.raises(UnknownProperty):
        build_property_reach_index(P, np.empty((0, 2)), np.zeros(1, dtype=np.int64), 1)


def _internal_reach_pairs(edges, owners, home, ins, outs):
    g = nx.DiGraph()
    g.add_nodes_from(set(ins) | set(outs))
    g.add_edges_from((s, t) for s, t in edges.tolist() if owners[s] == home and owners[t] == home)
    return {(a, c) for a in ins for c in outs if nx.has_path(g, a, c)}


@pytest.mark.parametrize("seed", range(20))
def test_compression_is_lossless(seed):
    rng = np.random.default_rng(seed)
    n, k = 40, int(rng.integers(2, 5))
    edges = random_edges(rng, n, 90)
    owners = _owners(n, k, rng)
    for home in range(k):
        g = property_subgraph_from_edges(P, home, edges, owners)
        b = compute_boundaries(g, owners)
        comp = compress_boundaries(g, b, owners)
        summary = build_bipartite_summary(g, comp)
        want = _internal_reach_pairs(edges, owners, home, b.in_boundary.tolist(), b.out_boundary.tolist())
        assert summary.member_pairs() == want
        # virtual vertices partition each boundary
        assert sorted(np.concatenate(comp.in_members).tolist() if comp.in_members else []) == b.in_boundary.tolist()
        assert sorted(np.concatenate(comp.out_members).tolist() if comp.out_members else []) == b.out_boundary.tolist()


@pytest.mark.parametrize("seed", range(30))
def test_distributed_reachability_matches_global_search(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(5, 40))
    k = int(rng.integers(1, 6))
    edges = random_edges(rng, n, int(rng.integers(n // 2, 3 * n)))
    owners = _owners(n, k, rng if seed % 2 else None)
    idx = build_property_reach_index(P, edges, owners, k)
    for dag in idx.dags:
        dag.check_acyclic()
    g = nx.DiGraph(edges.tolist())
    verts = sorted(g.nodes)
    pairs = [(s, t) for s in verts for t in verts]
    got = idx.reach_pairs(pairs)
    want = [nx.has_path(g, s, t) for s, t in pairs]
    assert got.tolist() == want


def test_frontier_lists_remote_entries_only():
    # 0 -> 1 -> 2 -> 3, alternating partitions; 0 reaches entries 1 and 3 on partition 1
    edges = np.array([[0, 1], [1, 2], [2, 3]])
    owners = np.array([0, 1, 0, 1])
    idx = build_property_reach_index(P, edges, owners, 2)
    fr = idx.dags[0].frontier([0, 2])
    assert fr[0] == {1: [1, 3]}
    assert fr[2] == {1: [3]}
    assert idx.dags[1].frontier([3]) == {3: {}}
