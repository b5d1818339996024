from __future__ import annotations

import itertools

import numpy as np
import pytest

from reachjoin.partition import PartitionAssignment
from reachjoin.triple_index import (PERMUTATIONS, PartitionIndexes, Permutation, PermutationIndex,
                                    ScanPattern, build_indexes, select_permutation, valid_permutations)


def _random_triples(rng, n, vocab=40):
    return rng.integers(0, vocab, size=(n, 3)).astype(np.int64)


def test_three_distinct_triples_in_every_permutation():
    t = np.array([[0, 1, 2], [2, 1, 3], [3, 4, 0]])
    ix = PartitionIndexes.build(0, t, t)
    assert all(len(ix[p]) == 3 for p in PERMUTATIONS)


def test_duplicates_collapse():
    t = np.array([[0, 1, 2], [0, 1, 2], [2, 1, 3]])
    ix = PartitionIndexes.build(0, t, t)
    assert all(len(ix[p]) == 2 for p in PERMUTATIONS)


def test_ops_sorted_against_independent_sort():
    rng = np.random.default_rng(0)
    t = _random_triples(rng, 10_000, vocab=200)
    idx = PermutationIndex.build(Permutation.OPS, t)
    expected = sorted({(o, p, s) for s, p, o in t.tolist()})
    assert [tuple(r) for r in idx.keys.tolist()] == expected


def test_select_permutation_examples():
    assert select_permutation(["s", "p"]) is Permutation.SPO
    assert valid_permutations(["p"]) == [Permutation.PSO, Permutation.POS]
    assert select_permutation(["p"]) is Permutation.PSO
    assert select_permutation(["p"], group="object") is Permutation.POS
    assert select_permutation([]) is Permutation.SPO
    assert select_permutation(["s", "p", "o"]) is Permutation.SPO


def test_constants_are_a_prefix_of_every_valid_permutation():
    for r in range(4):
        for consts in itertools.combinations(range(3), r):
            for perm in valid_permutations(consts):
                assert set(perm.columns[:r]) == set(consts)


def test_prefix_scan_on_ops():
    t = np.array([[1, 5, 7], [2, 4, 7], [3, 5, 8], [0, 5, 7]])
    idx = PermutationIndex.build(Permutation.OPS, t)
    rows = idx.scan_array(ScanPattern.of(o=7)).tolist()
    assert rows == [[2, 4, 7], [0, 5, 7], [1, 5, 7]]     # sorted by (p, s)
    assert idx.scan_array(ScanPattern.of(o=99)).shape == (0, 3)


def test_prefix_incompatible_with_order_rejected():
    idx = PermutationIndex.build(Permutation.SPO, np.array([[0, 1, 2]]))
    with pytest.raises(ValueError):
        idx.scan_array(ScanPattern.of(o=2))


def test_scan_equals_linear_filter_on_random_keys():
    rng = np.random.default_rng(1)
    t = np.unique(_random_triples(rng, 3000), axis=0)
    built = {p: PermutationIndex.build(p, t) for p in PERMUTATIONS}
    for _ in range(1000):
        r = int(rng.integers(0, 4))
        positions = tuple(sorted(rng.choice(3, size=r, replace=False).tolist()))
        values = {pos: int(rng.integers(0, 40)) for pos in positions}
        perm = valid_permutations(positions)[int(rng.integers(len(valid_permutations(positions))))]
        got = built[perm].scan_array(ScanPattern(tuple(values.items())))
        mask = np.ones(len(t), dtype=bool)
        for pos, v in values.items():
            mask &= t[:, pos] == v
        assert {tuple(x) for x in got.tolist()} == {tuple(x) for x in t[mask].tolist()}
        keys = got[:, list(perm.columns)]
        assert all(tuple(a) <= tuple(b) for a, b in zip(keys[:-1].tolist(), keys[1:].tolist()))


@pytest.mark.parametrize("k", [1, 2, 4])
def test_subject_and_object_groups_cover_the_triple_set(k):
    rng = np.random.default_rng(k)
    t = np.unique(_random_triples(rng, 500), axis=0)
    owners = PartitionAssignment(k).owner_array(40)
    parts = [build_indexes(t, i, owners) for i in range(k)]
    want = {tuple(r) for r in t.tolist()}
    for perm in (Permutation.SPO, Permutation.OPS):
        rows = np.concatenate([p[perm].rows() for p in parts])
        assert len(rows) == len(want)
        assert {tuple(r) for r in rows.tolist()} == want


def test_snapshot_round_trip_is_byte_identical(tmp_path):
    rng = np.random.default_rng(2)
    t = _random_triples(rng, 400)
    ix = PartitionIndexes.build(3, t, t)
    ix.save(tmp_path / "a.rjtx")
    back = PartitionIndexes.load(tmp_path / "a.rjtx")
    assert back.partition == 3
    for p in PERMUTATIONS:
        assert np.array_equal(back[p].keys, ix[p].keys)
    back.save(tmp_path / "b.rjtx")
    assert (tmp_path / "a.rjtx").read_bytes() == (tmp_path / "b.rjtx").read_bytes()
