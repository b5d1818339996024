"""Exact cardinalities, pairwise join selectivities and sampled reachability selectivities."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .reach_index import PropertyReachIndex, UnknownProperty
from .triple_index import PartitionIndexes, Permutation

JOIN_ROLES = ("ss", "so", "os", "oo")
DEFAULT_SAMPLE_SIZE = 10_000


class CountTable:
    """Sorted integer keys (single ids or packed id pairs) with exact counts."""

    def __init__(self, keys: np.ndarray, counts: np.ndarray, base: int = 0):
        self.keys = np.asarray(keys, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.base = base

    @classmethod
    def of(cls, values: np.ndarray, base: int = 0) -> "CountTable":
        keys, counts = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
        return cls(keys, counts, base)

    @classmethod
    def of_pairs(cls, a: np.ndarray, b: np.ndarray, base: int) -> "CountTable":
        return cls.of(np.asarray(a, np.int64) * base + np.asarray(b, np.int64), base)

    @classmethod
    def merge(cls, tables: Sequence["CountTable"]) -> "CountTable":
        base = max((t.base for t in tables), default=0)
        if not tables:
            return cls(np.empty(0, np.int64), np.empty(0, np.int64), base)
        keys = np.concatenate([t.keys for t in tables])
        counts = np.concatenate([t.counts for t in tables])
        uk, inv = np.unique(keys, return_inverse=True)
        total = np.zeros(len(uk), dtype=np.int64)
        np.add.at(total, inv, counts)
        return cls(uk, total, base)

    def __len__(self) -> int:
        return len(self.keys)

    def get(self, key: int, key2: int | None = None) -> int:
        if key2 is not None:
            key = int(key) * self.base + int(key2)
        i = int(np.searchsorted(self.keys, key))
        if i < len(self.keys) and self.keys[i] == key:
            return int(self.counts[i])
        return 0

    def items(self) -> Iterable[tuple[tuple[int, ...], int]]:
        for k, c in zip(self.keys.tolist(), self.counts.tolist()):
            yield ((k // self.base, k % self.base) if self.base else (k,)), c

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, CountTable) and np.array_equal(self.keys, other.keys)
                and np.array_equal(self.counts, other.counts))


@dataclass
class StatsCatalog:
    card_key: dict[str, CountTable] = field(default_factory=dict)     # 's', 'p', 'o'
    card_pair: dict[str, CountTable] = field(default_factory=dict)    # 'so', 'ps', 'po'
    join_sel: dict[tuple[int, int, str], float] = field(default_factory=dict)
    reach_sel: dict[int, float] = field(default_factory=dict)
    vertex_count: int = 0
    property_vertices: dict[int, int] = field(default_factory=dict)   # |V^p|
    property_edges: dict[int, int] = field(default_factory=dict)      # |E^p|
    sample_size: int = DEFAULT_SAMPLE_SIZE
    sample_seed: int = 0

    # --- lookups used by the cost model -----------------------------------
    def card_property(self, p: int | None) -> int:
        return 0 if p is None else self.card_key["p"].get(p)

    def card_ps(self, p: int, s: int) -> int:
        return self.card_pair["ps"].get(p, s)

    def card_po(self, p: int, o: int) -> int:
        return self.card_pair["po"].get(p, o)

    def join_selectivity(self, pi: int, pj: int, role: str) -> float:
        return self.join_sel.get((pi, pj, role), 0.0)

    def reach_selectivity(self, p: int) -> float:
        if p not in self.reach_sel:
            raise UnknownProperty(p)
        return self.reach_sel[p]

    # --- persistence ------------------------------------------------------
    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"meta\tvertex_count\t{self.vertex_count}\n")
            fh.write(f"meta\tsample\t{self.sample_size}\t{self.sample_seed}\n")
            for name in ("s", "p", "o"):
                for (k,), c in self.card_key[name].items():
                    fh.write(f"card_{name}\t{k}\t{c}\n")
            for name in ("so", "ps", "po"):
                fh.write(f"base_{name}\t{self.card_pair[name].base}\n")
                for (a, b), c in self.card_pair[name].items():
                    fh.write(f"card_{name}\t{a}\t{b}\t{c}\n")
            for (pi, pj, role), sel in sorted(self.join_sel.items()):
                fh.write(f"join\t{pi}\t{pj}\t{role}\t{sel!r}\n")
            for p, sel in sorted(self.reach_sel.items()):
                fh.write(f"reach\t{p}\t{sel!r}\n")
            for p in sorted(self.property_vertices):
                fh.write(f"vp\t{p}\t{self.property_vertices[p]}\t{self.property_edges[p]}\n")

    @classmethod
    def load(cls, path: str | Path) -> "StatsCatalog":
        single: dict[str, list[tuple[int, int]]] = {n: [] for n in ("s", "p", "o")}
        pairs: dict[str, list[tuple[int, int, int]]] = {n: [] for n in ("so", "ps", "po")}
        bases: dict[str, int] = {}
        cat = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                f = line.rstrip("\n").split("\t")
                kind = f[0]
                if kind == "meta" and f[1] == "vertex_count":
                    cat.vertex_count = int(f[2])
                elif kind == "meta" and f[1] == "sample":
                    cat.sample_size, cat.sample_seed = int(f[2]), int(f[3])
                elif kind.startswith("base_"):
                    bases[kind[5:]] = int(f[1])
                elif kind.startswith("card_") and kind[5:] in single:
                    single[kind[5:]].append((int(f[1]), int(f[2])))
                elif kind.startswith("card_"):
                    pairs[kind[5:]].append((int(f[1]), int(f[2]), int(f[3])))
                elif kind == "join":
                    cat.join_sel[(int(f[1]), int(f[2]), f[3])] = float(f[4])
                elif kind == "reach":
                    cat.reach_sel[int(f[1])] = float(f[2])
                elif kind == "vp":
                    cat.property_vertices[int(f[1])] = int(f[2])
                    cat.property_edges[int(f[1])] = int(f[3])
        for name, rows in single.items():
            arr = np.asarray(rows, dtype=np.int64).reshape(-1, 2)
            cat.card_key[name] = CountTable(arr[:, 0], arr[:, 1])
        for name, rows in pairs.items():
            arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
            base = bases.get(name, 1)
            cat.card_pair[name] = CountTable(arr[:, 0] * base + arr[:, 1], arr[:, 2], base)
        return cat


def _subject_rows(indexes: Sequence[PartitionIndexes]) -> list[np.ndarray]:
    # subject-keyed copies: each distinct triple exactly once across partitions
    return [ix[Permutation.SPO].rows() for ix in indexes]


def compute_cardinalities(indexes: Sequence[PartitionIndexes], n_terms: int) -> StatsCatalog:
    """Per-partition partial counts over subject-owned rows, summed at the master."""
    partials: dict[str, list[CountTable]] = {n: [] for n in ("s", "p", "o", "so", "ps", "po")}
    base = max(int(n_terms), 1)
    for rows in _subject_rows(indexes):
        s, p, o = rows[:, 0], rows[:, 1], rows[:, 2]
        partials["s"].append(CountTable.of(s))
        partials["p"].append(CountTable.of(p))
        partials["o"].append(CountTable.of(o))
        partials["so"].append(CountTable.of_pairs(s, o, base))
        partials["ps"].append(CountTable.of_pairs(p, s, base))
        partials["po"].append(CountTable.of_pairs(p, o, base))
    cat = StatsCatalog()
    for name in ("s", "p", "o"):
        cat.card_key[name] = CountTable.merge(partials[name])
    for name in ("so", "ps", "po"):
        merged = CountTable.merge(partials[name])
        merged.base = base
        cat.card_pair[name] = merged
    return cat


def _role_counts(cat: StatsCatalog) -> dict[int, dict[str, tuple[np.ndarray, np.ndarray]]]:
    out: dict[int, dict[str, tuple[np.ndarray, np.ndarray]]] = {}
    for name, role in (("ps", "s"), ("po", "o")):
        table = cat.card_pair[name]
        if len(table) == 0:
            continue
        props = table.keys // table.base
        vals = table.keys % table.base
        uniq, starts = np.unique(props, return_index=True)
        ends = list(starts[1:]) + [len(props)]
        for p, a, b in zip(uniq.tolist(), starts.tolist(), ends):
            out.setdefault(p, {})[role] = (vals[a:b], table.counts[a:b])
    return out


def compute_join_selectivities(cat: StatsCatalog) -> StatsCatalog:
    """Sel(p_i, p_j, role) = |equi-join on the role positions| / (Card(p_i) * Card(p_j))."""
    counts = _role_counts(cat)
    props = sorted(counts)
    for pi in props:
        ci = cat.card_property(pi)
        for pj in props:
            cj = cat.card_property(pj)
            for role in JOIN_ROLES:
                vi, ni = counts[pi][role[0]]
                vj, nj = counts[pj][role[1]]
                _, ai, aj = np.intersect1d(vi, vj, assume_unique=True, return_indices=True)
                size = int(np.dot(ni[ai], nj[aj])) if len(ai) else 0
                cat.join_sel[(pi, pj, role)] = size / (ci * cj) if ci and cj else 0.0
    return cat


def sample_reach_selectivity(index: PropertyReachIndex, sample_size: int = DEFAULT_SAMPLE_SIZE,
                             seed: int = 0) -> float:
    """Fraction of (s, t) in V^p x V^p with s ~> t; exhaustive when |V^p|^2 <= sample_size."""
    verts = index.vertices
    n = len(verts)
    if n == 0:
        raise UnknownProperty(index.p)
    if n * n <= sample_size:
        s = np.repeat(verts, n)
        t = np.tile(verts, n)
    else:
        rng = np.random.default_rng([seed, index.p])
        s = verts[rng.integers(0, n, size=sample_size)]
        t = verts[rng.integers(0, n, size=sample_size)]
    hits = index.reach_pairs(zip(s.tolist(), t.tolist()))
    return float(np.count_nonzero(hits)) / len(hits)


def build_catalog(indexes: Sequence[PartitionIndexes], n_terms: int,
                  reach: Mapping[int, PropertyReachIndex], vertex_count: int,
                  property_vertices: Mapping[int, int], property_edges: Mapping[int, int],
                  sample_size: int = DEFAULT_SAMPLE_SIZE, seed: int = 0) -> StatsCatalog:
    cat = compute_cardinalities(indexes, n_terms)
    compute_join_selectivities(cat)
    cat.sample_size, cat.sample_seed = sample_size, seed
    cat.vertex_count = vertex_count
    cat.property_vertices = dict(property_vertices)
    cat.property_edges = dict(property_edges)
    for p in sorted(reach):
        cat.reach_sel[p] = sample_reach_selectivity(reach[p], sample_size, seed)
    return cat
