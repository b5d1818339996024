"""Indexing phase: dictionary, sharding, triple indexes, reach indexes and statistics.

A :class:`Store` holds everything the workers and the planner need and can be
written to / read from a directory::

    meta.json               k, term count, sampling parameters
    dictionary.tsv          id <TAB> kind <TAB> lexical
    partition.tsv           explicit vertex assignment (file mode only)
    stats.tsv               statistics catalog
    index/part-<i>.rjtx     six permutation indexes of partition i
    reach/p<p>.vertices     V^p of property p and its per-partition boundary sets
    reach/p<p>-part<i>.rjrx compound DAG of (p, i)
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _binio
from .partition import PartitionAssignment, load_partition_file, save_partition_file
from .rdf import DataGraphMeta, Dictionary, unique_triples
from .reach_index import BoundarySets, CompoundDag, PropertyReachIndex, build_property_reach_index
from .stats import DEFAULT_SAMPLE_SIZE, StatsCatalog, build_catalog
from .triple_index import PartitionIndexes, Permutation, build_indexes

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class Store:
    dictionary: Dictionary
    k: int
    assignment: PartitionAssignment
    owners: np.ndarray                      # owner partition of every term id
    indexes: list[PartitionIndexes]
    reach: dict[int, PropertyReachIndex]
    catalog: StatsCatalog
    is_vertex: np.ndarray                   # bool per term id: occurs as subject or object
    build_seconds: dict[str, float] = field(default_factory=dict)

    @property
    def n_terms(self) -> int:
        return len(self.dictionary)

    @property
    def triple_count(self) -> int:
        return sum(len(ix[Permutation.SPO]) for ix in self.indexes)

    def triples(self) -> np.ndarray:
        """The distinct global triple set, reassembled from subject-keyed shards."""
        parts = [ix[Permutation.SPO].rows() for ix in self.indexes]
        return unique_triples(np.concatenate(parts) if parts else np.empty((0, 3), np.int64))

    # --- building -------------------------------------------------------------
    @classmethod
    def build(cls, triples: np.ndarray, dictionary: Dictionary, k: int = 1,
              assignment: PartitionAssignment | None = None,
              sample_size: int = DEFAULT_SAMPLE_SIZE, seed: int = 0) -> "Store":
        times: dict[str, float] = {}
        t0 = time.perf_counter()
        dictionary.freeze()
        assignment = assignment or PartitionAssignment(k)
        if assignment.k != k:
            raise ValueError(f"assignment is for k={assignment.k}, store for k={k}")
        n_terms = len(dictionary)
        owners = assignment.owner_array(n_terms)
        t = unique_triples(triples)
        indexes = [build_indexes(t, i, owners) for i in range(k)]
        times["triple_index"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        meta = DataGraphMeta.from_triples(t)
        reach: dict[int, PropertyReachIndex] = {}
        by_prop = t[np.argsort(t[:, 1], kind="stable")]
        props, starts = np.unique(by_prop[:, 1], return_index=True)
        bounds = list(starts[1:]) + [len(by_prop)]
        for p, a, b in zip(props.tolist(), starts.tolist(), bounds):
            edges = by_prop[a:b][:, [0, 2]]
            reach[p] = build_property_reach_index(p, edges, owners, k, partition_indexes=indexes)
        times["reach_index"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        is_vertex = np.zeros(n_terms, dtype=bool)
        if len(t):
            is_vertex[t[:, 0]] = True
            is_vertex[t[:, 2]] = True
        catalog = build_catalog(indexes, n_terms, reach, meta.vertex_count,
                                meta.vertices_per_property, meta.edges_per_property,
                                sample_size=sample_size, seed=seed)
        times["stats"] = time.perf_counter() - t0
        return cls(dictionary, k, assignment, owners, indexes, reach, catalog, is_vertex, times)

    # --- persistence ----------------------------------------------------------
    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        (d / "index").mkdir(parents=True, exist_ok=True)
        (d / "reach").mkdir(parents=True, exist_ok=True)
        meta = {"version": FORMAT_VERSION, "k": self.k, "n_terms": self.n_terms,
                "partition_mode": self.assignment.mode,
                "sample_size": self.catalog.sample_size, "seed": self.catalog.sample_seed,
                "properties": sorted(self.reach)}
        (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        self.dictionary.save(d / "dictionary.tsv")
        if self.assignment.explicit:
            save_partition_file(d / "partition.tsv", self.assignment, self.dictionary)
        self.catalog.save(d / "stats.tsv")
        for ix in self.indexes:
            ix.save(d / "index" / f"part-{ix.partition}.rjtx")
        for p, r in sorted(self.reach.items()):
            with open(d / "reach" / f"p{p}.vertices", "wb") as fh:
                arrays = {"vertices": r.vertices}
                for i, b in enumerate(r.boundaries):
                    arrays[f"in{i}"] = b.in_boundary
                    arrays[f"out{i}"] = b.out_boundary
                _binio.write_arrays(fh, b"RJVP", 1, arrays)
            for dag in r.dags:
                dag.save(d / "reach" / f"p{p}-part{dag.partition}.rjrx")

    @classmethod
    def load(cls, directory: str | Path) -> "Store":
        d = Path(directory)
        meta = json.loads((d / "meta.json").read_text())
        if meta.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported store version {meta.get('version')}")
        k = int(meta["k"])
        dictionary = Dictionary.load(d / "dictionary.tsv").freeze()
        if (d / "partition.tsv").exists():
            assignment = load_partition_file(d / "partition.tsv", dictionary, k)
        else:
            assignment = PartitionAssignment(k)
        owners = assignment.owner_array(len(dictionary))
        indexes = [PartitionIndexes.load(d / "index" / f"part-{i}.rjtx") for i in range(k)]
        reach: dict[int, PropertyReachIndex] = {}
        for p in meta["properties"]:
            with open(d / "reach" / f"p{p}.vertices", "rb") as fh:
                arrays = _binio.read_arrays(fh, b"RJVP", 1)
            dags = [CompoundDag.load(d / "reach" / f"p{p}-part{i}.rjrx") for i in range(k)]
            boundaries = [BoundarySets(arrays[f"in{i}"], arrays[f"out{i}"])
                          for i in range(k) if f"in{i}" in arrays]
            reach[int(p)] = PropertyReachIndex(int(p), k, dags, owners, arrays["vertices"],
                                               boundaries=boundaries)
        catalog = StatsCatalog.load(d / "stats.tsv")
        is_vertex = np.zeros(len(dictionary), dtype=bool)
        for ix in indexes:
            rows = ix[Permutation.SPO].rows()
            is_vertex[rows[:, 0]] = True
            is_vertex[rows[:, 2]] = True
        return cls(dictionary, k, assignment, owners, indexes, reach, catalog, is_vertex)

    # --- reporting ---------------------------------------------------------------
    def summary(self) -> str:
        lines = [f"triples: {self.triple_count}", f"distinct terms: {self.n_terms}",
                 f"properties: {len(self.reach)}", f"partitions: {self.k} ({self.assignment.mode})"]
        for ix in self.indexes:
            sizes = ix.sizes()
            lines.append(f"  partition {ix.partition}: subject-keyed {sizes['SPO']}, "
                         f"object-keyed {sizes['OSP']}")
        boundary = sum(len(b.in_boundary) + len(b.out_boundary)
                       for r in self.reach.values() for b in r.boundaries)
        comps = sum(dag.component_count for r in self.reach.values() for dag in r.dags)
        lines.append(f"boundary vertices: {boundary}; compound DAG components: {comps}")
        return "\n".join(lines)
