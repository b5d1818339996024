"""Per-property distributed reachability index.

For one property ``p`` and a vertex partitioning, every partition ``i``

1. extracts its p-edges (edges with at least one locally owned endpoint),
2. finds its in-boundaries (local vertices entered by a cut edge) and
   out-boundaries (local vertices leaving through a cut edge),
3. groups boundaries into virtual vertices of identical reachability
   signature and publishes a bipartite in-virtual -> out-virtual summary of
   what is reachable inside the partition,
4. merges the global cut and every remote summary with its own subgraph into
   a compound graph, condensed into a DAG of strongly connected components.

A source ``s`` owned by ``i`` reaches a target ``t`` owned by ``j`` iff some
entry vertex in ``frontier(s)[j]`` (or ``s`` itself when ``i == j``) reaches
``t`` in the compound DAG of ``j``.  One exchange of frontiers decides any
reachability predicate regardless of the graph diameter.
"""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _binio
from .triple_index import PartitionIndexes, Permutation, ScanPattern


class UnknownProperty(KeyError):
    pass


class MissingSummary(KeyError):
    pass


class CyclicCondensation(RuntimeError):
    pass


# --------------------------------------------------------------------------- #
# small graph kernels
# --------------------------------------------------------------------------- #

def _iter_bits(mask: int) -> Iterable[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _dedupe_edges(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if len(src) == 0:
        return src.astype(np.int64), dst.astype(np.int64)
    e = np.unique(np.stack([src, dst], axis=1), axis=0)
    return e[:, 0], e[:, 1]


def condense(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, int, np.ndarray, np.ndarray]:
    """Strongly connected components and the deduplicated edges between them."""
    if n == 0:
        empty = np.empty(0, np.int64)
        return empty, 0, empty, empty
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n)).tocsr()
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    labels = labels.astype(np.int64)
    cs, cd = labels[src], labels[dst]
    keep = cs != cd
    cs, cd = _dedupe_edges(cs[keep], cd[keep])
    return labels, int(ncomp), cs, cd


def to_csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, src + 1, 1)
    return np.cumsum(ptr), dst.astype(np.int64)


def topological_rank(n: int, ptr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Kahn order position of every node; raises if the graph has a cycle."""
    indeg = np.bincount(idx, minlength=n).tolist() if n else []
    adj_ptr, adj = ptr.tolist(), idx.tolist()
    queue = deque(v for v in range(n) if indeg[v] == 0)
    rank = [0] * n
    pos = 0
    while queue:
        v = queue.popleft()
        rank[v] = pos
        pos += 1
        for w in adj[adj_ptr[v]:adj_ptr[v + 1]]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if pos != n:
        raise CyclicCondensation("condensed graph is not acyclic")
    return np.asarray(rank, dtype=np.int64)


def _reach_targets(n: int, src: np.ndarray, dst: np.ndarray,
                   sources: Sequence[int], targets: Sequence[int]) -> dict[int, int]:
    """For local node ids: source -> bitmask over ``targets`` positions reachable (zero-length included)."""
    labels, ncomp, cs, cd = condense(n, src, dst)
    ptr, idx = to_csr(ncomp, cs, cd)
    rank = topological_rank(ncomp, ptr, idx)
    own = defaultdict(int)
    for bit, t in enumerate(targets):
        own[int(labels[t])] |= 1 << bit
    reach: dict[int, int] = {}
    adj_ptr, adj = ptr.tolist(), idx.tolist()
    needed = _reachable_comps({int(labels[s]) for s in sources}, adj_ptr, adj)
    for c in sorted(needed, key=lambda c: -rank[c]):
        m = own.get(c, 0)
        for w in adj[adj_ptr[c]:adj_ptr[c + 1]]:
            m |= reach.get(w, 0)
        reach[c] = m
    return {int(s): reach[int(labels[s])] for s in sources}


def _reachable_comps(starts: Iterable[int], ptr: list[int], adj: list[int]) -> set[int]:
    seen = set(starts)
    stack = list(seen)
    while stack:
        v = stack.pop()
        for w in adj[ptr[v]:ptr[v + 1]]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


# --------------------------------------------------------------------------- #
# per-partition pieces
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class PropertySubgraph:
    """p-edges touching one partition: internal edges plus incident cut edges."""

    p: int
    home: int
    edges: np.ndarray          # (m, 2) distinct (src, dst), sorted
    owned: np.ndarray          # sorted local vertices of V^p

    def internal_edges(self, owners: np.ndarray) -> np.ndarray:
        if len(self.edges) == 0:
            return self.edges
        mask = (owners[self.edges[:, 0]] == self.home) & (owners[self.edges[:, 1]] == self.home)
        return self.edges[mask]


def extract_property_subgraph(indexes: PartitionIndexes, p: int,
                              known_properties: Iterable[int] | None = None) -> PropertySubgraph:
    """Gather p-edges of a partition from its PSO (subject-owned) and POS (object-owned) runs."""
    if known_properties is not None and p not in set(known_properties):
        raise UnknownProperty(p)
    out_rows = indexes[Permutation.PSO].scan_array(ScanPattern(((1, p),)))
    in_rows = indexes[Permutation.POS].scan_array(ScanPattern(((1, p),)))
    rows = np.concatenate([out_rows, in_rows])[:, [0, 2]]
    edges = np.unique(rows, axis=0) if len(rows) else np.empty((0, 2), np.int64)
    owned = np.unique(np.concatenate([out_rows[:, 0], in_rows[:, 2]]))
    return PropertySubgraph(p, indexes.partition, edges.astype(np.int64), owned.astype(np.int64))


def property_subgraph_from_edges(p: int, home: int, edges: np.ndarray, owners: np.ndarray) -> PropertySubgraph:
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    so, do = owners[e[:, 0]] == home, owners[e[:, 1]] == home
    mine = e[so | do]
    mine = np.unique(mine, axis=0) if len(mine) else mine
    owned = np.unique(np.concatenate([e[so, 0], e[do, 1]]))
    return PropertySubgraph(p, home, mine, owned.astype(np.int64))


@dataclass(frozen=True)
class BoundarySets:
    in_boundary: np.ndarray    # local vertices with an incoming cut edge
    out_boundary: np.ndarray   # local vertices with an outgoing cut edge


def compute_boundaries(g: PropertySubgraph, owners: np.ndarray) -> BoundarySets:
    if len(g.edges) == 0:
        empty = np.empty(0, np.int64)
        return BoundarySets(empty, empty)
    so = owners[g.edges[:, 0]] == g.home
    do = owners[g.edges[:, 1]] == g.home
    return BoundarySets(
        in_boundary=np.unique(g.edges[do & ~so, 1]),
        out_boundary=np.unique(g.edges[so & ~do, 0]),
    )


@dataclass
class BoundaryCompression:
    """Virtual vertices over the boundaries of one partition.

    Two in-boundaries share an in-virtual iff they reach the same set of
    out-boundaries inside the partition; two out-boundaries share an
    out-virtual iff they are reached by the same in-boundaries.  Vertices on
    both sides stay singletons on each side.
    """

    in_members: list[np.ndarray]
    out_members: list[np.ndarray]
    in_signature: dict[int, frozenset[int]]     # in-boundary -> out-boundaries reached

    def in_virtual_of(self) -> dict[int, int]:
        return {int(v): i for i, ms in enumerate(self.in_members) for v in ms}

    def out_virtual_of(self) -> dict[int, int]:
        return {int(v): i for i, ms in enumerate(self.out_members) for v in ms}


def _internal_signatures(g: PropertySubgraph, b: BoundarySets, owners: np.ndarray) -> dict[int, frozenset[int]]:
    ins, outs = b.in_boundary.tolist(), b.out_boundary.tolist()
    if not ins:
        return {}
    internal = g.internal_edges(owners)
    verts = np.unique(np.concatenate([internal.ravel(), b.in_boundary, b.out_boundary]))
    local = {int(v): i for i, v in enumerate(verts.tolist())}
    if len(internal):
        src = np.searchsorted(verts, internal[:, 0])
        dst = np.searchsorted(verts, internal[:, 1])
    else:
        src = dst = np.empty(0, np.int64)
    masks = _reach_targets(len(verts), src, dst, [local[v] for v in ins], [local[o] for o in outs])
    return {v: frozenset(outs[bit] for bit in _iter_bits(masks[local[v]])) for v in ins}


def compress_boundaries(g: PropertySubgraph, b: BoundarySets, owners: np.ndarray) -> BoundaryCompression:
    sig = _internal_signatures(g, b, owners)
    both = set(b.in_boundary.tolist()) & set(b.out_boundary.tolist())

    groups: dict[frozenset[int], list[int]] = defaultdict(list)
    in_members: list[list[int]] = []
    for v in b.in_boundary.tolist():
        if v in both:
            in_members.append([v])
        else:
            groups[sig[v]].append(v)
    in_members.extend(groups.values())

    reached_by: dict[int, list[int]] = defaultdict(list)
    for v in b.in_boundary.tolist():
        for o in sig[v]:
            reached_by[o].append(v)
    ogroups: dict[frozenset[int], list[int]] = defaultdict(list)
    out_members: list[list[int]] = []
    for o in b.out_boundary.tolist():
        if o in both:
            out_members.append([o])
        else:
            ogroups[frozenset(reached_by.get(o, ()))].append(o)
    out_members.extend(ogroups.values())

    in_members.sort(key=min)
    out_members.sort(key=min)
    return BoundaryCompression(
        [np.asarray(sorted(m), dtype=np.int64) for m in in_members],
        [np.asarray(sorted(m), dtype=np.int64) for m in out_members],
        sig,
    )


@dataclass
class BipartiteSummary:
    """In-virtual -> out-virtual pairs connected inside ``source_partition``."""

    source_partition: int
    in_members: list[np.ndarray]
    out_members: list[np.ndarray]
    edges: np.ndarray            # (m, 2) of (in virtual, out virtual)

    def member_pairs(self) -> set[tuple[int, int]]:
        """Expanded raw (in-boundary, out-boundary) reachable pairs."""
        out = set()
        for u, w in self.edges.tolist():
            for a in self.in_members[u].tolist():
                for c in self.out_members[w].tolist():
                    out.add((a, c))
        return out


def build_bipartite_summary(g: PropertySubgraph, comp: BoundaryCompression) -> BipartiteSummary:
    out_of = comp.out_virtual_of()
    pairs = set()
    for u, members in enumerate(comp.in_members):
        for o in comp.in_signature[int(members[0])]:
            pairs.add((u, out_of[o]))
    edges = np.asarray(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return BipartiteSummary(g.home, comp.in_members, comp.out_members, edges)


# --------------------------------------------------------------------------- #
# compound DAG
# --------------------------------------------------------------------------- #

class CompoundDag:
    """SCC-condensed compound graph of one (property, partition).

    Raw nodes are the local vertices of V^p and every remote in-boundary;
    the remaining nodes are remote virtual vertices.  ``entry_*`` arrays list
    the remote in-boundaries per component: the vertices a frontier ships.
    """

    MAGIC = b"RJRX"
    VERSION = 1

    def __init__(self, p: int, partition: int, raw_terms: np.ndarray, raw_nodes: np.ndarray,
                 comp: np.ndarray, dag_ptr: np.ndarray, dag_idx: np.ndarray, topo: np.ndarray,
                 entry_comp: np.ndarray, entry_term: np.ndarray, entry_owner: np.ndarray,
                 local_vertices: np.ndarray, virtual_members: np.ndarray):
        self.p = p
        self.partition = partition
        self.raw_terms = raw_terms
        self.raw_nodes = raw_nodes
        self.comp = comp
        self.dag_ptr = dag_ptr
        self.dag_idx = dag_idx
        self.topo = topo
        self.entry_comp = entry_comp
        self.entry_term = entry_term
        self.entry_owner = entry_owner
        self.local_vertices = local_vertices
        # rows of (kind 0=in/1=out, partition, virtual id, member)
        self.virtual_members = virtual_members
        self._prepare()

    def _prepare(self) -> None:
        self._node_of = dict(zip(self.raw_terms.tolist(), self.raw_nodes.tolist()))
        self._comp = self.comp.tolist()
        self._ptr = self.dag_ptr.tolist()
        self._adj = self.dag_idx.tolist()
        self._topo = self.topo.tolist()
        self._local = set(self.local_vertices.tolist())
        entries: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for c, t, o in zip(self.entry_comp.tolist(), self.entry_term.tolist(), self.entry_owner.tolist()):
            entries[c].append((o, t))
        self._entries = dict(entries)

    # --- introspection ---------------------------------------------------
    @property
    def component_count(self) -> int:
        return len(self._ptr) - 1

    def scc_of(self, term: int) -> int | None:
        node = self._node_of.get(int(term))
        return None if node is None else self._comp[node]

    def knows(self, term: int) -> bool:
        return int(term) in self._node_of

    def is_local_vertex(self, term: int) -> bool:
        return int(term) in self._local

    def dag_edges(self) -> np.ndarray:
        src = np.repeat(np.arange(self.component_count), np.diff(self.dag_ptr))
        return np.stack([src, self.dag_idx], axis=1)

    def check_acyclic(self) -> None:
        topological_rank(self.component_count, self.dag_ptr, self.dag_idx)

    # --- traversal -------------------------------------------------------
    def _propagate(self, starts: Mapping[int, int], collect: set[int]) -> dict[int, int]:
        """Forward-propagate source bitmasks through the DAG, reporting masks at ``collect``."""
        region = _reachable_comps(starts.keys(), self._ptr, self._adj)
        masks: dict[int, int] = dict(starts)
        out: dict[int, int] = {}
        ptr, adj = self._ptr, self._adj
        for c in sorted(region, key=self._topo.__getitem__):
            m = masks.get(c, 0)
            if not m:
                continue
            if c in collect:
                out[c] = m
            for w in adj[ptr[c]:ptr[c + 1]]:
                masks[w] = masks.get(w, 0) | m
        return out

    def reaches(self, s: int, t: int) -> bool:
        return bool(self.local_set_reach([s], [t]))

    def local_set_reach(self, sources: Iterable[int], targets: Iterable[int]) -> set[tuple[int, int]]:
        """All (s, t) joined by a path in the compound graph; every vertex reaches itself."""
        sources = sorted({int(s) for s in sources})
        targets = sorted({int(t) for t in targets})
        entry_map = {s: (s,) for s in sources}
        return self.match_targets(entry_map, targets)

    def match_targets(self, entry_map: Mapping[int, Iterable[int]], targets: Iterable[int]) -> set[tuple[int, int]]:
        """Pairs (key, t) such that some entry listed under ``key`` reaches target ``t``."""
        keys = list(entry_map)
        starts: dict[int, int] = defaultdict(int)
        unknown_entries: dict[int, int] = defaultdict(int)
        for bit, key in enumerate(keys):
            for b in entry_map[key]:
                c = self.scc_of(b)
                if c is None:
                    unknown_entries[int(b)] |= 1 << bit
                else:
                    starts[c] |= 1 << bit
        tcomp: dict[int, list[int]] = defaultdict(list)
        pairs: set[tuple[int, int]] = set()
        for t in targets:
            t = int(t)
            c = self.scc_of(t)
            if c is None:
                for bit in _iter_bits(unknown_entries.get(t, 0)):
                    pairs.add((keys[bit], t))
            else:
                tcomp[c].append(t)
        if starts and tcomp:
            masks = self._propagate(starts, set(tcomp))
            for c, m in masks.items():
                for bit in _iter_bits(m):
                    for t in tcomp[c]:
                        pairs.add((keys[bit], t))
        return pairs

    def frontier(self, sources: Iterable[int]) -> dict[int, dict[int, list[int]]]:
        """source -> {remote partition: remote in-boundaries reached}; sources not in V^p map to {}."""
        sources = sorted({int(s) for s in sources})
        result: dict[int, dict[int, list[int]]] = {s: {} for s in sources}
        starts: dict[int, int] = defaultdict(int)
        for bit, s in enumerate(sources):
            c = self.scc_of(s)
            if c is not None:
                starts[c] |= 1 << bit
        if not starts or not self._entries:
            return result
        masks = self._propagate(starts, set(self._entries))
        for c, m in masks.items():
            ents = self._entries[c]
            for bit in _iter_bits(m):
                per = result[sources[bit]]
                for owner, t in ents:
                    per.setdefault(owner, []).append(t)
        for per in result.values():
            for owner in per:
                per[owner].sort()
        return result

    # --- persistence -----------------------------------------------------
    def to_arrays(self) -> dict[str, np.ndarray]:
        return {
            "header": np.array([self.p, self.partition]),
            "raw_terms": self.raw_terms, "raw_nodes": self.raw_nodes, "comp": self.comp,
            "dag_ptr": self.dag_ptr, "dag_idx": self.dag_idx, "topo": self.topo,
            "entry_comp": self.entry_comp, "entry_term": self.entry_term,
            "entry_owner": self.entry_owner, "local_vertices": self.local_vertices,
            "virtual_members": self.virtual_members.reshape(-1, 4),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            _binio.write_arrays(fh, self.MAGIC, self.VERSION, self.to_arrays())

    @classmethod
    def load(cls, path: str | Path) -> "CompoundDag":
        with open(path, "rb") as fh:
            a = _binio.read_arrays(fh, cls.MAGIC, cls.VERSION)
        p, part = a["header"].tolist()
        return cls(p, part, a["raw_terms"], a["raw_nodes"], a["comp"], a["dag_ptr"], a["dag_idx"],
                   a["topo"], a["entry_comp"], a["entry_term"], a["entry_owner"],
                   a["local_vertices"], a["virtual_members"].reshape(-1, 4))


def assemble_compound(local: PropertySubgraph, cut: np.ndarray,
                      remote_summaries: Mapping[int, BipartiteSummary],
                      owners: np.ndarray, k: int) -> CompoundDag:
    """Merge the local subgraph, the global cut and all remote summaries, then condense."""
    home = local.home
    missing = [j for j in range(k) if j != home and j not in remote_summaries]
    if missing:
        raise MissingSummary(f"partition {home} lacks summaries from {missing}")
    cut = np.asarray(cut, dtype=np.int64).reshape(-1, 2)

    remote_in = sorted({int(v) for j, sm in remote_summaries.items() if j != home
                        for ms in sm.in_members for v in ms.tolist()})
    raw_terms = np.unique(np.concatenate([local.owned, np.asarray(remote_in, dtype=np.int64)]))
    n_raw = len(raw_terms)
    node_of = {t: i for i, t in enumerate(raw_terms.tolist())}

    virt_rows: list[tuple[int, int, int, int]] = []
    in_node: dict[tuple[int, int], int] = {}
    out_node: dict[tuple[int, int], int] = {}
    in_virt_of: dict[int, int] = {}
    out_virt_of: dict[int, int] = {}
    next_node = n_raw
    src: list[int] = []
    dst: list[int] = []
    for j in sorted(remote_summaries):
        if j == home:
            continue
        sm = remote_summaries[j]
        for u, ms in enumerate(sm.in_members):
            in_node[(j, u)] = next_node
            for v in ms.tolist():
                virt_rows.append((0, j, u, v))
                in_virt_of[v] = next_node
                src.append(node_of[v])
                dst.append(next_node)
            next_node += 1
        for w, ms in enumerate(sm.out_members):
            out_node[(j, w)] = next_node
            for v in ms.tolist():
                virt_rows.append((1, j, w, v))
                out_virt_of[v] = next_node
            next_node += 1
        for u, w in sm.edges.tolist():
            src.append(in_node[(j, u)])
            dst.append(out_node[(j, w)])

    internal = local.internal_edges(owners)
    for a, b in internal.tolist():
        src.append(node_of[a])
        dst.append(node_of[b])
    for a, b in cut.tolist():
        a_node = node_of[a] if owners[a] == home else out_virt_of.get(a)
        if a_node is None:
            # an out-boundary with no summary entry cannot be reached from anywhere remote
            continue
        src.append(a_node)
        dst.append(node_of[b])

    n = next_node
    s_arr = np.asarray(src, dtype=np.int64)
    d_arr = np.asarray(dst, dtype=np.int64)
    s_arr, d_arr = _dedupe_edges(s_arr, d_arr)
    labels, ncomp, cs, cd = condense(n, s_arr, d_arr)
    if n == 0:
        labels = np.empty(0, np.int64)
    ptr, idx = to_csr(ncomp, cs, cd)
    topo = topological_rank(ncomp, ptr, idx)

    remote_in_arr = np.asarray(remote_in, dtype=np.int64)
    e_nodes = np.searchsorted(raw_terms, remote_in_arr) if len(remote_in_arr) else remote_in_arr
    e_comp = labels[e_nodes] if len(e_nodes) else np.empty(0, np.int64)
    e_owner = owners[remote_in_arr] if len(remote_in_arr) else np.empty(0, np.int64)
    order = np.lexsort((remote_in_arr, e_comp)) if len(e_comp) else np.empty(0, np.int64)

    return CompoundDag(
        local.p, home, raw_terms, np.arange(n_raw, dtype=np.int64), labels[:n_raw].copy() if n_raw else labels,
        ptr, idx, topo,
        e_comp[order], remote_in_arr[order], e_owner[order],
        local.owned.copy(),
        np.asarray(virt_rows, dtype=np.int64).reshape(-1, 4),
    )


# --------------------------------------------------------------------------- #
# whole-property index
# --------------------------------------------------------------------------- #

@dataclass
class PropertyReachIndex:
    """All partitions' compound DAGs for one property plus the owner map used to route."""

    p: int
    k: int
    dags: list[CompoundDag]
    owners: np.ndarray
    vertices: np.ndarray                       # V^p, sorted
    summaries: list[BipartiteSummary] = field(default_factory=list)
    boundaries: list[BoundarySets] = field(default_factory=list)

    def owner(self, v: int) -> int:
        return int(self.owners[v]) if 0 <= v < len(self.owners) else int(v) % self.k

    def frontier_entries(self, s: int) -> dict[int, list[int]]:
        """Entry vertices per partition for source ``s``: its own partition gets ``s`` itself."""
        i = self.owner(s)
        per = self.dags[i].frontier([s])[s]
        per = {j: list(v) for j, v in per.items()}
        per.setdefault(i, []).insert(0, int(s))
        return per

    def reach_pairs(self, pairs: Iterable[tuple[int, int]]) -> np.ndarray:
        """Decide s ~> t (zero-length included) for every pair via frontier + remote check."""
        pairs = [(int(s), int(t)) for s, t in pairs]
        by_owner: dict[int, set[int]] = defaultdict(set)
        for s, _ in pairs:
            by_owner[self.owner(s)].add(s)
        entries: dict[int, dict[int, list[int]]] = {}
        for i, srcs in by_owner.items():
            fr = self.dags[i].frontier(srcs)
            for s in srcs:
                per = {j: list(v) for j, v in fr[s].items()}
                per.setdefault(i, []).insert(0, s)
                entries[s] = per
        checks: dict[int, tuple[dict[int, list[int]], set[int]]] = defaultdict(lambda: ({}, set()))
        for s, t in pairs:
            j = self.owner(t)
            emap, targets = checks[j]
            emap[s] = entries[s].get(j, [])
            targets.add(t)
        hits: set[tuple[int, int]] = set()
        for j, (emap, targets) in checks.items():
            hits |= self.dags[j].match_targets(emap, targets)
        return np.asarray([(s, t) in hits for s, t in pairs], dtype=bool)

    def reaches(self, s: int, t: int) -> bool:
        return bool(self.reach_pairs([(s, t)])[0])


def build_property_reach_index(p: int, edges: np.ndarray, owners: np.ndarray, k: int,
                               partition_indexes: Sequence[PartitionIndexes] | None = None) -> PropertyReachIndex:
    """Run the full pipeline for one property: extract, boundaries, compress, summarize, exchange, condense."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        raise UnknownProperty(p)
    edges = np.unique(edges, axis=0)
    subgraphs = []
    for i in range(k):
        if partition_indexes is not None:
            subgraphs.append(extract_property_subgraph(partition_indexes[i], p))
        else:
            subgraphs.append(property_subgraph_from_edges(p, i, edges, owners))
    boundaries = [compute_boundaries(g, owners) for g in subgraphs]
    summaries = [build_bipartite_summary(g, compress_boundaries(g, b, owners))
                 for g, b in zip(subgraphs, boundaries)]
    cut = edges[owners[edges[:, 0]] != owners[edges[:, 1]]]
    dags = []
    for i in range(k):
        remote = {j: summaries[j] for j in range(k) if j != i}
        dags.append(assemble_compound(subgraphs[i], cut, remote, owners, k))
    vertices = np.unique(edges.ravel())
    return PropertyReachIndex(p, k, dags, owners, vertices, summaries, boundaries)
