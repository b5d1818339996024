"""Per-partition plan execution.

Every worker runs the same plan over its own partition.  Join children run as
separate execution paths (threads) and meet at the join.  All cross-worker
traffic uses the transport; with a single partition no messages are
exchanged except the final result stream to the master.

Channels are ``(node_id << 8) | tag`` with tags

* ``0``      result stream to the master
* ``1``/``2`` reshard of the left/right child
* ``16+c``   frontier exchange of reach condition ``c``
* ``48+c``   realignment of rows by the source variable of condition ``c``
"""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..optimizer import PlanNode, ReachCondition
from ..query import Modifier, Var, VertexKind
from ..rdf import Term
from ..reach_index import CompoundDag
from ..triple_index import PartitionIndexes, Permutation, ScanPattern
from .relation import Relation, concat, hash_join, merge_join, pair_codes
from .transport import Message, MessageKind, Transport

TAG_RESULT = 0
TAG_RESHARD = (1, 2)
TAG_FRONTIER = 16
TAG_REALIGN = 48


def channel(node_id: int, tag: int) -> int:
    return (node_id << 8) | tag


class ShardContractViolation(RuntimeError):
    pass


@dataclass
class WorkerContext:
    """Read-only state of one partition."""

    partition: int
    k: int
    indexes: PartitionIndexes
    owners: np.ndarray
    is_vertex: np.ndarray
    dags: dict[int, CompoundDag]
    prop_vertices: dict[int, np.ndarray]

    @classmethod
    def from_store(cls, store, i: int) -> "WorkerContext":
        return cls(i, store.k, store.indexes[i], store.owners, store.is_vertex,
                   {p: r.dags[i] for p, r in store.reach.items()},
                   {p: r.vertices for p, r in store.reach.items()})

    def owner(self, values: np.ndarray) -> np.ndarray:
        return self.owners[values]


@dataclass
class QueryTask:
    qid: int
    plan: PlanNode
    prop_ids: dict[Term, int | None]
    star_scope: str = "vd"


class Executor:
    def __init__(self, ctx: WorkerContext, task: QueryTask, transport: Transport):
        self.ctx = ctx
        self.task = task
        self.t = transport
        self.me = ctx.partition
        self.box = transport.mailbox(self.me)

    # --- entry point ------------------------------------------------------
    def run(self) -> None:
        rel = self.exec(self.task.plan)
        ch = channel(self.task.plan.node_id, TAG_RESULT)
        master = self.t.master
        if len(rel):
            self.t.send(master, Message(MessageKind.TUPLES, self.task.qid, ch, self.me, rel.rows))
        self.t.send(master, Message(MessageKind.EOS, self.task.qid, ch, self.me))

    # --- messaging -------------------------------------------------------------
    def exchange(self, ch: int, parts: Sequence[np.ndarray],
                 pairs: Sequence[np.ndarray] | None = None) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """All-to-all exchange on one channel; returns received row and pair arrays."""
        if self.ctx.k == 1:
            return [parts[0]], ([pairs[0]] if pairs is not None else [])
        qid = self.task.qid
        for j in range(self.ctx.k):
            if pairs is None:
                if len(parts[j]):
                    self.t.send(j, Message(MessageKind.TUPLES, qid, ch, self.me, parts[j]))
            elif len(parts[j]) or len(pairs[j]):
                self.t.send(j, Message(MessageKind.FRONTIER, qid, ch, self.me, (parts[j], pairs[j])))
            self.t.send(j, Message(MessageKind.EOS, qid, ch, self.me))
        rows, got_pairs = [], []
        for m in self.box.collect(qid, ch, self.ctx.k):
            if m.kind is MessageKind.FRONTIER:
                rows.append(m.payload[0])
                got_pairs.append(m.payload[1])
            else:
                rows.append(m.payload)
        return rows, got_pairs

    def reshard(self, rel: Relation, key: Var, ch: int) -> Relation:
        if self.ctx.k == 1:
            return Relation(rel.schema, rel.rows, key)
        dest = self.ctx.owner(rel.col(key))
        parts = [rel.rows[dest == j] for j in range(self.ctx.k)]
        rows, _ = self.exchange(ch, parts)
        return concat(rel.schema, rows, key)

    def check_sharded(self, rel: Relation, key: Var | None) -> None:
        if self.ctx.k == 1 or key is None or len(rel) == 0:
            return
        if not np.all(self.ctx.owner(rel.col(key)) == self.me):
            raise ShardContractViolation(f"relation claimed sharded on {key} is not")

    # --- operators -------------------------------------------------------------
    def exec(self, node: PlanNode) -> Relation:
        if node.is_leaf:
            return self.scan(node)
        results: list[Relation | None] = [None, None]
        errors: list[BaseException] = []

        def path(i: int) -> None:
            try:
                results[i] = self.exec(node.children[i])
            except BaseException as exc:  # surfaced after the join point
                errors.append(exc)

        side = threading.Thread(target=path, args=(0,), name=f"ep-{self.me}-{node.node_id}-L")
        side.start()
        path(1)
        side.join()
        if errors:
            raise errors[0]
        left, right = results
        left, right = self.align(node, left, right)
        if node.op == "DMJ":
            out = merge_join(left.sorted_by(node.key), right.sorted_by(node.key), node.key,
                             [c.var for c in node.equi_conditions], node.key)
        elif node.op == "DHJ":
            out = hash_join(left, right, [c.var for c in node.equi_conditions], node.key)
        else:
            out = self.reach_join(node, left, right)
        return out.project(node.variables)

    def align(self, node: PlanNode, left: Relation, right: Relation) -> tuple[Relation, Relation]:
        if node.key is not None:
            want = (node.key, node.key)
        else:
            first = node.reach_conditions[0]
            w = [first.target, first.target]
            w[first.source_side] = first.source
            want = tuple(w)
        out = []
        for i, (rel, key) in enumerate(zip((left, right), want)):
            if node.reshard and node.reshard[i]:
                rel = self.reshard(rel, key, channel(node.node_id, TAG_RESHARD[i]))
                if node.op == "DMJ":
                    rel = rel.sorted_by(key)
            else:
                self.check_sharded(rel, key)
                rel = Relation(rel.schema, rel.rows, key)
            out.append(rel)
        return out[0], out[1]

    def scan(self, leaf: PlanNode) -> Relation:
        v = leaf.vertex
        ctx = self.ctx
        if v.kind is VertexKind.SINGLETON:
            cid = leaf.bound[0][1]
            if cid is None or int(ctx.owners[cid]) != self.me:
                return Relation.empty(v.variables, leaf.shard_key)
            return Relation(v.variables, np.array([[cid]], np.int64), leaf.shard_key)
        if v.kind is VertexKind.UNBOUND:
            pid = self.task.prop_ids.get(v.domain.prop)
            if v.domain.modifier is Modifier.PLUS or self.task.star_scope == "vp":
                domain = ctx.prop_vertices.get(pid, np.empty(0, np.int64))
            else:
                domain = np.flatnonzero(ctx.is_vertex)
            local = domain[ctx.owners[domain] == self.me]
            return Relation(v.variables, local.reshape(-1, 1), leaf.shard_key)
        if any(tid is None for _, tid in leaf.bound):
            return Relation.empty(v.variables, leaf.shard_key)
        idx = ctx.indexes[leaf.permutation]
        arr = idx.scan_array(ScanPattern(tuple(leaf.bound)))
        tp = v.pattern
        if isinstance(tp.subject, Var) and tp.subject == tp.object:
            arr = arr[arr[:, 0] == arr[:, 2]]
        cols = [0 if tp.subject == var else 2 for var in v.variables]
        return Relation(v.variables, arr[:, cols], leaf.shard_key)

    # --- reachability join ---------------------------------------------------------
    def reach_join(self, node: PlanNode, left: Relation, right: Relation) -> Relation:
        conds = node.reach_conditions
        if node.key is not None:
            rel = hash_join(left, right, [c.var for c in node.equi_conditions], node.key)
            start = 0
        else:
            first = conds[0]
            src_rel, tgt_rel = (left, right) if first.source_side == 0 else (right, left)
            rel = self.cross_reach(node, 0, first, src_rel, tgt_rel)
            start = 1
        for ci in range(start, len(conds)):
            rel = self.filter_reach(node, ci, conds[ci], rel)
        return rel

    def _prop(self, cond: ReachCondition) -> int:
        pid = self.task.prop_ids.get(cond.predicate.atom.prop)
        if pid is None:
            raise RuntimeError(f"unknown property {cond.predicate.atom.prop}")
        return pid

    def frontier_pairs(self, cond: ReachCondition, sources: np.ndarray) -> list[np.ndarray]:
        """Per destination partition: (source, entry) pairs computed at the source's owner."""
        pid = self._prop(cond)
        k = self.ctx.k
        per: list[list[tuple[int, int]]] = [[] for _ in range(k)]
        if cond.predicate.atom.modifier is Modifier.OPT:
            succ_s, succ_t = self._successors(pid, sources)
            dest = self.ctx.owner(succ_t) if len(succ_t) else succ_t
            pairs = np.stack([succ_s, succ_t], axis=1) if len(succ_s) else np.empty((0, 2), np.int64)
            return [pairs[dest == j] for j in range(k)]
        dag = self.ctx.dags[pid]
        fr = dag.frontier(sources.tolist())
        for s, entries in fr.items():
            if dag.knows(s):
                per[self.me].append((s, s))
            for j, ents in entries.items():
                per[j].extend((s, e) for e in ents)
        return [np.asarray(p, dtype=np.int64).reshape(-1, 2) for p in per]

    def _successors(self, pid: int, sources: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = self.ctx.indexes[Permutation.PSO]
        lo, hi = idx.range_of([pid])
        block = idx.keys[lo:hi]              # columns (p, s, o), sorted by s then o
        a = np.searchsorted(block[:, 1], sources, side="left")
        b = np.searchsorted(block[:, 1], sources, side="right")
        counts = b - a
        src = np.repeat(sources, counts)
        total = int(counts.sum())
        if total == 0:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        return src, block[np.repeat(a, counts) + offsets, 2]

    def match(self, cond: ReachCondition, pairs: np.ndarray, src: np.ndarray, tgt: np.ndarray) -> np.ndarray:
        """Boolean mask over (src[i], tgt[i]) rows: does the reach condition hold?"""
        if len(src) == 0:
            return np.zeros(0, dtype=bool)
        pid = self._prop(cond)
        mod = cond.predicate.atom.modifier
        base = max(len(self.ctx.owners), 1)
        if mod is Modifier.OPT:
            hit_codes = pair_codes(pairs[:, 0], pairs[:, 1], base) if len(pairs) else np.empty(0, np.int64)
        else:
            entry_map: dict[int, list[int]] = defaultdict(list)
            for s, e in pairs.tolist():
                entry_map[s].append(e)
            hits = self.ctx.dags[pid].match_targets(entry_map, np.unique(tgt).tolist()) if entry_map else set()
            hit_codes = np.fromiter((s * base + t for s, t in hits), dtype=np.int64, count=len(hits))
        ok = np.isin(pair_codes(src, tgt, base), hit_codes) & (src != tgt)
        if mod is not Modifier.PLUS:
            same = src == tgt
            if self.task.star_scope == "vp":
                in_scope = np.isin(src, self.ctx.prop_vertices.get(pid, np.empty(0, np.int64)))
            else:
                in_scope = self.ctx.is_vertex[src]
            ok |= same & in_scope
        return ok

    def cross_reach(self, node: PlanNode, ci: int, cond: ReachCondition,
                    src_rel: Relation, tgt_rel: Relation) -> Relation:
        """Source rows travel, with their frontier, to every partition they may reach."""
        k = self.ctx.k
        src_col = src_rel.col(cond.source)
        sources = np.unique(src_col)
        pairs = self.frontier_pairs(cond, sources)
        parts = []
        for j in range(k):
            if j == self.me:
                parts.append(src_rel.rows)
            else:
                parts.append(src_rel.rows[np.isin(src_col, np.unique(pairs[j][:, 0]))])
        rows, got = self.exchange(channel(node.node_id, TAG_FRONTIER + ci), parts, pairs)
        received = concat(src_rel.schema, rows)
        got_pairs = np.concatenate(got) if got else np.empty((0, 2), np.int64)
        s_vals = np.unique(received.col(cond.source))
        t_vals = np.unique(tgt_rel.col(cond.target))
        if len(s_vals) == 0 or len(t_vals) == 0:
            schema = received.schema + tuple(x for x in tgt_rel.schema if x not in received.schema)
            return Relation.empty(schema, cond.target)
        gs, gt = np.repeat(s_vals, len(t_vals)), np.tile(t_vals, len(s_vals))
        keep = self.match(cond, got_pairs, gs, gt)
        matched = Relation((cond.source, cond.target), np.stack([gs[keep], gt[keep]], axis=1))
        out = hash_join(received, matched, [cond.source])
        return hash_join(out, tgt_rel, [cond.target], cond.target)

    def filter_reach(self, node: PlanNode, ci: int, cond: ReachCondition, rel: Relation) -> Relation:
        """Keep rows whose source reaches their target; rows end at the target's owner."""
        k = self.ctx.k
        if k > 1 and rel.shard_key != cond.source:
            rel = self.reshard(rel, cond.source, channel(node.node_id, TAG_REALIGN + ci))
        src_col = rel.col(cond.source)
        pairs = self.frontier_pairs(cond, np.unique(src_col))
        if k == 1:
            parts = [rel.rows]
        else:
            dest = self.ctx.owner(rel.col(cond.target))
            parts = [rel.rows[dest == j] for j in range(k)]
            pairs = [pairs[j][np.isin(pairs[j][:, 0], parts[j][:, rel.schema.index(cond.source)])]
                     for j in range(k)]
        rows, got = self.exchange(channel(node.node_id, TAG_FRONTIER + ci), parts, pairs)
        received = concat(rel.schema, rows)
        got_pairs = np.concatenate(got) if got else np.empty((0, 2), np.int64)
        keep = self.match(cond, got_pairs, received.col(cond.source), received.col(cond.target))
        return Relation(rel.schema, received.rows[keep], cond.target)
