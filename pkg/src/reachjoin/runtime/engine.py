"""Query execution front door: plan, broadcast, run on all workers, gather at the master."""

from __future__ import annotations

import itertools
import logging
import os
import threading
import time
import traceback
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..optimizer import CostConfig, PlanNode, annotate_sharding, number_nodes, plan_query
from ..query import QueryError, QueryGraph, Var, VertexKind, compile_query
from ..rdf import Term
from .relation import Relation, concat
from .transport import (CONTROL_CHANNEL, DelayTransport, InProcTransport, Message, MessageKind,
                        QueryAborted, SocketEndpoint, Transport, TransportError, socket_mesh)
from .worker import (TAG_FRONTIER, TAG_REALIGN, TAG_RESHARD, TAG_RESULT, Executor, QueryTask,
                     WorkerContext, channel)

logger = logging.getLogger(__name__)

TRANSPORTS = ("inproc", "delay", "socket")


class ExecutionError(RuntimeError):
    """Runtime failure on some worker; ``stage`` names where it happened."""

    def __init__(self, message: str, stage: str = "runtime"):
        super().__init__(message)
        self.stage = stage


@dataclass
class EngineConfig:
    transport: str = "inproc"
    gamma: float = 1.0
    star_scope: str = "vd"
    dp_limit: int = 12
    timeout: float | None = 600.0
    delay_seed: int = 0
    max_delay: float = 0.002

    def __post_init__(self) -> None:
        if self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")
        if self.star_scope not in ("vd", "vp"):
            raise ValueError("star_scope must be 'vd' or 'vp'")


# --------------------------------------------------------------------------
# audit

@dataclass
class AuditReport:
    """Exchange rounds per operator; a round is one EOS-terminated stream per (sender, receiver)."""

    k: int
    frontier: dict[tuple[int, int], int]     # (node id, condition index) -> rounds
    reshard: dict[tuple[int, int], int]      # (node id, child index) -> rounds
    realign: dict[tuple[int, int], int]      # (node id, condition index) -> rounds
    conditions: list[tuple[int, int]]        # every reach condition in the plan
    marked: list[tuple[int, int]]            # every child marked for resharding
    messages: int = 0

    @classmethod
    def from_snapshot(cls, plan: PlanNode, k: int, snapshot: dict[int, dict[tuple[int, int], int]],
                      messages: int) -> "AuditReport":
        rounds = {ch: max(c.values()) for ch, c in snapshot.items() if c}
        frontier, reshard, realign = {}, {}, {}
        conditions, marked = [], []
        for node in plan.walk():
            for ci in range(len(node.reach_conditions)):
                conditions.append((node.node_id, ci))
                frontier[(node.node_id, ci)] = rounds.get(channel(node.node_id, TAG_FRONTIER + ci), 0)
                realign[(node.node_id, ci)] = rounds.get(channel(node.node_id, TAG_REALIGN + ci), 0)
            for i, tag in enumerate(TAG_RESHARD[:len(node.children)]):
                if node.reshard and node.reshard[i]:
                    marked.append((node.node_id, i))
                reshard[(node.node_id, i)] = rounds.get(channel(node.node_id, tag), 0)
        return cls(k, frontier, reshard, realign, conditions, marked, messages)

    def one_round(self) -> bool:
        """Every reach condition used exactly one frontier round (zero when k = 1)."""
        want = 1 if self.k > 1 else 0
        return all(self.frontier[c] == want for c in self.conditions)

    def reshard_ok(self) -> bool:
        if self.k == 1:
            return all(v == 0 for v in itertools.chain(self.reshard.values(), self.realign.values()))
        return all(self.reshard[m] == 1 for m in self.marked) and \
            all(v == 0 for key, v in self.reshard.items() if key not in self.marked) and \
            all(v <= 1 for v in self.realign.values())

    def lines(self) -> list[str]:
        out = [f"partitions: {self.k}; messages: {self.messages}"]
        for nid, ci in self.conditions:
            out.append(f"  node #{nid} reach condition {ci}: frontier rounds {self.frontier[(nid, ci)]}"
                       f", realign rounds {self.realign[(nid, ci)]}")
        for (nid, i), r in sorted(self.reshard.items()):
            mark = " (marked)" if (nid, i) in self.marked else ""
            out.append(f"  node #{nid} child {i}: reshard rounds {r}{mark}")
        return out


@dataclass
class QueryResult:
    schema: tuple[Var, ...]
    rows: np.ndarray
    plan: PlanNode
    audit: AuditReport | None
    elapsed: float
    dictionary: object = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.rows)

    def row_set(self) -> frozenset[tuple[int, ...]]:
        return frozenset(map(tuple, self.rows.tolist()))

    def decoded(self) -> list[tuple[str, ...]]:
        """Rows as N-Triples term strings, sorted canonically."""
        dec = self.dictionary.decode
        return sorted(tuple(str(dec(t)) for t in row) for row in self.rows.tolist())


# --------------------------------------------------------------------------
# socket cluster

def _socket_worker(ctx: WorkerContext, ep: SocketEndpoint) -> None:
    while True:
        msg = ep.mailbox(ep.me).control.get()
        if msg.payload is None:
            return
        task: QueryTask = msg.payload
        error = None
        try:
            Executor(ctx, task, ep).run()
        except BaseException as exc:
            error = f"partition {ctx.partition}: {type(exc).__name__}: {exc}"
            ep.abort(task.qid, error)
        done = {"partition": ctx.partition, "error": error,
                "audit": ep.audit.snapshot(task.qid), "messages": ep.audit.message_count(task.qid)}
        ep.send(ep.master, Message(MessageKind.CONTROL, task.qid, CONTROL_CHANNEL, ep.me, done))
        ep.mailbox(ep.me).forget(task.qid)


class SocketCluster:
    """k forked worker processes joined by a socketpair mesh (plus the master endpoint)."""

    def __init__(self, store):
        self.k = store.k
        mesh = socket_mesh(self.k + 1)
        self.pids: list[int] = []
        for i in range(self.k):
            pid = os.fork()
            if pid == 0:  # child
                code = 0
                try:
                    for j, ends in enumerate(mesh):
                        if j != i:
                            for s in ends.values():
                                s.close()
                    ep = SocketEndpoint(self.k, i, mesh[i])
                    _socket_worker(WorkerContext.from_store(store, i), ep)
                    ep.close()
                except BaseException:
                    traceback.print_exc()
                    code = 1
                finally:
                    os._exit(code)
            self.pids.append(pid)
        for j in range(self.k):
            for s in mesh[j].values():
                s.close()
        self.ep = SocketEndpoint(self.k, self.k, mesh[self.k])

    def run(self, task: QueryTask, timeout: float | None) -> tuple[list[np.ndarray], dict, int]:
        ep = self.ep
        for i in range(self.k):
            ep.send(i, Message(MessageKind.CONTROL, task.qid, CONTROL_CHANNEL, ep.me, task))
        box = ep.mailbox(ep.me)
        error = None
        rows: list[np.ndarray] = []
        try:
            msgs = box.collect(task.qid, channel(task.plan.node_id, TAG_RESULT), self.k, timeout)
            rows = [m.payload for m in msgs]
        except (QueryAborted, TransportError) as exc:
            error = str(exc)
        snapshot: dict[int, dict[tuple[int, int], int]] = {}
        messages = 0
        for _ in range(self.k):
            done = box.control.get(timeout=timeout)
            error = error or done.payload["error"]
            messages += done.payload["messages"]
            for ch, counts in done.payload["audit"].items():
                snapshot.setdefault(ch, {}).update(counts)
        box.forget(task.qid)
        if error:
            raise ExecutionError(error)
        return rows, snapshot, messages

    def close(self) -> None:
        for i in range(self.k):
            try:
                self.ep.send(i, Message(MessageKind.CONTROL, 0, CONTROL_CHANNEL, self.ep.me, None))
            except OSError:
                pass
        for pid in self.pids:
            try:
                os.waitpid(pid, 0)
            except ChildProcessError:
                pass
        self.ep.close()
        self.pids = []


# --------------------------------------------------------------------------
# engine

class Engine:
    def __init__(self, store, config: EngineConfig | None = None):
        self.store = store
        self.config = config or EngineConfig()
        self._qids = itertools.count(1)
        self._contexts = [WorkerContext.from_store(store, i) for i in range(store.k)]
        self._cluster: SocketCluster | None = None

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._cluster is not None:
            self._cluster.close()
            self._cluster = None

    # --- planning -----------------------------------------------------------------
    def compile(self, text: str) -> QueryGraph:
        return compile_query(text)

    def plan(self, query: str | QueryGraph) -> PlanNode:
        graph = compile_query(query) if isinstance(query, str) else query
        cfg = CostConfig(k=self.store.k, gamma=self.config.gamma,
                         star_scope=self.config.star_scope, dp_limit=self.config.dp_limit)
        plan = plan_query(graph, self.store.catalog, self.store.dictionary, cfg)
        return number_nodes(annotate_sharding(plan, self.store.k))

    def _prop_ids(self, plan: PlanNode) -> dict[Term, int | None]:
        ids: dict[Term, int | None] = {}
        lookup = self.store.dictionary.lookup
        for node in plan.walk():
            if node.is_leaf and node.vertex.kind is VertexKind.UNBOUND:
                ids[node.vertex.domain.prop] = lookup(node.vertex.domain.prop)
            for c in node.reach_conditions:
                ids[c.predicate.atom.prop] = lookup(c.predicate.atom.prop)
        return ids

    # --- execution -----------------------------------------------------------------
    def execute(self, query: str | QueryGraph) -> QueryResult:
        t0 = time.perf_counter()
        graph = compile_query(query) if isinstance(query, str) else query
        return self.run_plan(self.plan(graph), graph.output, t0)

    def run_plan(self, plan: PlanNode, output: Sequence[Var] | None = None,
                 started: float | None = None) -> QueryResult:
        """Execute an annotated, numbered plan; ``output`` defaults to the plan's user variables."""
        t0 = time.perf_counter() if started is None else started
        if output is None:
            output = [v for v in plan.variables if not v.fresh]
        for v in output:
            if v not in plan.variables:
                raise QueryError(f"projected variable {v} does not occur in the query")
        task = QueryTask(next(self._qids), plan, self._prop_ids(plan), self.config.star_scope)
        if self.config.transport == "socket":
            if self._cluster is None:
                self._cluster = SocketCluster(self.store)
            parts, snapshot, messages = self._cluster.run(task, self.config.timeout)
        else:
            parts, snapshot, messages = self._run_threads(task)
        root = concat(plan.variables, parts)
        result = root.project(list(output)).distinct()
        rows = result.rows
        if len(rows) and rows.shape[1]:
            rows = rows[np.lexsort(rows.T[::-1])]
        audit = AuditReport.from_snapshot(plan, self.store.k, snapshot, messages)
        return QueryResult(tuple(output), rows, plan, audit, time.perf_counter() - t0,
                           self.store.dictionary)

    def _make_transport(self) -> Transport:
        k = self.store.k
        if self.config.transport == "delay":
            return DelayTransport(k, seed=self.config.delay_seed, max_delay=self.config.max_delay)
        return InProcTransport(k)

    def _run_threads(self, task: QueryTask) -> tuple[list[np.ndarray], dict, int]:
        transport = self._make_transport()
        errors: list[str] = []

        def work(ctx: WorkerContext) -> None:
            try:
                Executor(ctx, task, transport).run()
            except QueryAborted:
                pass
            except BaseException as exc:
                logger.debug("worker %d failed", ctx.partition, exc_info=True)
                errors.append(f"partition {ctx.partition}: {type(exc).__name__}: {exc}")
                transport.abort(task.qid, errors[0])

        threads = [threading.Thread(target=work, args=(ctx,), name=f"worker-{ctx.partition}", daemon=True)
                   for ctx in self._contexts]
        for t in threads:
            t.start()
        try:
            msgs = transport.mailbox(transport.master).collect(
                task.qid, channel(task.plan.node_id, TAG_RESULT), self.store.k, self.config.timeout)
        except (QueryAborted, TransportError) as exc:
            transport.abort(task.qid, str(exc))
            for t in threads:
                t.join(timeout=5)
            transport.close()
            raise ExecutionError(errors[0] if errors else str(exc)) from None
        for t in threads:
            t.join()
        transport.close()
        if errors:
            raise ExecutionError(errors[0])
        snapshot = transport.audit.snapshot(task.qid)
        return [m.payload for m in msgs], snapshot, transport.audit.message_count(task.qid)


def run_query(store, text: str, **config) -> QueryResult:
    with Engine(store, EngineConfig(**config)) as engine:
        return engine.execute(text)


__all__ = ["AuditReport", "Engine", "EngineConfig", "ExecutionError", "QueryResult", "Relation",
           "SocketCluster", "run_query"]
