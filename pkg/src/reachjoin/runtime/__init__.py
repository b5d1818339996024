"""Distributed execution: relations, transports, workers and the engine."""

from __future__ import annotations

from .engine import AuditReport, Engine, EngineConfig, ExecutionError, QueryResult, run_query
from .relation import Relation, SortContractViolation, hash_join, merge_join
from .transport import DelayTransport, InProcTransport, Message, MessageKind, QueryAborted

__all__ = ["AuditReport", "DelayTransport", "Engine", "EngineConfig", "ExecutionError",
           "InProcTransport", "Message", "MessageKind", "QueryAborted", "QueryResult", "Relation",
           "SortContractViolation", "hash_join", "merge_join", "run_query"]
