"""Distributed in-memory evaluation of SPARQL triple patterns with property paths."""

from __future__ import annotations

from .oracle import oracle_query
from .query import compile_query, parse_query
from .rdf import Dictionary, Term, parse_ntriples_text
from .runtime import Engine, EngineConfig, QueryResult
from .store import Store

__version__ = "0.1.0"

__all__ = ["Dictionary", "Engine", "EngineConfig", "QueryResult", "Store", "Term", "compile_query",
           "oracle_query", "parse_ntriples_text", "parse_query"]
