"""Columnar intermediate relations and vectorized join kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..query import Var


class SortContractViolation(RuntimeError):
    pass


@dataclass
class Relation:
    schema: tuple[Var, ...]
    rows: np.ndarray                 # (n, len(schema)) int64
    shard_key: Var | None = None

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.int64)
        if not self.schema and rows.ndim == 2:
            self.rows = rows          # zero-width rows still count: one row means "satisfied"
        else:
            self.rows = rows.reshape(-1, len(self.schema))

    @classmethod
    def empty(cls, schema: Sequence[Var], shard_key: Var | None = None) -> "Relation":
        return cls(tuple(schema), np.empty((0, len(schema)), np.int64), shard_key)

    def __len__(self) -> int:
        return len(self.rows)

    def col(self, var: Var) -> np.ndarray:
        return self.rows[:, self.schema.index(var)]

    def project(self, variables: Sequence[Var]) -> "Relation":
        idx = [self.schema.index(v) for v in variables]
        return Relation(tuple(variables), self.rows[:, idx], self.shard_key if self.shard_key in variables else None)

    def distinct(self) -> "Relation":
        if len(self.rows) == 0 or self.rows.shape[1] == 0:
            rows = self.rows[:1] if self.rows.shape[1] == 0 else self.rows
            return Relation(self.schema, rows, self.shard_key)
        width = self.rows.shape[1]
        base = int(self.rows.max()) + 1
        if width * np.log2(max(base, 2)) < 62:     # pack each row into one int64
            codes = np.zeros(len(self.rows), np.int64)
            for j in range(width):
                codes = codes * base + self.rows[:, j]
            _, first = np.unique(codes, return_index=True)
            return Relation(self.schema, self.rows[first], self.shard_key)
        return Relation(self.schema, np.unique(self.rows, axis=0), self.shard_key)

    def sorted_by(self, var: Var) -> "Relation":
        if len(self.rows) == 0:
            return self
        order = np.argsort(self.col(var), kind="stable")
        return Relation(self.schema, self.rows[order], self.shard_key)

    def is_sorted_on(self, var: Var) -> bool:
        c = self.col(var)
        return bool(np.all(c[1:] >= c[:-1])) if len(c) > 1 else True


def concat(schema: Sequence[Var], parts: Sequence[np.ndarray], shard_key: Var | None = None) -> Relation:
    width = len(schema)
    parts = [np.asarray(p, dtype=np.int64).reshape(-1, width) for p in parts]
    rows = np.concatenate(parts) if parts else np.empty((0, width), np.int64)
    return Relation(tuple(schema), rows, shard_key)


def _group_ids(left_keys: np.ndarray, right_keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dense ids of equal key tuples shared across both sides."""
    if left_keys.shape[1] == 1:
        return left_keys[:, 0], right_keys[:, 0]
    both = np.concatenate([left_keys, right_keys])
    _, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    return inv[: len(left_keys)], inv[len(left_keys):]


def _expand(lkey: np.ndarray, rkey_sorted: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, j) with lkey[i] == rkey_sorted[j]; ``rkey_sorted`` ascending."""
    lo = np.searchsorted(rkey_sorted, lkey, side="left")
    hi = np.searchsorted(rkey_sorted, lkey, side="right")
    counts = hi - lo
    total = int(counts.sum())
    li = np.repeat(np.arange(len(lkey)), counts)
    if total == 0:
        return li, np.empty(0, np.int64)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    rj = np.repeat(lo, counts) + offsets
    return li, rj


def _assemble(left: Relation, right: Relation, li: np.ndarray, rj: np.ndarray,
              shard_key: Var | None) -> Relation:
    extra = [i for i, v in enumerate(right.schema) if v not in left.schema]
    schema = left.schema + tuple(right.schema[i] for i in extra)
    rows = np.concatenate([left.rows[li], right.rows[rj][:, extra]], axis=1) if len(li) else \
        np.empty((0, len(schema)), np.int64)
    return Relation(schema, rows, shard_key)


def hash_join(left: Relation, right: Relation, on: Sequence[Var], shard_key: Var | None = None) -> Relation:
    """Equi-join on every variable in ``on`` (all shared variables must be listed)."""
    on = list(on)
    if not on:
        return cross_product(left, right, shard_key)
    lk = left.rows[:, [left.schema.index(v) for v in on]]
    rk = right.rows[:, [right.schema.index(v) for v in on]]
    lid, rid = _group_ids(lk, rk)
    order = np.argsort(rid, kind="stable")
    li, pos = _expand(lid, rid[order])
    return _assemble(left, right, li, order[pos], shard_key)


def merge_join(left: Relation, right: Relation, key: Var, on: Sequence[Var],
               shard_key: Var | None = None) -> Relation:
    """Merge on ``key`` (both inputs sorted on it), then filter the remaining shared variables."""
    if not (left.is_sorted_on(key) and right.is_sorted_on(key)):
        raise SortContractViolation(f"merge join input not sorted on {key}")
    li, rj = _expand(left.col(key), right.col(key))
    out = _assemble(left, right, li, rj, shard_key)
    rest = [v for v in on if v != key]
    if rest and len(li):
        keep = np.ones(len(li), dtype=bool)
        for v in rest:
            keep &= left.col(v)[li] == right.col(v)[rj]
        out = Relation(out.schema, out.rows[keep], shard_key)
    return out


def cross_product(left: Relation, right: Relation, shard_key: Var | None = None) -> Relation:
    li = np.repeat(np.arange(len(left)), len(right))
    rj = np.tile(np.arange(len(right)), len(left))
    return _assemble(left, right, li, rj, shard_key)


def pair_codes(a: np.ndarray, b: np.ndarray, base: int) -> np.ndarray:
    return np.asarray(a, np.int64) * base + np.asarray(b, np.int64)
