"""Six sorted permutation indexes per partition.

Subject-keyed permutations (SPO, SOP, PSO) hold the triples whose subject the
partition owns; object-keyed ones (OSP, OPS, POS) hold those whose object it
owns.  Rows are kept in permuted column order so that a bound prefix is found
by binary search and the matching run is a contiguous slice.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _binio

S, P, O = 0, 1, 2
POSITION_NAMES = "spo"


class Permutation(Enum):
    SPO = (S, P, O)
    SOP = (S, O, P)
    PSO = (P, S, O)
    OSP = (O, S, P)
    OPS = (O, P, S)
    POS = (P, O, S)

    @property
    def columns(self) -> tuple[int, int, int]:
        return self.value

    @property
    def subject_keyed(self) -> bool:
        return self in SUBJECT_GROUP

    @property
    def group(self) -> str:
        return "subject" if self.subject_keyed else "object"


# also the tie-break preference order
PERMUTATIONS: tuple[Permutation, ...] = (
    Permutation.SPO, Permutation.SOP, Permutation.PSO,
    Permutation.OSP, Permutation.OPS, Permutation.POS,
)
SUBJECT_GROUP = frozenset(PERMUTATIONS[:3])
OBJECT_GROUP = frozenset(PERMUTATIONS[3:])


def _position(p: int | str) -> int:
    return POSITION_NAMES.index(p) if isinstance(p, str) else int(p)


def valid_permutations(constant_positions: Iterable[int | str]) -> list[Permutation]:
    """All permutations whose leading columns are exactly the constant positions, in preference order."""
    consts = {_position(p) for p in constant_positions}
    n = len(consts)
    return [perm for perm in PERMUTATIONS if set(perm.columns[:n]) == consts]


def select_permutation(constant_positions: Iterable[int | str], group: str | None = None) -> Permutation:
    """Preferred permutation placing every constant position first.

    ``group`` ("subject" or "object") restricts the choice to one key family.
    """
    perms = valid_permutations(constant_positions)
    if group is not None:
        perms = [p for p in perms if p.group == group]
    if not perms:
        raise ValueError(f"no {group or ''} permutation has prefix {sorted(constant_positions)}")
    return perms[0]


@dataclass(frozen=True)
class ScanPattern:
    """Bound (position, id) constants; positions must be a prefix of the index order."""

    bound: tuple[tuple[int, int], ...] = ()

    @classmethod
    def of(cls, **consts: int) -> "ScanPattern":
        return cls(tuple((_position(k), int(v)) for k, v in consts.items()))

    def prefix_for(self, perm: Permutation) -> list[int]:
        values = dict(self.bound)
        n = len(values)
        lead = perm.columns[:n]
        if set(lead) != set(values):
            raise ValueError(f"constants {sorted(values)} are not a prefix of {perm.name}")
        return [values[c] for c in lead]


class PermutationIndex:
    """Distinct triples of one permutation, stored column-permuted and lexicographically sorted."""

    __slots__ = ("order", "keys")

    def __init__(self, order: Permutation, keys: np.ndarray):
        self.order = order
        self.keys = keys

    @classmethod
    def build(cls, order: Permutation, triples: np.ndarray) -> "PermutationIndex":
        t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        keys = t[:, list(order.columns)]
        if len(keys):
            idx = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
            keys = keys[idx]
            keep = np.ones(len(keys), dtype=bool)
            keep[1:] = np.any(keys[1:] != keys[:-1], axis=1)
            keys = keys[keep]
        return cls(order, np.ascontiguousarray(keys))

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def group(self) -> str:
        return self.order.group

    def rows(self) -> np.ndarray:
        """All rows in (s, p, o) column order, still sorted by this permutation."""
        return self._to_spo(self.keys)

    def _to_spo(self, keys: np.ndarray) -> np.ndarray:
        out = np.empty_like(keys)
        out[:, list(self.order.columns)] = keys
        return out

    def range_of(self, prefix: Sequence[int]) -> tuple[int, int]:
        lo, hi = 0, len(self.keys)
        for col, value in enumerate(prefix):
            column = self.keys[lo:hi, col]
            a = int(np.searchsorted(column, value, side="left"))
            b = int(np.searchsorted(column, value, side="right"))
            lo, hi = lo + a, lo + b
            if lo == hi:
                break
        return lo, hi

    def scan_array(self, key: ScanPattern = ScanPattern()) -> np.ndarray:
        lo, hi = self.range_of(key.prefix_for(self.order))
        return self._to_spo(self.keys[lo:hi])

    def scan(self, key: ScanPattern = ScanPattern()) -> Iterator[tuple[int, int, int]]:
        for row in self.scan_array(key).tolist():
            yield tuple(row)


class PartitionIndexes:
    """The six permutation indexes of one partition."""

    MAGIC = b"RJTX"
    VERSION = 1

    def __init__(self, partition: int, indexes: dict[Permutation, PermutationIndex]):
        self.partition = partition
        self.indexes = indexes

    def __getitem__(self, perm: Permutation) -> PermutationIndex:
        return self.indexes[perm]

    @classmethod
    def build(cls, partition: int, subject_owned: np.ndarray, object_owned: np.ndarray) -> "PartitionIndexes":
        idx = {}
        for perm in PERMUTATIONS:
            src = subject_owned if perm.subject_keyed else object_owned
            idx[perm] = PermutationIndex.build(perm, src)
        return cls(partition, idx)

    def sizes(self) -> dict[str, int]:
        return {perm.name: len(ix) for perm, ix in self.indexes.items()}

    def save(self, path: str | Path) -> None:
        arrays = {"partition": np.array([self.partition])}
        arrays.update({perm.name: self.indexes[perm].keys for perm in PERMUTATIONS})
        with open(path, "wb") as fh:
            _binio.write_arrays(fh, self.MAGIC, self.VERSION, arrays)

    @classmethod
    def load(cls, path: str | Path) -> "PartitionIndexes":
        with open(path, "rb") as fh:
            arrays = _binio.read_arrays(fh, cls.MAGIC, cls.VERSION)
        idx = {perm: PermutationIndex(perm, arrays[perm.name].reshape(-1, 3)) for perm in PERMUTATIONS}
        return cls(int(arrays["partition"][0]), idx)


def build_indexes(shard: Iterable, partition: int, owners: np.ndarray | None = None) -> PartitionIndexes:
    """Build from ShardedTriple items (or an (n,3) array plus ``owners``) destined to ``partition``."""
    if isinstance(shard, np.ndarray):
        t = shard.reshape(-1, 3)
        if owners is None:
            raise ValueError("owners required for array input")
        subj = t[owners[t[:, 0]] == partition]
        obj = t[owners[t[:, 2]] == partition]
        return PartitionIndexes.build(partition, subj, obj)
    subj_rows, obj_rows = [], []
    for st in shard:
        if st.subject_owner == partition:
            subj_rows.append(st.triple)
        if st.object_owner == partition:
            obj_rows.append(st.triple)
    return PartitionIndexes.build(
        partition,
        np.asarray(subj_rows, dtype=np.int64).reshape(-1, 3),
        np.asarray(obj_rows, dtype=np.int64).reshape(-1, 3),
    )
