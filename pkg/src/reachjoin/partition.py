"""Vertex ownership and triple placement.

A triple lives at the owner of its subject and at the owner of its object,
which is one partition when both coincide.  Ownership is ``id mod k`` unless
an explicit vertex->partition map (e.g. from an external min-cut
partitioner) is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .rdf import Dictionary, Term, TermKind


class UncoveredVertex(KeyError):
    pass


class PartitionFileError(ValueError):
    pass


class ShardedTriple(NamedTuple):
    triple: tuple[int, int, int]
    subject_owner: int
    object_owner: int

    @property
    def destinations(self) -> tuple[int, ...]:
        if self.subject_owner == self.object_owner:
            return (self.subject_owner,)
        return (self.subject_owner, self.object_owner)


@dataclass(frozen=True)
class PartitionAssignment:
    """Total, deterministic vertex -> partition map.

    ``explicit`` overrides the hash rule for the listed ids; ``fallback_hash``
    decides whether unlisted ids are hashed or rejected.
    """

    k: int
    explicit: Mapping[int, int] | None = None
    fallback_hash: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.explicit:
            bad = [v for v in self.explicit.values() if not 0 <= v < self.k]
            if bad:
                raise PartitionFileError(f"partition index {bad[0]} out of range for k={self.k}")

    @property
    def mode(self) -> str:
        return "hash" if not self.explicit else "file"

    def owner_of(self, tid: int) -> int:
        if self.explicit is not None:
            owner = self.explicit.get(int(tid))
            if owner is not None:
                return owner
            if not self.fallback_hash:
                raise UncoveredVertex(tid)
        return int(tid) % self.k

    def owner_array(self, n_terms: int) -> np.ndarray:
        """Owners of ids 0..n_terms-1 as an int64 array."""
        owners = np.arange(n_terms, dtype=np.int64) % self.k
        if self.explicit:
            for tid, part in self.explicit.items():
                if tid < n_terms:
                    owners[tid] = part
        return owners


def assign_hash(triple: tuple[int, int, int], k: int) -> ShardedTriple:
    if k < 1:
        raise ValueError("k must be >= 1")
    s, _, o = triple
    return ShardedTriple(tuple(triple), s % k, o % k)


def assign_custom(triple: tuple[int, int, int], assignment: PartitionAssignment) -> ShardedTriple:
    s, _, o = triple
    strict = PartitionAssignment(assignment.k, assignment.explicit, fallback_hash=False)
    return ShardedTriple(tuple(triple), strict.owner_of(s), strict.owner_of(o))


def load_partition_file(path: str | Path, dictionary: Dictionary, k: int) -> PartitionAssignment:
    """Read ``termLexical<TAB>partitionIndex`` lines.

    Terms are matched against the dictionary as IRIs first, then literals;
    lines naming unknown terms are ignored.  Unlisted vertices hash.
    """
    explicit: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rsplit("\t", 1)
            if len(parts) != 2 or not parts[1].strip().lstrip("-").isdigit():
                raise PartitionFileError(f"{path}:{lineno}: expected 'term<TAB>partition'")
            lexical, idx = parts[0], int(parts[1])
            if not 0 <= idx < k:
                raise PartitionFileError(f"{path}:{lineno}: partition index {idx} >= k={k}")
            if lexical.startswith("<") and lexical.endswith(">"):
                lexical = lexical[1:-1]
            tid = dictionary.lookup(Term(TermKind.IRI, lexical))
            if tid is None:
                tid = dictionary.lookup(Term(TermKind.LITERAL, lexical))
            if tid is None:
                continue
            explicit[tid] = idx
    return PartitionAssignment(k, explicit)


def save_partition_file(path: str | Path, assignment: PartitionAssignment,
                        dictionary: Dictionary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tid, part in sorted((assignment.explicit or {}).items()):
            fh.write(f"{dictionary.decode(tid).lexical}\t{part}\n")


def shard_masks(triples: np.ndarray, owners: np.ndarray, k: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per partition: (subject-owned mask, object-owned mask) over ``triples``."""
    s_own = owners[triples[:, 0]]
    o_own = owners[triples[:, 2]]
    return [(s_own == i, o_own == i) for i in range(k)]
