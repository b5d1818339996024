"""Terms, dictionary encoding and line-oriented triple ingestion.

Every IRI and literal is mapped to a dense integer id.  A vertex of the data
graph *is* its id, so distinct vertices always carry distinct labels.
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

logger = logging.getLogger(__name__)


class TermKind(str, Enum):
    IRI = "I"
    LITERAL = "L"


@dataclass(frozen=True, order=True)
class Term:
    """An IRI (stored without angle brackets) or a literal (stored with quotes and tags)."""

    kind: TermKind
    lexical: str

    def __post_init__(self) -> None:
        if not self.lexical:
            raise ValueError("term lexical form must be non-empty")

    @classmethod
    def iri(cls, lexical: str) -> "Term":
        return cls(TermKind.IRI, lexical)

    @classmethod
    def literal(cls, lexical: str) -> "Term":
        if not lexical.startswith('"'):
            lexical = '"' + lexical + '"'
        return cls(TermKind.LITERAL, lexical)

    def n3(self) -> str:
        if self.kind is TermKind.IRI:
            return f"<{self.lexical}>"
        return self.lexical

    def __str__(self) -> str:
        return self.n3()


class UnknownTermId(KeyError):
    pass


class DictionaryFrozen(RuntimeError):
    pass


class Dictionary:
    """Bijective Term <-> id mapping with ids issued contiguously in first-seen order."""

    def __init__(self) -> None:
        self._ids: dict[Term, int] = {}
        self._terms: list[Term] = []
        self._frozen = False

    def __len__(self) -> int:
        return len(self._terms)

    def __contains__(self, term: Term) -> bool:
        return term in self._ids

    def encode(self, term: Term) -> int:
        tid = self._ids.get(term)
        if tid is None:
            if self._frozen:
                raise DictionaryFrozen(f"cannot add {term} to a frozen dictionary")
            tid = len(self._terms)
            self._ids[term] = tid
            self._terms.append(term)
        return tid

    def lookup(self, term: Term) -> int | None:
        """Id of ``term`` or None; never issues a new id."""
        return self._ids.get(term)

    def decode(self, tid: int) -> Term:
        tid = int(tid)
        if tid < 0 or tid >= len(self._terms):
            raise UnknownTermId(tid)
        return self._terms[tid]

    def freeze(self) -> "Dictionary":
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def terms(self) -> list[Term]:
        return list(self._terms)

    # persistence: one line per id, `id<TAB>kind<TAB>lexical` with \t \n \\ escaped
    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tid, term in enumerate(self._terms):
                fh.write(f"{tid}\t{term.kind.value}\t{_escape(term.lexical)}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Dictionary":
        d = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t", 2)
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: malformed dictionary line")
                tid, kind, lexical = int(parts[0]), TermKind(parts[1]), _unescape(parts[2])
                if tid != len(d._terms):
                    raise ValueError(f"{path}:{lineno}: ids must be contiguous")
                d.encode(Term(kind, lexical))
        return d.freeze()


_ESC = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESC = {v: k for k, v in _ESC.items()}


def _escape(s: str) -> str:
    return "".join(_ESC.get(c, c) for c in s)


def _unescape(s: str) -> str:
    return re.sub(r"\\[\\tnr]", lambda m: _UNESC[m.group(0)], s)


class MalformedLine(ValueError):
    def __init__(self, lineno: int, line: str, reason: str = "malformed triple"):
        super().__init__(f"line {lineno}: {reason}: {line.strip()[:120]!r}")
        self.lineno = lineno
        self.line = line


_IRI = r"<([^<>\s]+)>"
_LIT = r'("(?:[^"\\]|\\.)*"(?:@[A-Za-z]+(?:-[A-Za-z0-9]+)*|\^\^<[^<>\s]+>)?)'
_LINE = re.compile(rf"^\s*{_IRI}\s+{_IRI}\s+(?:{_IRI}|{_LIT})\s*\.\s*$")


def parse_ntriples_line(line: str) -> tuple[Term, Term, Term] | None:
    """Parse one line; None for blanks and comments, MalformedLine(lineno=0) otherwise."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    m = _LINE.match(line)
    if m is None:
        raise MalformedLine(0, line)
    s, p, o_iri, o_lit = m.groups()
    o = Term.iri(o_iri) if o_iri is not None else Term.literal(o_lit)
    return Term.iri(s), Term.iri(p), o


def parse_ntriples(
    source: BinaryIO | Iterable[bytes] | Iterable[str],
    dictionary: Dictionary,
    strict: bool = True,
) -> Iterator[tuple[int, int, int]]:
    """Yield encoded (s, p, o) id triples, one per valid line, duplicates included.

    In strict mode the first malformed line raises :class:`MalformedLine`; in
    lenient mode it is logged and skipped.
    """
    for lineno, raw in enumerate(source, 1):
        line = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
        try:
            parsed = parse_ntriples_line(line)
        except MalformedLine as exc:
            err = MalformedLine(lineno, line, "malformed triple")
            if strict:
                raise err from exc
            logger.warning("skipping %s", err)
            continue
        if parsed is None:
            continue
        s, p, o = parsed
        yield dictionary.encode(s), dictionary.encode(p), dictionary.encode(o)


def load_ntriples(
    path: str | Path, dictionary: Dictionary | None = None, strict: bool = True
) -> tuple[np.ndarray, Dictionary]:
    """Read a whole file into an (n, 3) int64 array of encoded triples."""
    dictionary = dictionary if dictionary is not None else Dictionary()
    with open(path, "rb") as fh:
        rows = list(parse_ntriples(fh, dictionary, strict=strict))
    return as_triple_array(rows), dictionary


def parse_ntriples_text(text: str, dictionary: Dictionary | None = None,
                        strict: bool = True) -> tuple[np.ndarray, Dictionary]:
    dictionary = dictionary if dictionary is not None else Dictionary()
    rows = list(parse_ntriples(io.StringIO(text), dictionary, strict=strict))
    return as_triple_array(rows), dictionary


def as_triple_array(rows: Iterable[tuple[int, int, int]] | np.ndarray) -> np.ndarray:
    arr = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=np.int64)
    return arr.reshape(-1, 3)


def write_ntriples(triples: np.ndarray, dictionary: Dictionary, fh) -> None:
    for s, p, o in np.asarray(triples).tolist():
        fh.write(f"{dictionary.decode(s).n3()} {dictionary.decode(p).n3()} "
                 f"{dictionary.decode(o).n3()} .\n")


@dataclass(frozen=True)
class DataGraphMeta:
    """Exact size figures of the distinct data graph and its property-induced subgraphs."""

    vertex_count: int
    property_ids: frozenset[int]
    vertices_per_property: dict[int, int]
    edges_per_property: dict[int, int]

    @classmethod
    def from_triples(cls, triples: np.ndarray) -> "DataGraphMeta":
        t = unique_triples(triples)
        verts = np.unique(np.concatenate([t[:, 0], t[:, 2]])) if len(t) else np.empty(0, np.int64)
        vp: dict[int, int] = {}
        ep: dict[int, int] = {}
        if len(t):
            order = np.argsort(t[:, 1], kind="stable")
            t = t[order]
            props, starts = np.unique(t[:, 1], return_index=True)
            bounds = list(starts) + [len(t)]
            for i, p in enumerate(props.tolist()):
                block = t[bounds[i]:bounds[i + 1]]
                ep[p] = len(block)
                vp[p] = len(np.unique(np.concatenate([block[:, 0], block[:, 2]])))
        return cls(len(verts), frozenset(ep), vp, ep)


def unique_triples(triples: np.ndarray) -> np.ndarray:
    """Distinct rows sorted in (s, p, o) order."""
    t = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if len(t) == 0:
        return t
    order = np.lexsort((t[:, 2], t[:, 1], t[:, 0]))
    t = t[order]
    keep = np.ones(len(t), dtype=bool)
    keep[1:] = np.any(t[1:] != t[:-1], axis=1)
    return t[keep]
