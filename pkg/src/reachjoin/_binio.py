"""Tiny deterministic container for named little-endian integer arrays.

Layout: magic(4) | u16 version | u32 n_arrays | per array:
u16 name_len | name | u8 ndim | u64 dims... | payload (<i8, row-major).
"""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np


class SnapshotFormatError(ValueError):
    pass


def write_arrays(fh: BinaryIO, magic: bytes, version: int, arrays: dict[str, np.ndarray]) -> None:
    assert len(magic) == 4
    fh.write(magic)
    fh.write(struct.pack("<HI", version, len(arrays)))
    for name, arr in arrays.items():
        a = np.ascontiguousarray(np.asarray(arr, dtype="<i8"))
        bname = name.encode("utf-8")
        fh.write(struct.pack("<H", len(bname)))
        fh.write(bname)
        fh.write(struct.pack("<B", a.ndim))
        fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        fh.write(a.tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SnapshotFormatError("truncated snapshot")
    return buf


def read_arrays(fh: BinaryIO, magic: bytes, version: int) -> dict[str, np.ndarray]:
    if _read_exact(fh, 4) != magic:
        raise SnapshotFormatError(f"bad magic, expected {magic!r}")
    ver, n = struct.unpack("<HI", _read_exact(fh, 6))
    if ver != version:
        raise SnapshotFormatError(f"unsupported snapshot version {ver} (want {version})")
    out: dict[str, np.ndarray] = {}
    for _ in range(n):
        (nlen,) = struct.unpack("<H", _read_exact(fh, 2))
        name = _read_exact(fh, nlen).decode("utf-8")
        (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
        shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim))
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<i8").astype(np.int64)
        out[name] = data.reshape(shape)
    return out
