"""Binary field snapshots.

Layout (little-endian): magic ``b"TNF1"``, ``u32`` cutoff, ``u32`` mode count,
then one ``(i32 k1, i32 k2, f64 a_k)`` record per mode of
``modes_up_to(cutoff)`` in that order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from stocheuler.spectral.field import FourierField
from stocheuler.spectral.lattice import mode_index_arrays, modes_up_to

MAGIC = b"TNF1"
_HEADER = struct.Struct("<4sII")
_RECORD = np.dtype([("k1", "<i4"), ("k2", "<i4"), ("a", "<f8")])


class SnapshotError(ValueError):
    pass


def encode_snapshot(f: FourierField) -> bytes:
    N = f.cutoff
    modes = np.array(modes_up_to(N), dtype=int)
    i, j = mode_index_arrays(N)
    rec = np.empty(len(modes), dtype=_RECORD)
    rec["k1"] = modes[:, 0]
    rec["k2"] = modes[:, 1]
    rec["a"] = f.coeffs[i, j]
    return _HEADER.pack(MAGIC, N, len(modes)) + rec.tobytes()


def decode_snapshot(data: bytes) -> FourierField:
    if len(data) < _HEADER.size:
        raise SnapshotError("truncated header")
    magic, N, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    expected = modes_up_to(N)
    if count != len(expected):
        raise SnapshotError(f"mode count {count} does not match cutoff {N}")
    body = data[_HEADER.size:]
    if len(body) != count * _RECORD.itemsize:
        raise SnapshotError("record section has the wrong length")
    rec = np.frombuffer(body, dtype=_RECORD)
    if not (np.array_equal(rec["k1"], [k[0] for k in expected]) and np.array_equal(rec["k2"], [k[1] for k in expected])):
        raise SnapshotError("records are not in canonical mode order")
    a = np.zeros((2 * N + 1, 2 * N + 1))
    i, j = mode_index_arrays(N)
    a[i, j] = rec["a"]
    return FourierField(N, a)


def write_snapshot(path, f: FourierField) -> None:
    Path(path).write_bytes(encode_snapshot(f))


def read_snapshot(path) -> FourierField:
    return decode_snapshot(Path(path).read_bytes())
