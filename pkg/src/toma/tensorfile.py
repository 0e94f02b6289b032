"""Minimal binary container for token batches.

Layout: a fixed 28-byte little-endian header (magic, version, batch, tokens,
dim, grid height, grid width) followed by the payload as float32 row-major.
Grid sides are stored as zeros when no grid applies. Non-finite values are
rejected on both write and read so a file on disk is always safe to load.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"TOMA"
VERSION = 1
HEADER = struct.Struct("<4sIIIIII")


def write_tensor_file(path: str | Path, data: np.ndarray, grid: tuple[int, int] | None = None) -> None:
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise DataError("tensor payload must be (batch, tokens, dim) or (tokens, dim)")
    b, n, d = arr.shape
    if min(b, n, d) < 1:
        raise DataError("tensor dims must all be at least 1")
    if max(b, n, d) >= 2**32:
        raise DataError("tensor dims do not fit the header")
    if not np.isfinite(arr).all():
        raise DataError("non-finite value in tensor payload")
    gh = gw = 0
    if grid is not None:
        gh, gw = (int(v) for v in grid)
        if gh < 1 or gw < 1 or gh * gw != n:
            raise DataError("grid does not match token count")
    header = HEADER.pack(MAGIC, VERSION, b, n, d, gh, gw)
    payload = np.ascontiguousarray(arr).tobytes()
    Path(path).write_bytes(header + payload)


def read_tensor_file(path: str | Path) -> tuple[np.ndarray, tuple[int, int] | None]:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise DataError("truncated header")
    magic, version, b, n, d, gh, gw = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError("bad magic, not a tensor file")
    if version != VERSION:
        raise DataError(f"unsupported tensor file version {version}")
    if min(b, n, d) < 1:
        raise DataError("tensor dims must all be at least 1")
    expect = b * n * d * 4
    if len(raw) - HEADER.size != expect:
        raise DataError("payload length does not match header")
    data = np.frombuffer(raw, dtype="<f4", offset=HEADER.size).reshape(b, n, d)
    grid: tuple[int, int] | None = None
    if gh or gw:
        if gh < 1 or gw < 1 or gh * gw != n:
            raise DataError("grid does not match token count")
        grid = (gh, gw)
    if not np.isfinite(data).all():
        raise DataError("non-finite value in tensor payload")
    return np.ascontiguousarray(data), grid
