"""AFLD1 binary field files.

Layout (all little-endian)::

    b"AFLD1"  u8 ndim  u8 rank  u8 is_complex
    u32 points[ndim]
    f64 extents[ndim]
    f64 payload[...]

The payload is node-major, component-minor: an array of shape
``points + (ndim,) * rank`` in C order.  Complex payloads interleave the real
and imaginary part of every component.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"AFLD1"


class FieldFormatError(ValueError):
    pass


@dataclass
class FieldFile:
    values: np.ndarray
    points: tuple[int, ...]
    extents: tuple[float, ...]
    rank: int


def _rank_of(values: np.ndarray, ndim: int) -> int:
    rank = values.ndim - ndim
    if rank not in (0, 1, 2) or any(s != ndim for s in values.shape[ndim:]):
        raise FieldFormatError(f"array of shape {values.shape} is not a field on a {ndim}-d grid")
    return rank


def encode_field(values, extents) -> bytes:
    values = np.asarray(values)
    extents = tuple(float(e) for e in extents)
    ndim = len(extents)
    rank = _rank_of(values, ndim)
    is_complex = np.iscomplexobj(values)
    dtype = "<c16" if is_complex else "<f8"
    header = MAGIC + struct.pack("<BBB", ndim, rank, int(is_complex))
    header += struct.pack(f"<{ndim}I", *values.shape[:ndim])
    header += struct.pack(f"<{ndim}d", *extents)
    return header + np.ascontiguousarray(values, dtype=dtype).tobytes()


def decode_field(data: bytes, source: str = "<bytes>") -> FieldFile:
    if data[:5] != MAGIC:
        raise FieldFormatError(f"{source}: bad magic {data[:5]!r}, expected {MAGIC!r}")
    try:
        ndim, rank, is_complex = struct.unpack_from("<BBB", data, 5)
        off = 8
        points = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        extents = struct.unpack_from(f"<{ndim}d", data, off)
        off += 8 * ndim
    except struct.error as exc:
        raise FieldFormatError(f"{source}: truncated header") from exc
    if not 1 <= ndim <= 3 or rank > 2:
        raise FieldFormatError(f"{source}: unsupported ndim={ndim} rank={rank}")
    shape = tuple(points) + (ndim,) * rank
    dtype = np.dtype("<c16" if is_complex else "<f8")
    count = int(np.prod(shape))
    if len(data) - off != count * dtype.itemsize:
        raise FieldFormatError(f"{source}: payload size mismatch")
    values = np.frombuffer(data, dtype=dtype, count=count, offset=off).reshape(shape).copy()
    return FieldFile(values, tuple(points), tuple(extents), rank)


def write_field(path, values, extents) -> Path:
    """Write atomically (temp file + rename)."""
    path = Path(path)
    blob = encode_field(values, extents)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)
    return path


def read_field(path, grid=None) -> FieldFile:
    path = Path(path)
    field = decode_field(path.read_bytes(), source=str(path))
    if grid is not None:
        if field.points != grid.points or not np.allclose(field.extents, grid.extents):
            raise FieldFormatError(f"{path}: grid {field.points}/{field.extents} does not match "
                                   f"{grid.points}/{grid.extents}")
    return field
