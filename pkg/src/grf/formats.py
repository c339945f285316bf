"""On-disk formats: GRF1 binary grids and JSON documents.

GRF1 layout (all integers little-endian)::

    magic   4 bytes  b"GRF1"
    version u32      1
    dims    u32
    N       u64 * dims
    T       f64 * dims
    tag     u8       0 = field, 1 = noise
    payload f64 * prod(N), row-major, last axis fastest
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"GRF1"
VERSION = 1
TAG_FIELD = 0
TAG_NOISE = 1

__all__ = ["MAGIC", "VERSION", "TAG_FIELD", "TAG_NOISE", "atomic_write", "encode_grid",
           "decode_grid", "write_grid", "read_grid", "payload_checksum", "write_json",
           "read_json"]


def atomic_write(path, data: bytes):
    """Write ``data`` to a temporary file beside ``path``, then rename it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_grid(data, T, tag: int = TAG_FIELD) -> bytes:
    data = np.ascontiguousarray(data, dtype="<f8")
    T = [float(t) for t in T]
    if data.ndim != len(T):
        raise FormatError("grid rank and T length differ")
    if tag not in (TAG_FIELD, TAG_NOISE):
        raise FormatError(f"bad payload tag {tag}")
    head = MAGIC + struct.pack("<II", VERSION, data.ndim)
    head += struct.pack(f"<{data.ndim}Q", *data.shape)
    head += struct.pack(f"<{data.ndim}d", *T)
    head += struct.pack("<B", tag)
    return head + data.tobytes()


def decode_grid(buf: bytes):
    """Parse GRF1 bytes into ``(data, T, tag)``."""
    if len(buf) < 12 or buf[:4] != MAGIC:
        raise FormatError("not a GRF1 file")
    version, dims = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported GRF1 version {version}")
    if dims < 1:
        raise FormatError("GRF1 file with zero dimensions")
    off = 12
    try:
        N = struct.unpack_from(f"<{dims}Q", buf, off)
        off += 8 * dims
        T = struct.unpack_from(f"<{dims}d", buf, off)
        off += 8 * dims
        (tag,) = struct.unpack_from("<B", buf, off)
    except struct.error:
        raise FormatError("truncated GRF1 header")
    off += 1
    n = int(np.prod(N))
    if len(buf) - off != 8 * n:
        raise FormatError(f"payload holds {len(buf) - off} bytes, expected {8 * n}")
    data = np.frombuffer(buf, dtype="<f8", count=n, offset=off).reshape(N).astype(float)
    return data, tuple(T), tag


def write_grid(path, data, T, tag: int = TAG_FIELD) -> str:
    """Write a GRF1 file atomically; returns the payload checksum."""
    blob = encode_grid(data, T, tag)
    atomic_write(path, blob)
    return payload_checksum(data)


def read_grid(path):
    return decode_grid(Path(path).read_bytes())


def payload_checksum(data) -> str:
    """SHA-256 of the little-endian row-major payload."""
    return hashlib.sha256(np.ascontiguousarray(data, dtype="<f8").tobytes()).hexdigest()


def write_json(path, doc: dict):
    atomic_write(path, (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})")
