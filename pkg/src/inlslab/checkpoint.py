"""Binary checkpoint container.

Layout, all little-endian:

    4s   magic b"INLS"
    u16  format version
    u32  n
    f64  L, t, b, p
    u32  length of the potential text, then that many UTF-8 bytes
    n^3 complex samples as interleaved f64 (re, im), x index fastest
    8 byte blake2b digest of everything above

The digest covers the header as well as the payload, so a flipped bit in L
or t is caught just like one in the samples.
"""
from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Field3, Grid3
from .potential import PotentialSpec

MAGIC = b"INLS"
VERSION = 1
_HEAD = struct.Struct("<4sHI4d")
_LEN = struct.Struct("<I")
_DIGEST = 8


class CheckpointError(OSError):
    pass


class CorruptionError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    def __init__(self, found: int, supported: int = VERSION):
        super().__init__(f"checkpoint format version {found} is not supported (this build reads {supported})")
        self.found = found
        self.supported = supported


@dataclass
class CheckpointState:
    field: Field3
    t: float
    b: float
    p: float
    potential: PotentialSpec

    @property
    def grid(self) -> Grid3:
        return self.field.grid


def _digest(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=_DIGEST).digest()


def encode(state: CheckpointState, version: int = VERSION) -> bytes:
    grid = state.grid
    if not grid.offset:
        raise ValueError("checkpoints store offset grids only")
    text = state.potential.to_text().encode("utf-8")
    head = _HEAD.pack(MAGIC, version, grid.n, grid.box_length, state.t, state.b, state.p)
    payload = np.asarray(state.field.values, dtype="<c16").ravel(order="F").tobytes()
    body = head + _LEN.pack(len(text)) + text + payload
    return body + _digest(body)


def decode(data: bytes) -> CheckpointState:
    if len(data) < _HEAD.size + _LEN.size + _DIGEST:
        raise CorruptionError(f"checkpoint truncated: {len(data)} bytes")
    magic, version, n, L, t, b, p = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptionError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(version)
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if _digest(body) != digest:
        raise CorruptionError("checksum mismatch")
    off = _HEAD.size
    (tlen,) = _LEN.unpack_from(data, off)
    off += _LEN.size
    expected = off + tlen + 16 * n**3
    if expected != len(body):
        raise CorruptionError(f"header says n={n} and {tlen} text bytes; body has {len(body)} bytes, expected {expected}")
    try:
        potential = PotentialSpec.from_text(data[off:off + tlen].decode("utf-8"))
        grid = Grid3(n, L)
    except ValueError as err:
        raise CorruptionError(f"invalid header: {err}") from err
    off += tlen
    vals = np.frombuffer(data, dtype="<c16", count=n**3, offset=off)
    vals = vals.reshape((n, n, n), order="F").astype(complex)
    return CheckpointState(Field3(grid, vals), t, b, p, potential)


def checkpoint_write(state: CheckpointState, path) -> Path:
    """Write atomically: a temporary sibling is renamed over ``path``."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(encode(state))
    os.replace(tmp, path)
    return path


def checkpoint_read(path) -> CheckpointState:
    with open(path, "rb") as fh:
        return decode(fh.read())
