import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from inlslab.checkpoint import (VERSION, CheckpointState, CorruptionError, UnsupportedVersionError, checkpoint_read,
                                checkpoint_write, decode, encode)
from inlslab.grid import Field3, Grid3
from inlslab.potential import PotentialSpec

G = Grid3(8, 6.0)
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def state(values=None, V=None, t=0.75):
    if values is None:
        rng = np.random.default_rng(3)
        values = rng.standard_normal(G.shape) + 1j * rng.standard_normal(G.shape)
    return CheckpointState(Field3(G, values), t, 0.5, 3.0, V or PotentialSpec.gaussian(1.5, 0.8))


@pytest.fixture(scope="module")
def blob():
    return encode(state())


@given(arrays(np.float64, (2,) + G.shape, elements=finite), finite)
def test_round_trip_is_bit_exact(parts, t):
    vals = parts[0] + 1j * parts[1]
    back = decode(encode(state(vals, t=t)))
    assert back.field.values.tobytes() == np.ascontiguousarray(vals, dtype=complex).tobytes()
    assert back.t == t
    assert (back.b, back.p) == (0.5, 3.0)
    assert back.potential == PotentialSpec.gaussian(1.5, 0.8)
    assert back.grid == G


def test_layout_is_little_endian_and_x_fastest(blob):
    st_ = state()
    magic, version, n, L, t, b, p = struct.unpack_from("<4sHI4d", blob)
    assert (magic, version, n, L, t, b, p) == (b"INLS", VERSION, 8, 6.0, 0.75, 0.5, 3.0)
    (tlen,) = struct.unpack_from("<I", blob, 42)
    assert PotentialSpec.from_text(blob[46:46 + tlen].decode()) == st_.potential
    off = 46 + tlen
    re, im = struct.unpack_from("<2d", blob, off)
    assert complex(re, im) == st_.field.values[0, 0, 0]
    re, im = struct.unpack_from("<2d", blob, off + 16)
    assert complex(re, im) == st_.field.values[1, 0, 0]
    assert len(blob) == off + 16 * 8**3 + 8


@given(st.data())
def test_any_single_byte_change_is_detected(blob, data):
    i = data.draw(st.integers(0, len(blob) - 1))
    mask = data.draw(st.integers(1, 255))
    bad = bytearray(blob)
    bad[i] ^= mask
    with pytest.raises((CorruptionError, UnsupportedVersionError)):
        decode(bytes(bad))


@given(st.data())
def test_truncation_is_detected(blob, data):
    k = data.draw(st.integers(0, len(blob) - 1))
    with pytest.raises(CorruptionError):
        decode(blob[:k])


def test_trailing_garbage_is_detected(blob):
    with pytest.raises(CorruptionError):
        decode(blob + b"\0")


def test_version_bump_names_both_versions():
    data = encode(state(), version=VERSION + 1)
    with pytest.raises(UnsupportedVersionError) as err:
        decode(data)
    assert str(VERSION + 1) in str(err.value) and str(VERSION) in str(err.value)
    assert err.value.found == VERSION + 1 and err.value.supported == VERSION


def test_file_round_trip_is_atomic(tmp_path):
    path = checkpoint_write(state(), tmp_path / "a.inls")
    assert [p.name for p in tmp_path.iterdir()] == ["a.inls"]
    back = checkpoint_read(path)
    assert np.array_equal(back.field.values, state().field.values)


def test_corrupt_file_raises_oserror_subclass(tmp_path):
    path = tmp_path / "b.inls"
    path.write_bytes(b"INLS" + b"\0" * 20)
    with pytest.raises(OSError):
        checkpoint_read(path)


def test_centred_grid_rejected():
    g = Grid3(8, 6.0, offset=False)
    with pytest.raises(ValueError):
        encode(CheckpointState(Field3(g, np.zeros(g.shape, complex)), 0.0, 0.5, 3.0, PotentialSpec.zero()))
