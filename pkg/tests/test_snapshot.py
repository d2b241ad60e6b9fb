import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from nlsexit.grid import make_grid
from nlsexit.snapshot import decode, encode, read_snapshot, write_snapshot


def test_header_layout():
    g = make_grid(1, 20, 256)
    data = encode(g, np.zeros(256, dtype=complex))
    assert data[:4] == b"NLSF"
    assert struct.unpack_from("<IQd", data, 4) == (1, 256, 20.0)
    assert len(data) == 4 + 4 + 8 + 8 + 16 * 256


def test_body_is_interleaved_re_im():
    g = make_grid(1, 20, 256)
    u = np.arange(256) + 1j * -np.arange(256)
    body = np.frombuffer(encode(g, u)[24:], dtype="<f8")
    assert body[2] == 1.0 and body[3] == -1.0


def test_file_roundtrip(tmp_path):
    g = make_grid(3, 12.5, 300)
    u = np.exp(-g.x) * (1 + 2j)
    f = read_snapshot(write_snapshot(tmp_path / "u.nlsf", g, u))
    assert f.grid.dim == 3 and f.grid.N == 300 and f.grid.L == 12.5
    assert np.array_equal(f.values, u)


def test_rejects_bad_magic_and_truncation():
    g = make_grid(1, 20, 256)
    data = encode(g, np.zeros(256, dtype=complex))
    with pytest.raises(ValueError, match="magic"):
        decode(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        decode(data[:-1])
    with pytest.raises(ValueError):
        decode(data[:10])


@settings(max_examples=25, deadline=None)
@given(arrays(np.complex128, 256, elements=st.complex_numbers(allow_nan=False, allow_infinity=False)), st.floats(0.1, 100))
def test_roundtrip_bit_exact(u, L):
    g = make_grid(1, L, 256)
    f = decode(encode(g, u))
    assert f.grid.L == L
    assert np.array_equal(f.values.view(np.uint64), u.view(np.uint64))
