import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import toma
from toma import DataError
from toma.tensorfile import HEADER, MAGIC, VERSION


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((3, 12, 5)).astype(np.float32)
    # extreme but finite values must survive unchanged
    data[0, 0, 0] = np.float32(3.4e38)
    data[0, 0, 1] = np.float32(1e-45)
    data[0, 0, 2] = np.float32(-0.0)
    path = tmp_path / "t.toma"
    toma.write_tensor_file(path, data, grid=(3, 4))
    back, grid = toma.read_tensor_file(path)
    assert np.array_equal(back, data)
    assert back.tobytes() == data.tobytes()
    assert grid == (3, 4)


def test_two_dim_payload_gets_batch_axis(tmp_path):
    data = np.ones((6, 2), dtype=np.float32)
    path = tmp_path / "t.toma"
    toma.write_tensor_file(path, data)
    back, grid = toma.read_tensor_file(path)
    assert back.shape == (1, 6, 2)
    assert grid is None


def test_header_layout_is_frozen(tmp_path):
    path = tmp_path / "t.toma"
    toma.write_tensor_file(path, np.zeros((2, 6, 3), dtype=np.float32), grid=(2, 3))
    raw = path.read_bytes()
    assert len(raw) == 28 + 2 * 6 * 3 * 4
    magic, version, b, n, d, gh, gw = struct.unpack_from("<4sIIIIII", raw)
    assert (magic, version) == (MAGIC, VERSION)
    assert (b, n, d, gh, gw) == (2, 6, 3, 2, 3)


def test_write_rejects_bad_payloads(tmp_path):
    path = tmp_path / "t.toma"
    with pytest.raises(DataError, match="non-finite"):
        toma.write_tensor_file(path, np.array([[np.inf]], dtype=np.float32))
    with pytest.raises(DataError, match="non-finite"):
        toma.write_tensor_file(path, np.array([[np.nan]], dtype=np.float32))
    with pytest.raises(DataError):
        toma.write_tensor_file(path, np.zeros((0, 3), dtype=np.float32))
    with pytest.raises(DataError):
        toma.write_tensor_file(path, np.zeros(3, dtype=np.float32))
    with pytest.raises(DataError, match="grid"):
        toma.write_tensor_file(path, np.zeros((4, 3), dtype=np.float32), grid=(3, 3))


def test_read_rejects_corrupted_files(tmp_path):
    good = tmp_path / "good.toma"
    toma.write_tensor_file(good, np.ones((2, 4, 3), dtype=np.float32), grid=(2, 2))
    raw = bytearray(good.read_bytes())

    short = tmp_path / "short.toma"
    short.write_bytes(raw[:10])
    with pytest.raises(DataError, match="truncated"):
        toma.read_tensor_file(short)

    wrong_magic = tmp_path / "magic.toma"
    wrong_magic.write_bytes(b"NOPE" + bytes(raw[4:]))
    with pytest.raises(DataError, match="magic"):
        toma.read_tensor_file(wrong_magic)

    wrong_version = tmp_path / "version.toma"
    wrong_version.write_bytes(raw[:4] + struct.pack("<I", 9) + bytes(raw[8:]))
    with pytest.raises(DataError, match="version"):
        toma.read_tensor_file(wrong_version)

    clipped = tmp_path / "clipped.toma"
    clipped.write_bytes(bytes(raw[:-4]))
    with pytest.raises(DataError, match="length"):
        toma.read_tensor_file(clipped)

    padded = tmp_path / "padded.toma"
    padded.write_bytes(bytes(raw) + b"\x00\x00")
    with pytest.raises(DataError, match="length"):
        toma.read_tensor_file(padded)

    bad_grid = tmp_path / "grid.toma"
    header = HEADER.pack(MAGIC, VERSION, 2, 4, 3, 3, 3)
    bad_grid.write_bytes(header + bytes(raw[HEADER.size:]))
    with pytest.raises(DataError, match="grid"):
        toma.read_tensor_file(bad_grid)

    poisoned = tmp_path / "nan.toma"
    payload = np.full((2, 4, 3), np.nan, dtype="<f4").tobytes()
    poisoned.write_bytes(raw[:HEADER.size] + payload)
    with pytest.raises(DataError, match="non-finite"):
        toma.read_tensor_file(poisoned)

    empty_dim = tmp_path / "empty.toma"
    empty_dim.write_bytes(HEADER.pack(MAGIC, VERSION, 0, 4, 3, 0, 0))
    with pytest.raises(DataError, match="at least 1"):
        toma.read_tensor_file(empty_dim)


@settings(max_examples=25, deadline=None)
@given(b=st.integers(1, 3), n=st.integers(1, 16), d=st.integers(1, 8),
       seed=st.integers(0, 1000))
def test_random_shapes_round_trip(b, n, d, seed, tmp_path_factory):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((b, n, d)).astype(np.float32)
    path = tmp_path_factory.mktemp("io") / "t.toma"
    toma.write_tensor_file(path, data)
    back, grid = toma.read_tensor_file(path)
    assert np.array_equal(back, data)
    assert grid is None
