"""Binary snapshot format: exact round trips and header validation."""

import struct

import numpy as np
import pytest

from nsk41.snapshot import FORMAT_VERSION, MAGIC, read_snapshot, write_snapshot
from nsk41.spectral import GridSpec, SpectralField, hermitian_symmetrize


@pytest.fixture
def field():
    g = GridSpec(box_half_side=np.pi, resolution=8)
    rng = np.random.default_rng(5)
    c = rng.standard_normal((3, 8, 8, 8)) + 1j * rng.standard_normal((3, 8, 8, 8))
    return hermitian_symmetrize(SpectralField(g, c))


def test_roundtrip_bit_exact(tmp_path, field):
    path = tmp_path / "field.bin"
    write_snapshot(path, field, ell0=0.75)
    back, ell0 = read_snapshot(path)
    assert ell0 == 0.75
    assert back.grid.resolution == 8
    assert back.grid.box_half_side == np.pi
    assert np.array_equal(back.coeffs, field.coeffs)


def test_header_layout(tmp_path, field):
    path = tmp_path / "field.bin"
    write_snapshot(path, field, ell0=1.5)
    raw = path.read_bytes()
    magic, version, n, box, ell0 = struct.unpack_from("<8sIIdd", raw)
    assert magic == MAGIC
    assert version == FORMAT_VERSION
    assert n == 8
    assert box == np.pi
    assert ell0 == 1.5
    assert len(raw) == struct.calcsize("<8sIIdd") + 3 * 8**3 * 16


def test_first_payload_mode_is_k_zero_components_interleaved(tmp_path, field):
    path = tmp_path / "field.bin"
    write_snapshot(path, field)
    raw = path.read_bytes()
    offset = struct.calcsize("<8sIIdd")
    vals = struct.unpack_from("<6d", raw, offset)
    for comp in range(3):
        assert vals[2 * comp] == field.coeffs[comp, 0, 0, 0].real
        assert vals[2 * comp + 1] == field.coeffs[comp, 0, 0, 0].imag


def test_bad_magic_rejected(tmp_path, field):
    path = tmp_path / "field.bin"
    write_snapshot(path, field)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(path)


def test_truncation_rejected(tmp_path, field):
    path = tmp_path / "field.bin"
    write_snapshot(path, field)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="size"):
        read_snapshot(path)


def test_grid_mismatch_rejected(tmp_path, field):
    path = tmp_path / "field.bin"
    write_snapshot(path, field)
    other = GridSpec(box_half_side=np.pi, resolution=16)
    with pytest.raises(ValueError, match="geometry"):
        read_snapshot(path, grid=other)
