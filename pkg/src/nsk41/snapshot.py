"""Binary snapshot format for spectral fields.

Layout (all integers little-endian):
    magic   8 bytes  b"NSK41FLD"
    version u32      format version (currently 1)
    N       u32      grid resolution per axis
    L_box   f64      physical half-side of the box
    ell0    f64      injection scale the field was built against (0 if n/a)
then the coefficients in row-major k-order over the unshifted FFT layout,
one mode at a time, components interleaved per mode, each coefficient as a
little-endian f64 pair (re, im).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import GridSpec, SpectralField

MAGIC = b"NSK41FLD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIdd")


def write_snapshot(path, fld: SpectralField, ell0: float = 0.0) -> None:
    g = fld.grid
    # mode-major layout: (N, N, N, 3) with (re, im) per component
    interleaved = np.ascontiguousarray(
        np.moveaxis(fld.coeffs, 0, -1), dtype="<c16"
    )
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC, FORMAT_VERSION, g.resolution, g.box_half_side, ell0
            )
        )
        fh.write(interleaved.tobytes())


def read_snapshot(path, grid: GridSpec | None = None):
    """Read a snapshot; returns (SpectralField, ell0).

    If ``grid`` is given the stored geometry must match it; otherwise a
    fresh GridSpec with default dealias fraction is built from the header.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, n, box_half_side, ell0 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    expected = _HEADER.size + 3 * n**3 * 16
    if len(raw) != expected:
        raise ValueError(
            f"{path}: payload size {len(raw)} does not match N={n}"
        )
    if grid is None:
        grid = GridSpec(box_half_side=box_half_side, resolution=n)
    elif grid.resolution != n or grid.box_half_side != box_half_side:
        raise ValueError(
            f"{path}: snapshot geometry (N={n}, L_box={box_half_side}) does "
            f"not match the provided grid"
        )
    flat = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    coeffs = np.moveaxis(flat.reshape(n, n, n, 3), -1, 0).astype(np.complex128)
    return SpectralField(grid, coeffs), ell0
