"""Binary snapshots and CSV time series.

Snapshot layout, little-endian throughout:

    offset  size  content
    0       4     magic b"NPE2"
    4       2     format version (u16), currently 1
    6       4     n (u32)
    10      1     variant tag (u8): 0 NPE, 1 NPNS, 2 REGULARIZED
    11      48    time, D, eps, kbtk, nu, ell (6 x f64)
    59      ...   rho, sigma, omega coefficients; each an n x (n//2+1) array
                  of (re, im) f64 pairs in row-major order (k1 in FFT order,
                  k2 = 0..n/2)
    end-8   8     BLAKE2b digest (digest_size=8) of every preceding byte

The series file is CSV with a header row; columns follow
DiagnosticsRecord field order and floats are written with repr() so they
parse back exactly.
"""

import csv
import hashlib
import os
import struct

import numpy as np

from .diagnostics import DiagnosticsRecord
from .errors import BadMagic, ChecksumMismatch, VersionMismatch
from .model import PhysParams, SimState, Variant
from .spectral import Grid

MAGIC = b"NPE2"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIB6d")
_DIGEST = 8
_VARIANT_TAGS = {Variant.NPE: 0, Variant.NPNS: 1, Variant.REGULARIZED: 2}
_TAG_VARIANTS = {v: k for k, v in _VARIANT_TAGS.items()}


def _digest(data):
    return hashlib.blake2b(data, digest_size=_DIGEST).digest()


def encode_snapshot(state, params):
    grid = state.grid
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, grid.n, _VARIANT_TAGS[params.variant],
        float(state.time), params.D, params.eps, params.kbtk, params.nu, params.ell,
    )
    payload = np.ascontiguousarray(state.stacked(), dtype="<c16").tobytes()
    body = header + payload
    return body + _digest(body)


def decode_snapshot(data):
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"not a snapshot (magic {bytes(data[:4])!r})")
    if len(data) < 6:
        raise ChecksumMismatch("snapshot truncated inside header")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"snapshot format version {version}, expected {FORMAT_VERSION}")
    if len(data) < _HEADER.size + _DIGEST:
        raise ChecksumMismatch("snapshot truncated inside header")
    _, _, n, tag, time, D, eps, kbtk, nu, ell = _HEADER.unpack_from(data, 0)
    grid = Grid(n)
    count = 3 * n * (n // 2 + 1)
    expected = _HEADER.size + 16 * count + _DIGEST
    if len(data) != expected:
        raise ChecksumMismatch(f"snapshot has {len(data)} bytes, expected {expected}")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if _digest(body) != digest:
        raise ChecksumMismatch("snapshot checksum does not match contents")
    try:
        variant = _TAG_VARIANTS[tag]
    except KeyError:
        raise ChecksumMismatch(f"unknown variant tag {tag}") from None
    coeffs = np.frombuffer(body, dtype="<c16", count=count, offset=_HEADER.size)
    coeffs = coeffs.astype(complex).reshape((3,) + grid.spectral_shape)
    params = PhysParams(D=D, eps=eps, kbtk=kbtk, nu=nu, ell=ell, variant=variant)
    return SimState.from_stacked(grid, coeffs, time), params


def write_snapshot(state, params, path):
    data = encode_snapshot(state, params)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_snapshot(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_snapshot(data)


def _format(value):
    return repr(float(value))


def append_series_row(record, path):
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(DiagnosticsRecord.columns())
        writer.writerow([_format(v) for v in record.values()])


def read_series(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != DiagnosticsRecord.columns():
            raise ValueError(f"unexpected series header in {path}")
        return [DiagnosticsRecord(*map(float, row)) for row in reader]
