"""Dense embedding matrices: float32 storage, float64 accumulation, EMBM file I/O.

The EMBM wire format is a fixed little-endian layout with no padding:

    bytes 0..3    magic ``EMBM``
    bytes 4..7    format version, u32 (currently 1)
    bytes 8..15   rows, u64
    bytes 16..23  cols, u64
    byte  24      dtype tag, u8 (0 = float32)
    bytes 25..    rows * cols float32 values, row-major

A write followed by a read restores the matrix bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DegenerateInputError, FormatError, ValidationError

MAGIC = b"EMBM"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0
_HEADER = struct.Struct("<4sIQQB")
HEADER_SIZE = _HEADER.size  # 25 bytes


def as_matrix(values) -> np.ndarray:
    """Coerce to a C-contiguous 2-D float32 array without silently reshaping."""
    m = np.asarray(values, dtype=np.float32)
    if m.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return np.ascontiguousarray(m)


def check_finite(matrix: np.ndarray) -> None:
    """Raise if any entry is NaN or infinite, naming the first offending cell."""
    finite = np.isfinite(matrix)
    if not finite.all():
        row, col = np.argwhere(~finite)[0]
        raise ValidationError(
            f"non-finite value {matrix[row, col]!r} at row {int(row)}, col {int(col)}"
        )


def write_matrix(matrix, path) -> None:
    """Write a matrix to ``path`` in EMBM format.

    Rejects non-finite entries; I/O failures propagate as OSError.
    """
    m = as_matrix(matrix)
    check_finite(m)
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, rows, cols, DTYPE_FLOAT32))
        fh.write(m.tobytes(order="C"))


def read_matrix(path) -> np.ndarray:
    """Read an EMBM file, validating structure and finiteness.

    Format violations raise :class:`FormatError` naming the byte offset;
    NaN/Inf payload entries raise :class:`ValidationError` naming row and col.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise FormatError(
            f"truncated header: file is {len(raw)} bytes, need {HEADER_SIZE} (at byte {len(raw)})"
        )
    magic, version, rows, cols, dtype_tag = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version} at byte 4")
    if dtype_tag != DTYPE_FLOAT32:
        raise FormatError(f"unsupported dtype tag {dtype_tag} at byte 24")
    expected = HEADER_SIZE + rows * cols * 4
    if len(raw) < expected:
        raise FormatError(
            f"truncated payload: file ends at byte {len(raw)}, expected {expected} bytes"
        )
    if len(raw) > expected:
        raise FormatError(f"trailing data at byte {expected}: file has {len(raw)} bytes")
    m = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=HEADER_SIZE)
    m = m.reshape(rows, cols).astype(np.float32, copy=True)
    check_finite(m)
    return m


def cosine(u, v) -> float:
    """Cosine similarity of two vectors, accumulated in float64, clamped to [-1, 1]."""
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine undefined for a zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def row_norms(matrix) -> np.ndarray:
    """Per-row L2 norms in float64."""
    m = np.asarray(matrix)
    return np.linalg.norm(m.astype(np.float64), axis=1)


def l2_normalize_rows(matrix) -> np.ndarray:
    """Return a float32 copy with unit-norm rows.

    Zero rows cannot be normalized; the error lists every offending row id.
    """
    m = as_matrix(matrix)
    norms = row_norms(m)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        ids = ", ".join(str(int(i)) for i in zero)
        raise DegenerateInputError(f"cannot normalize zero rows: [{ids}]")
    return (m.astype(np.float64) / norms[:, None]).astype(np.float32)
