"""On-disk formats shared with the transplant toolkit.

Implemented here from the format documentation rather than imported; the
file layout, not any library, is the contract between the two packages.
EMBM: little-endian header (magic "EMBM", u32 version=1, u64 rows, u64
cols, u8 dtype=0) followed by row-major float32. Vocabularies are JSONL
with one {"id": N, "token": "..."} per line, ids dense and ascending.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"EMBM"
VERSION = 1
DTYPE_F32 = 0
HEADER = struct.Struct("<4sIQQB")


class VocabError(ValueError):
    """Vocabulary file is missing, malformed, or inconsistent."""


class ModelLoadError(RuntimeError):
    """The pretrained encoder could not be loaded."""


def write_matrix(matrix: np.ndarray, path) -> None:
    a = np.ascontiguousarray(matrix, dtype=np.float32)
    if a.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite values")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1], DTYPE_F32))
        fh.write(a.astype("<f4", copy=False).tobytes())


def read_vocab(path) -> list[str]:
    """Token strings in id order; any structural problem raises VocabError."""
    tokens: list[str] = []
    seen: set[str] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise VocabError(f"{path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise VocabError(f"{path}, line {lineno}: not valid JSON: {exc}") from exc
            if not isinstance(record, dict) or "id" not in record or "token" not in record:
                raise VocabError(f"{path}, line {lineno}: expected an object with id and token")
            token = record["token"]
            if record["id"] != lineno - 1:
                raise VocabError(
                    f"{path}, line {lineno}: ids must be dense ascending from 0,"
                    f" got {record['id']}"
                )
            if not isinstance(token, str) or not token:
                raise VocabError(f"{path}, line {lineno}: token must be a non-empty string")
            if token in seen:
                raise VocabError(f"{path}, line {lineno}: duplicate token {token!r}")
            seen.add(token)
            tokens.append(token)
    if not tokens:
        raise VocabError(f"{path}: vocabulary is empty")
    return tokens
