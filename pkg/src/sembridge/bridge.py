"""Bridge-space embeddings and similarity streaming.

A bridge pairs a vocabulary with one dense vector per token in a shared
semantic space. Rows are unit-normalized at load time; all-zero rows mark
tokens the bridge could not encode and are reported as missing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import densevec
from .errors import AlignmentError
from .vocab import Vocabulary


@dataclass
class BridgeEmbeddings:
    vocab: Vocabulary
    matrix: np.ndarray  # float32, rows unit-norm except missing rows (all zero)
    missing: frozenset[int]

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def vector(self, token_id: int) -> np.ndarray:
        return self.matrix[token_id]


@dataclass(frozen=True)
class SimilarityRow:
    """Cosine similarities of one target token against every source token."""

    target_id: int
    values: np.ndarray  # float32, length = source vocab size, clamped to [-1, 1]


def from_arrays(vocab: Vocabulary, matrix) -> BridgeEmbeddings:
    """Build a bridge from in-memory rows, normalizing and flagging zero rows."""
    m = densevec.as_matrix(matrix)
    densevec.check_finite(m)
    if m.shape[0] != len(vocab):
        raise AlignmentError(
            f"bridge matrix has {m.shape[0]} rows but vocabulary has {len(vocab)} tokens"
        )
    norms = densevec.row_norms(m)
    missing = frozenset(int(i) for i in np.flatnonzero(norms == 0.0))
    out = np.zeros_like(m)
    present = norms > 0.0
    if present.any():
        out[present] = (m[present].astype(np.float64) / norms[present, None]).astype(np.float32)
    return BridgeEmbeddings(vocab=vocab, matrix=out, missing=missing)


def load_bridge(vocab_path, matrix_path) -> tuple[BridgeEmbeddings, frozenset[int]]:
    """Load a vocabulary/matrix pair from disk.

    Returns the normalized bridge together with the set of missing token ids.
    Row count disagreements raise :class:`AlignmentError`.
    """
    vocab = Vocabulary.read_jsonl(vocab_path)
    matrix = densevec.read_matrix(matrix_path)
    bridge = from_arrays(vocab, matrix)
    return bridge, bridge.missing


def similarity_values(target_vec, source: BridgeEmbeddings) -> np.ndarray:
    """Similarities of one unit vector against all source rows.

    Accumulates in float64, rounds once to float32, clamps to [-1, 1].
    Missing source rows yield similarity 0.
    """
    src64 = source.matrix.astype(np.float64)
    return _similarity_kernel(np.asarray(target_vec, dtype=np.float64).ravel(), src64)


def _similarity_kernel(target64: np.ndarray, source64: np.ndarray) -> np.ndarray:
    vals = source64 @ target64
    return np.clip(vals, -1.0, 1.0).astype(np.float32)


def stream_similarities(
    targets: BridgeEmbeddings,
    target_ids: Sequence[int],
    source: BridgeEmbeddings,
    chunk_rows: int = 256,
) -> Iterator[SimilarityRow]:
    """Yield one SimilarityRow per requested target id, in the given order.

    Each row is computed with its own float64 matrix-vector product, so the
    output is identical for every chunk_rows value. chunk_rows only bounds
    how many target rows are staged at once.
    """
    if chunk_rows < 1:
        raise AlignmentError(f"chunk_rows must be >= 1, got {chunk_rows}")
    if targets.dim != source.dim:
        raise AlignmentError(
            f"bridge dimension mismatch: target {targets.dim} vs source {source.dim}"
        )
    src64 = source.matrix.astype(np.float64)
    ids = list(target_ids)
    for start in range(0, len(ids), chunk_rows):
        chunk = ids[start : start + chunk_rows]
        block64 = targets.matrix[chunk].astype(np.float64)
        for offset, tid in enumerate(chunk):
            yield SimilarityRow(
                target_id=int(tid),
                values=_similarity_kernel(block64[offset], src64),
            )
