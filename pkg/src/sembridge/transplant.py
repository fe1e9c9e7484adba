"""Vocabulary transplantation: build a target embedding matrix from a source model.

Overlap tokens are copied bit-exactly from the source matrix. Every other
target row is synthesized by the configured strategy:

    sembridge      convex combination of source rows, weighted by alpha-entmax
                   over bridge-space cosine similarities
    random         i.i.d. N(0, sigma^2) entries
    mean           the global mean source row
    univariate     N(mu, sigma^2) with moments taken over all source entries
    multivariate   per-dimension N(mu_j, sigma_j^2), dimensions independent
    focus_like     sparsemax-weighted average of overlap tokens' source rows
    ofa_like       low-rank source coordinates, softmax over top-k similarities

All sampling is keyed by (seed, target id, dimension) through counter-based
streams, so synthesized rows do not depend on scheduling or chunking.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .bridge import BridgeEmbeddings, _similarity_kernel
from .densevec import as_matrix, check_finite
from .entmax import EntmaxConfig, SparseWeightVector, entmax_batch, softmax_batch, sparsemax_batch
from .errors import AlignmentError, ConfigError, ValidationError
from .vocab import OverlapMap, Vocabulary

STRATEGIES = (
    "sembridge",
    "random",
    "mean",
    "univariate",
    "multivariate",
    "focus_like",
    "ofa_like",
)

FALLBACKS = ("mean", "random")

_BRIDGE_STRATEGIES = ("sembridge", "focus_like", "ofa_like")

CHUNK_ROWS = 256  # fixed staging size; results never depend on it


@dataclass(frozen=True)
class TransplantConfig:
    strategy: str = "sembridge"
    alpha: float = 4.0
    seed: int = 0
    fallback: str = "mean"
    sigma_random: float = 0.02
    ofa_rank: int | None = None  # None resolves to the embedding dimension
    ofa_top_k: int = 10
    report_top_k: int | None = 8  # None records the full support
    exclude_source_ids: tuple[int, ...] = ()

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.fallback not in FALLBACKS:
            raise ConfigError(f"unknown fallback {self.fallback!r}, expected one of {FALLBACKS}")
        if self.alpha < 1.0:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        if self.sigma_random <= 0.0:
            raise ConfigError(f"sigma_random must be positive, got {self.sigma_random}")
        if self.ofa_rank is not None and self.ofa_rank < 1:
            raise ConfigError(f"ofa_rank must be >= 1, got {self.ofa_rank}")
        if self.ofa_top_k < 1:
            raise ConfigError(f"ofa_top_k must be >= 1, got {self.ofa_top_k}")
        if self.report_top_k is not None and self.report_top_k < 1:
            raise ConfigError(f"report_top_k must be >= 1, got {self.report_top_k}")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "alpha": self.alpha,
            "seed": self.seed,
            "fallback": self.fallback,
            "sigma_random": self.sigma_random,
            "ofa_rank": self.ofa_rank,
            "ofa_top_k": self.ofa_top_k,
            "report_top_k": self.report_top_k,
            "exclude_source_ids": list(self.exclude_source_ids),
        }


@dataclass
class TransplantReport:
    """Per-token provenance plus aggregate counts for one transplant run.

    counts partitions the target vocabulary into overlap_copied, synthesized
    and fallback. Weight-bearing provenance records store (source id, weight)
    pairs sorted by descending weight, truncated to report_top_k.
    """

    strategy: str
    counts: dict[str, int]
    support_histogram: dict[int, int]
    provenance: list[dict]
    config: dict
    policy: dict
    wall_time_s: float = 0.0

    def record_for(self, target_id: int) -> dict:
        rec = self.provenance[target_id]
        assert rec["target_id"] == target_id
        return rec

    def to_json_dict(self) -> dict:
        # Wall time deliberately stays out: report files must be byte-identical
        # across reruns and thread counts. Timings live in the run manifest.
        return {
            "strategy": self.strategy,
            "counts": self.counts,
            "support_histogram": {str(k): v for k, v in sorted(self.support_histogram.items())},
            "provenance": self.provenance,
            "config": self.config,
            "policy": self.policy,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, ensure_ascii=False, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def read_json(cls, path) -> "TransplantReport":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(
            strategy=d["strategy"],
            counts=d["counts"],
            support_histogram={int(k): v for k, v in d["support_histogram"].items()},
            provenance=d["provenance"],
            config=d["config"],
            policy=d["policy"],
        )


def init_random_rows(ids: Iterable[int] | int, dim: int, seed: int, sigma: float) -> np.ndarray:
    """N(0, sigma^2) rows, one counter stream per target id."""
    ids = range(ids) if isinstance(ids, int) else ids
    rows = rng.normal_rows(seed, rng.KIND_INIT_RANDOM, ids, dim)
    return (sigma * rows).astype(np.float32)


def init_mean_row(source_emb) -> np.ndarray:
    """The global mean source row, accumulated in float64."""
    m = as_matrix(source_emb)
    return m.astype(np.float64).mean(axis=0).astype(np.float32)


def init_univariate_rows(source_emb, ids: Iterable[int] | int, seed: int) -> np.ndarray:
    """Rows sampled i.i.d. from N(mu, sigma^2) fit on all source entries."""
    m = as_matrix(source_emb).astype(np.float64)
    mu = float(m.mean())
    sd = float(m.std())
    ids = range(ids) if isinstance(ids, int) else ids
    rows = rng.normal_rows(seed, rng.KIND_INIT_UNIVARIATE, ids, m.shape[1])
    return (mu + sd * rows).astype(np.float32)


def init_multivariate_rows(source_emb, ids: Iterable[int] | int, seed: int) -> np.ndarray:
    """Rows sampled from per-dimension normals fit on the source columns."""
    m = as_matrix(source_emb).astype(np.float64)
    mu = m.mean(axis=0)
    sd = m.std(axis=0)
    ids = range(ids) if isinstance(ids, int) else ids
    rows = rng.normal_rows(seed, rng.KIND_INIT_MULTIVARIATE, ids, m.shape[1])
    return (mu[None, :] + sd[None, :] * rows).astype(np.float32)


def init_sembridge_row(
    sim_values, source_emb, ecfg: EntmaxConfig | None = None
) -> tuple[np.ndarray, SparseWeightVector]:
    """Synthesize one row from a similarity vector.

    The row is the entmax-weighted combination of source rows, accumulated in
    float64 over the support only and rounded once to float32. A one-hot
    weight vector therefore reproduces its source row bit-exactly.
    """
    ecfg = ecfg or EntmaxConfig()
    sims = np.asarray(sim_values, dtype=np.float64).ravel()
    m = as_matrix(source_emb)
    if sims.size != m.shape[0]:
        raise AlignmentError(
            f"similarity vector has {sims.size} entries but source matrix has {m.shape[0]} rows"
        )
    weights = SparseWeightVector.from_dense(entmax_batch(sims[None, :], ecfg)[0])
    row = _combine_rows(weights.weights, m[weights.indices])
    return row, weights


def _combine_rows(weights64: np.ndarray, rows_f32: np.ndarray) -> np.ndarray:
    return (weights64 @ rows_f32.astype(np.float64)).astype(np.float32)


def init_focus_like(
    sim_to_overlap, overlap_source_ids: Sequence[int], source_emb
) -> tuple[np.ndarray, SparseWeightVector]:
    """Sparsemax-weighted average of overlap tokens' source rows.

    sim_to_overlap holds similarities against overlap_source_ids, in order.
    The returned weight vector is indexed by source id over the full source
    vocabulary.
    """
    sids = np.asarray(overlap_source_ids, dtype=np.int64)
    if sids.size == 0:
        raise ConfigError("focus_like requires a non-empty overlap")
    sims = np.asarray(sim_to_overlap, dtype=np.float64).ravel()
    if sims.size != sids.size:
        raise AlignmentError(
            f"got {sims.size} similarities for {sids.size} overlap candidates"
        )
    m = as_matrix(source_emb)
    p = sparsemax_batch(sims[None, :])[0]
    local = np.flatnonzero(p > 0.0)
    row = _combine_rows(p[local], m[sids[local]])
    dense = np.zeros(m.shape[0], dtype=np.float64)
    dense[sids[local]] = p[local]
    return row, SparseWeightVector.from_dense(dense)


class OfaDecomposition:
    """Shared SVD factors for ofa_like: E ~ F @ P with F = U_r S_r, P = V_r^T."""

    def __init__(self, source_emb, rank: int):
        m = as_matrix(source_emb).astype(np.float64)
        max_rank = min(m.shape)
        if not 1 <= rank <= max_rank:
            raise ConfigError(f"ofa_rank must be in [1, {max_rank}], got {rank}")
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        self.rank = rank
        self.coords = u[:, :rank] * s[:rank]  # (n_source, rank)
        self.projection = vt[:rank]  # (rank, dim)


def init_ofa_like(
    decomposition: OfaDecomposition, sim_values, top_k: int
) -> tuple[np.ndarray, SparseWeightVector]:
    """Softmax-weighted low-rank coordinates, mapped back through the projection."""
    sims = np.asarray(sim_values, dtype=np.float64).ravel()
    k = min(top_k, sims.size)
    # Highest similarity first; ties resolve to the lower source id.
    order = np.lexsort((np.arange(sims.size), -sims))[:k]
    w = softmax_batch(sims[order][None, :])[0]
    coords = w @ decomposition.coords[order]
    row = (coords @ decomposition.projection).astype(np.float32)
    dense = np.zeros(sims.size, dtype=np.float64)
    dense[order] = w
    return row, SparseWeightVector.from_dense(dense)


def _weight_record(
    target_id: int, strategy: str, weights: SparseWeightVector, top_k: int | None
) -> dict:
    order = np.lexsort((weights.indices, -weights.weights))
    if top_k is not None:
        order = order[:top_k]
    pairs = [[int(weights.indices[i]), float(weights.weights[i])] for i in order]
    return {"target_id": target_id, "kind": "weights", "strategy": strategy, "weights": pairs}


def _validate_inputs(source_emb, source_vocab, target_vocab, overlap):
    m = as_matrix(source_emb)
    check_finite(m)
    if m.shape[0] != len(source_vocab):
        raise AlignmentError(
            f"source matrix has {m.shape[0]} rows but source vocabulary has"
            f" {len(source_vocab)} tokens"
        )
    for tid, sid in overlap.pairs.items():
        if not 0 <= tid < len(target_vocab):
            raise ValidationError(f"overlap target id {tid} out of range")
        if not 0 <= sid < len(source_vocab):
            raise ValidationError(f"overlap source id {sid} out of range")
    return m


def _require_bridges(cfg, bridge_src, bridge_tgt, source_vocab, target_vocab):
    if bridge_src is None or bridge_tgt is None:
        raise ConfigError(f"strategy {cfg.strategy!r} requires both bridge embedding sets")
    if len(bridge_src.vocab) != len(source_vocab):
        raise AlignmentError(
            f"source bridge covers {len(bridge_src.vocab)} tokens, vocabulary has"
            f" {len(source_vocab)}"
        )
    if len(bridge_tgt.vocab) != len(target_vocab):
        raise AlignmentError(
            f"target bridge covers {len(bridge_tgt.vocab)} tokens, vocabulary has"
            f" {len(target_vocab)}"
        )
    if bridge_src.dim != bridge_tgt.dim:
        raise AlignmentError(
            f"bridge dimension mismatch: source {bridge_src.dim} vs target {bridge_tgt.dim}"
        )


def _chunked(ids: Sequence[int], size: int) -> list[list[int]]:
    return [list(ids[i : i + size]) for i in range(0, len(ids), size)]


def _run_chunks(chunks, worker, threads: int):
    if threads <= 1 or len(chunks) <= 1:
        return [worker(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, chunks))


def transplant(
    source_emb,
    source_vocab: Vocabulary,
    target_vocab: Vocabulary,
    overlap: OverlapMap,
    bridge_src: BridgeEmbeddings | None = None,
    bridge_tgt: BridgeEmbeddings | None = None,
    cfg: TransplantConfig | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, TransplantReport]:
    """Build the target embedding matrix and its provenance report.

    The output has one row per target token: overlap rows are bit-exact copies,
    the rest come from cfg.strategy, and bridge-based strategies fall back to
    cfg.fallback for tokens without a usable target bridge vector.
    """
    cfg = cfg or TransplantConfig()
    started = time.perf_counter()
    src = _validate_inputs(source_emb, source_vocab, target_vocab, overlap)
    n_target = len(target_vocab)
    dim = src.shape[1]
    out = np.zeros((n_target, dim), dtype=np.float32)

    provenance: dict[int, dict] = {}
    for tid in sorted(overlap.pairs):
        sid = overlap.pairs[tid]
        out[tid] = src[sid]
        provenance[tid] = {"target_id": tid, "kind": "copied", "source_id": sid}

    remaining = overlap.remaining(n_target)
    support_histogram: dict[int, int] = {}

    if cfg.strategy in _BRIDGE_STRATEGIES:
        _require_bridges(cfg, bridge_src, bridge_tgt, source_vocab, target_vocab)
        synth_ids = [t for t in remaining if t not in bridge_tgt.missing]
        fallback_ids = [t for t in remaining if t in bridge_tgt.missing]
    else:
        synth_ids = list(remaining)
        fallback_ids = []

    if cfg.strategy == "mean" and synth_ids:
        row = init_mean_row(src)
        for tid in synth_ids:
            out[tid] = row
            provenance[tid] = {"target_id": tid, "kind": "synthesized", "strategy": "mean"}
    elif cfg.strategy in ("random", "univariate", "multivariate") and synth_ids:
        if cfg.strategy == "random":
            rows = init_random_rows(synth_ids, dim, cfg.seed, cfg.sigma_random)
        elif cfg.strategy == "univariate":
            rows = init_univariate_rows(src, synth_ids, cfg.seed)
        else:
            rows = init_multivariate_rows(src, synth_ids, cfg.seed)
        for pos, tid in enumerate(synth_ids):
            out[tid] = rows[pos]
            provenance[tid] = {"target_id": tid, "kind": "synthesized", "strategy": cfg.strategy}
    elif cfg.strategy == "sembridge" and synth_ids:
        _synthesize_sembridge(
            out, provenance, support_histogram, synth_ids, src, bridge_src, bridge_tgt, cfg, threads
        )
    elif cfg.strategy == "focus_like" and synth_ids:
        _synthesize_focus(
            out, provenance, support_histogram, synth_ids, src, overlap, bridge_src, bridge_tgt, cfg
        )
    elif cfg.strategy == "ofa_like" and synth_ids:
        _synthesize_ofa(
            out, provenance, support_histogram, synth_ids, src, bridge_src, bridge_tgt, cfg
        )

    if fallback_ids:
        if cfg.fallback == "mean":
            row = init_mean_row(src)
            for tid in fallback_ids:
                out[tid] = row
        else:
            rows = init_random_rows(fallback_ids, dim, cfg.seed, cfg.sigma_random)
            for pos, tid in enumerate(fallback_ids):
                out[tid] = rows[pos]
        for tid in fallback_ids:
            provenance[tid] = {"target_id": tid, "kind": "fallback", "strategy": cfg.fallback}

    counts = {
        "overlap_copied": len(overlap.pairs),
        "synthesized": len(synth_ids),
        "fallback": len(fallback_ids),
    }
    report = TransplantReport(
        strategy=cfg.strategy,
        counts=counts,
        support_histogram=support_histogram,
        provenance=[provenance[tid] for tid in range(n_target)],
        config=cfg.to_dict(),
        policy=overlap.policy.to_dict(),
        wall_time_s=time.perf_counter() - started,
    )
    return out, report


def _candidate_mask(n_source: int, exclude: Sequence[int]) -> np.ndarray | None:
    if not exclude:
        return None
    mask = np.zeros(n_source, dtype=bool)
    for sid in exclude:
        if not 0 <= sid < n_source:
            raise ConfigError(f"excluded source id {sid} out of range")
        mask[sid] = True
    if mask.all():
        raise ConfigError("exclusion list removes every source candidate")
    return mask


def _synthesize_sembridge(
    out, provenance, support_histogram, synth_ids, src, bridge_src, bridge_tgt, cfg, threads
):
    ecfg = EntmaxConfig(alpha=cfg.alpha)
    src64 = bridge_src.matrix.astype(np.float64)
    excluded = _candidate_mask(src.shape[0], cfg.exclude_source_ids)
    keep = None if excluded is None else np.flatnonzero(~excluded)
    chunks = _chunked(synth_ids, CHUNK_ROWS)

    def worker(chunk: list[int]):
        block64 = bridge_tgt.matrix[chunk].astype(np.float64)
        sims = np.empty((len(chunk), src.shape[0]), dtype=np.float32)
        for i in range(len(chunk)):
            sims[i] = _similarity_kernel(block64[i], src64)
        cand = sims if keep is None else sims[:, keep]
        probs = entmax_batch(cand.astype(np.float64), ecfg)
        records = []
        for i, tid in enumerate(chunk):
            local = np.flatnonzero(probs[i] > 0.0)
            sids = local if keep is None else keep[local]
            w = probs[i][local]
            out[tid] = _combine_rows(w, src[sids])
            weights = SparseWeightVector(
                dim=src.shape[0], indices=sids.astype(np.int64), weights=w
            )
            records.append(
                (tid, weights.support_size, _weight_record(tid, "sembridge", weights, cfg.report_top_k))
            )
        return records

    for chunk_records in _run_chunks(chunks, worker, threads):
        for tid, size, record in chunk_records:
            support_histogram[size] = support_histogram.get(size, 0) + 1
            provenance[tid] = record


def _synthesize_focus(
    out, provenance, support_histogram, synth_ids, src, overlap, bridge_src, bridge_tgt, cfg
):
    excluded = set(cfg.exclude_source_ids)
    cand_ids = sorted(
        {sid for sid in overlap.pairs.values() if sid not in excluded}
        - set(bridge_src.missing)
    )
    if not cand_ids:
        raise ConfigError("focus_like requires overlap tokens with usable bridge vectors")
    cand = np.asarray(cand_ids, dtype=np.int64)
    cand64 = bridge_src.matrix[cand].astype(np.float64)
    for start in range(0, len(synth_ids), CHUNK_ROWS):
        chunk = synth_ids[start : start + CHUNK_ROWS]
        block64 = bridge_tgt.matrix[chunk].astype(np.float64)
        sims = np.empty((len(chunk), cand.size), dtype=np.float32)
        for i in range(len(chunk)):
            sims[i] = _similarity_kernel(block64[i], cand64)
        probs = sparsemax_batch(sims.astype(np.float64))
        for i, tid in enumerate(chunk):
            local = np.flatnonzero(probs[i] > 0.0)
            w = probs[i][local]
            out[tid] = _combine_rows(w, src[cand[local]])
            weights = SparseWeightVector(dim=src.shape[0], indices=cand[local], weights=w)
            support_histogram[weights.support_size] = (
                support_histogram.get(weights.support_size, 0) + 1
            )
            provenance[tid] = _weight_record(tid, "focus_like", weights, cfg.report_top_k)


def _synthesize_ofa(out, provenance, support_histogram, synth_ids, src, bridge_src, bridge_tgt, cfg):
    rank = cfg.ofa_rank if cfg.ofa_rank is not None else min(src.shape)
    decomposition = OfaDecomposition(src, rank)
    src64 = bridge_src.matrix.astype(np.float64)
    excluded = _candidate_mask(src.shape[0], cfg.exclude_source_ids)
    for start in range(0, len(synth_ids), CHUNK_ROWS):
        chunk = synth_ids[start : start + CHUNK_ROWS]
        block64 = bridge_tgt.matrix[chunk].astype(np.float64)
        for i, tid in enumerate(chunk):
            sims = _similarity_kernel(block64[i], src64).astype(np.float64)
            if excluded is not None:
                sims[excluded] = -np.inf
            row, weights = init_ofa_like(decomposition, sims, cfg.ofa_top_k)
            out[tid] = row
            support_histogram[weights.support_size] = (
                support_histogram.get(weights.support_size, 0) + 1
            )
            provenance[tid] = _weight_record(tid, "ofa_like", weights, cfg.report_top_k)
