"""A fully synthetic twin-language benchmark for transplant strategies.

The world has a source language (tokens with embeddings and bridge vectors)
and a target language in which every token has a true source counterpart.
A configurable fraction of target tokens share their counterpart's exact
string and bridge vector; the rest get a noisy copy of the counterpart's
bridge vector. Documents are multisets of source tokens drawn from topical
pools, queries are token-wise translations of document fragments, and a doc
is relevant to a query when they share at least ``TAU_REL`` content tokens
in source form (the originating document always qualifies).

Retrieval uses a tied-projection encoder: output dimension j scores
``sum_t max(dot(emb[token_t], output_matrix[j]) - threshold, 0)``. The
threshold models the activation bias of a trained sparse encoder: rows far
from the source embedding distribution (tiny random vectors, blurred
mixtures) fail to clear it and produce empty activations, while rows with
source-like per-dimension statistics stay alive. Source rows share a common
anchor direction so that per-dimension moments carry that scale information.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import densevec, rng
from .bridge import BridgeEmbeddings, from_arrays
from .errors import InapplicableError, ValidationError
from .retrieval import (
    Qrels,
    SparseVector,
    build_index,
    flops_metric,
    ndcg_at_k,
    read_qrels,
    search,
    write_qrels,
    write_vectors_jsonl,
)
from .transplant import TransplantConfig, TransplantReport, transplant
from .vocab import Vocabulary, compute_overlap

QUERY_LEN = 5
TAU_REL = 1
N_TOPICS = 5
ANCHOR_WEIGHT = 0.5  # fraction of each source row pointing along the shared anchor
DOC_TOP_K = 48
QUERY_TOP_K = 16
ENCODE_THRESHOLD = 0.4
BENCH_NDCG_K = 10


@dataclass(frozen=True)
class SyntheticLanguageSpec:
    n_source: int = 2000
    n_target: int = 500
    overlap_fraction: float = 0.1
    bridge_dim: int = 32
    model_dim: int = 48
    noise_sigma: float = 0.05
    docs: int = 500
    queries: int = 100
    doc_len: int = 20
    seed: int = 42

    def __post_init__(self):
        if self.n_source < 1 or self.n_target < 1:
            raise ValidationError("vocabulary sizes must be >= 1")
        if self.n_target > self.n_source:
            raise ValidationError(
                f"n_target ({self.n_target}) cannot exceed n_source ({self.n_source})"
            )
        if self.bridge_dim < 2 or self.model_dim < 2:
            raise ValidationError("bridge_dim and model_dim must be >= 2")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise ValidationError(f"overlap_fraction must be in [0, 1], got {self.overlap_fraction}")
        if self.noise_sigma < 0.0:
            raise ValidationError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.docs < 1 or self.queries < 1 or self.doc_len < 1:
            raise ValidationError("docs, queries and doc_len must be >= 1")

    def to_dict(self) -> dict:
        return {
            "n_source": self.n_source,
            "n_target": self.n_target,
            "overlap_fraction": self.overlap_fraction,
            "bridge_dim": self.bridge_dim,
            "model_dim": self.model_dim,
            "noise_sigma": self.noise_sigma,
            "docs": self.docs,
            "queries": self.queries,
            "doc_len": self.doc_len,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GroundTruthAlignment:
    """True counterpart of every target token; injective and total."""

    counterpart: dict[int, int]
    overlap_target_ids: frozenset[int]


@dataclass
class SyntheticWorld:
    spec: SyntheticLanguageSpec
    source_vocab: Vocabulary
    target_vocab: Vocabulary
    source_emb: np.ndarray  # (n_source, model_dim) float32, unit rows
    bridge_src: BridgeEmbeddings
    bridge_tgt: BridgeEmbeddings
    alignment: GroundTruthAlignment
    doc_ids: list[str]
    doc_tokens: list[list[int]]  # source token ids, multisets
    query_ids: list[str]
    query_tokens_source: list[list[int]]  # source-form fragments
    query_tokens_target: list[list[int]]  # the same fragments, translated
    qrels: Qrels


def _floor_count(fraction: float, total: int) -> int:
    return int(math.floor(fraction * total + 1e-9))


def generate_world(spec: SyntheticLanguageSpec) -> SyntheticWorld:
    """Deterministically build a world from its spec.

    Every sampled artifact draws from a counter-based stream keyed by
    (seed, kind, entity id), so regeneration is bit-identical.
    """
    n_src, n_tgt = spec.n_source, spec.n_target
    k_overlap = _floor_count(spec.overlap_fraction, n_tgt)

    perm = rng.permutation(spec.seed, rng.KIND_ALIGNMENT, 0, n_src)
    counterpart = {tid: int(perm[tid]) for tid in range(n_tgt)}
    overlap_ids = frozenset(range(k_overlap))

    source_tokens = [f"src{i}" for i in range(n_src)]
    target_tokens = [
        source_tokens[counterpart[tid]] if tid in overlap_ids else f"tgt{tid}"
        for tid in range(n_tgt)
    ]
    source_vocab = Vocabulary(source_tokens)
    target_vocab = Vocabulary(target_tokens)

    bridge_src_rows = rng.unit_sphere_rows(
        spec.seed, rng.KIND_BRIDGE_SOURCE, range(n_src), spec.bridge_dim
    ).astype(np.float32)

    bridge_tgt_rows = np.empty((n_tgt, spec.bridge_dim), dtype=np.float32)
    for tid in range(n_tgt):
        src_row = bridge_src_rows[counterpart[tid]]
        if tid in overlap_ids or spec.noise_sigma == 0.0:
            bridge_tgt_rows[tid] = src_row
        else:
            noise = spec.noise_sigma * rng.stream(spec.seed, rng.KIND_BRIDGE_NOISE, tid).normal(
                size=spec.bridge_dim
            )
            noisy = src_row.astype(np.float64) + noise
            bridge_tgt_rows[tid] = (noisy / np.linalg.norm(noisy)).astype(np.float32)

    anchor = rng.unit_sphere_rows(spec.seed, rng.KIND_EMB_ANCHOR, [0], spec.model_dim)[0]
    residual = rng.unit_sphere_rows(spec.seed, rng.KIND_EMB_SOURCE, range(n_src), spec.model_dim)
    raw = ANCHOR_WEIGHT * anchor[None, :] + math.sqrt(1.0 - ANCHOR_WEIGHT**2) * residual
    source_emb = (raw / np.linalg.norm(raw, axis=1, keepdims=True)).astype(np.float32)

    # Content tokens are the counterparts of non-overlap targets: documents
    # draw only from them, mirroring overlap tokens being non-topical.
    content = np.asarray([counterpart[tid] for tid in range(k_overlap, n_tgt)], dtype=np.int64)
    if content.size == 0:
        # Degenerate full-overlap worlds still need documents.
        content = np.asarray(sorted(counterpart[t] for t in range(n_tgt)), dtype=np.int64)
    pools = np.array_split(content, min(N_TOPICS, content.size))

    doc_width = max(4, len(str(spec.docs - 1)))
    doc_ids = [f"d{j:0{doc_width}d}" for j in range(spec.docs)]
    doc_tokens: list[list[int]] = []
    for j in range(spec.docs):
        pool = pools[j * len(pools) // spec.docs]
        draws = rng.stream(spec.seed, rng.KIND_DOC, j).integers(0, pool.size, size=spec.doc_len)
        doc_tokens.append([int(pool[d]) for d in draws])

    inverse = {sid: tid for tid, sid in counterpart.items()}
    query_width = max(4, len(str(spec.queries - 1)))
    query_ids = [f"q{q:0{query_width}d}" for q in range(spec.queries)]
    query_tokens_source: list[list[int]] = []
    query_tokens_target: list[list[int]] = []
    qrels: Qrels = {}
    for q in range(spec.queries):
        gen = rng.stream(spec.seed, rng.KIND_QUERY, q)
        origin = int(gen.integers(0, spec.docs))
        translatable = sorted({sid for sid in doc_tokens[origin] if sid in inverse})
        take = min(QUERY_LEN, len(translatable))
        picked = sorted(int(translatable[i]) for i in gen.choice(len(translatable), size=take, replace=False))
        query_tokens_source.append(picked)
        query_tokens_target.append([inverse[sid] for sid in picked])
        fragment = set(picked)
        rels = {
            doc_ids[j]: 1
            for j in range(spec.docs)
            if len(fragment.intersection(doc_tokens[j])) >= TAU_REL
        }
        qrels[query_ids[q]] = rels

    return SyntheticWorld(
        spec=spec,
        source_vocab=source_vocab,
        target_vocab=target_vocab,
        source_emb=source_emb,
        bridge_src=from_arrays(source_vocab, bridge_src_rows),
        bridge_tgt=from_arrays(target_vocab, bridge_tgt_rows),
        alignment=GroundTruthAlignment(counterpart=counterpart, overlap_target_ids=overlap_ids),
        doc_ids=doc_ids,
        doc_tokens=doc_tokens,
        query_ids=query_ids,
        query_tokens_source=query_tokens_source,
        query_tokens_target=query_tokens_target,
        qrels=qrels,
    )


def tied_projection_encode(
    token_ids,
    emb,
    output_matrix,
    top_k: int,
    threshold: float = 0.0,
    vec_id: str = "",
) -> SparseVector:
    """Encode a token multiset into a sparse vector over output rows.

    Output dim j scores sum_t max(dot(emb[t], output_matrix[j]) - threshold, 0);
    only the top_k strictly positive dims are kept (ties break toward lower
    dims). An empty token list yields an empty vector.
    """
    if top_k < 1:
        raise ValidationError(f"top_k must be >= 1, got {top_k}")
    emb = np.asarray(emb)
    out_m = np.asarray(output_matrix)
    if emb.ndim != 2 or out_m.ndim != 2 or emb.shape[1] != out_m.shape[1]:
        raise ValidationError(
            f"embedding dim {emb.shape} incompatible with output matrix {out_m.shape}"
        )
    ids = list(token_ids)
    if not ids:
        return SparseVector(id=vec_id, entries={})
    for t in ids:
        if not 0 <= t < emb.shape[0]:
            raise ValidationError(f"token id {t} out of range for embedding with {emb.shape[0]} rows")
    block = emb[ids].astype(np.float64)
    dots = block @ out_m.astype(np.float64).T
    scores = np.maximum(dots - threshold, 0.0).sum(axis=0)
    alive = np.flatnonzero(scores > 0.0)
    if alive.size == 0:
        return SparseVector(id=vec_id, entries={})
    order = np.lexsort((alive, -scores[alive]))[:top_k]
    kept = alive[order]
    return SparseVector(id=vec_id, entries={int(j): float(scores[j]) for j in sorted(kept)})


def encode_docs(
    world: SyntheticWorld, top_k: int = DOC_TOP_K, threshold: float = ENCODE_THRESHOLD
) -> list[SparseVector]:
    """Encode every document with the source embeddings (strategy independent)."""
    return [
        tied_projection_encode(
            tokens, world.source_emb, world.source_emb, top_k, threshold, vec_id=doc_id
        )
        for doc_id, tokens in zip(world.doc_ids, world.doc_tokens)
    ]


def encode_queries(
    world: SyntheticWorld,
    target_emb,
    top_k: int = QUERY_TOP_K,
    threshold: float = ENCODE_THRESHOLD,
) -> list[SparseVector]:
    """Encode every query with a transplanted target embedding matrix."""
    return [
        tied_projection_encode(
            tokens, target_emb, world.source_emb, top_k, threshold, vec_id=qid
        )
        for qid, tokens in zip(world.query_ids, world.query_tokens_target)
    ]


def encode_queries_source_form(
    world: SyntheticWorld, top_k: int = QUERY_TOP_K, threshold: float = ENCODE_THRESHOLD
) -> list[SparseVector]:
    """Oracle encoding: queries in source form through the source embeddings."""
    return [
        tied_projection_encode(
            tokens, world.source_emb, world.source_emb, top_k, threshold, vec_id=qid
        )
        for qid, tokens in zip(world.query_ids, world.query_tokens_source)
    ]


def alignment_precision_at_k(report: TransplantReport, truth: GroundTruthAlignment, k: int) -> float:
    """Fraction of synthesized tokens whose true counterpart ranks in their top-k weights.

    Fallback rows count as misses. Raises when the strategy recorded no
    weights at all (statistical initializers carry no alignment).
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    hits = 0
    total = 0
    saw_weights = False
    for record in report.provenance:
        if record["kind"] == "copied":
            continue
        total += 1
        if record["kind"] != "weights":
            continue
        saw_weights = True
        top = [sid for sid, _ in record["weights"][:k]]
        if truth.counterpart[record["target_id"]] in top:
            hits += 1
    if not saw_weights:
        raise InapplicableError(
            f"strategy {report.strategy!r} records no alignment weights;"
            " precision@k is undefined"
        )
    return hits / total if total else 1.0


@dataclass
class BenchRow:
    label: str
    mean_ndcg: float
    flops: float
    precision_at_1: float | None
    ndcg_per_query: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "strategy": self.label,
            "mean_ndcg": self.mean_ndcg,
            "flops": self.flops,
            "alignment_precision_at_1": self.precision_at_1,
        }


def strategy_label(cfg: TransplantConfig) -> str:
    if cfg.strategy == "sembridge":
        alpha = int(cfg.alpha) if float(cfg.alpha).is_integer() else cfg.alpha
        return f"sembridge(alpha={alpha})"
    return cfg.strategy


def run_zero_shot_bench(
    world: SyntheticWorld,
    strategies: list[TransplantConfig],
    k: int = BENCH_NDCG_K,
    top_k_doc: int = DOC_TOP_K,
    top_k_query: int = QUERY_TOP_K,
    threshold: float = ENCODE_THRESHOLD,
    threads: int = 1,
) -> list[BenchRow]:
    """Transplant, encode, retrieve and score every strategy on one world.

    Documents are encoded once with the source matrix and shared across
    strategies; queries are re-encoded per strategy with its transplanted
    matrix.
    """
    overlap = compute_overlap(world.source_vocab, world.target_vocab)
    docs = encode_docs(world, top_k_doc, threshold)
    index = build_index(docs)
    rows: list[BenchRow] = []
    for cfg in strategies:
        target_emb, report = transplant(
            world.source_emb,
            world.source_vocab,
            world.target_vocab,
            overlap,
            bridge_src=world.bridge_src,
            bridge_tgt=world.bridge_tgt,
            cfg=cfg,
            threads=threads,
        )
        queries = encode_queries(world, target_emb, top_k_query, threshold)
        run = {vec.id: search(index, vec, k) for vec in queries}
        result = ndcg_at_k(run, world.qrels, k)
        try:
            precision = alignment_precision_at_k(report, world.alignment, 1)
        except InapplicableError:
            precision = None
        rows.append(
            BenchRow(
                label=strategy_label(cfg),
                mean_ndcg=result.mean_ndcg,
                flops=flops_metric(queries, docs),
                precision_at_1=precision,
                ndcg_per_query=result.ndcg_per_query,
            )
        )
    return rows


def render_bench_table(rows: list[BenchRow], k: int = BENCH_NDCG_K) -> str:
    header = f"{'strategy':<24} {'nDCG@' + str(k):>10} {'FLOPS':>10} {'prec@1':>8}"
    lines = [header, "-" * len(header)]
    for row in rows:
        prec = f"{row.precision_at_1:.4f}" if row.precision_at_1 is not None else "n/a"
        lines.append(
            f"{row.label:<24} {row.mean_ndcg:>10.4f} {row.flops:>10.4f} {prec:>8}"
        )
    return "\n".join(lines) + "\n"


def write_world(world: SyntheticWorld, out_dir) -> dict[str, str]:
    """Write every world artifact to a directory; regeneration is bit-identical.

    Encoded vectors use the benchmark's default encoder settings; query
    vectors are the source-form oracle encoding, so the pair is directly
    consumable by retrieval evaluation.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "source_vocab": out / "source_vocab.jsonl",
        "target_vocab": out / "target_vocab.jsonl",
        "source_emb": out / "source_emb.embm",
        "bridge_source": out / "bridge_source.embm",
        "bridge_target": out / "bridge_target.embm",
        "docs_tokens": out / "docs_tokens.jsonl",
        "queries_tokens": out / "queries_tokens.jsonl",
        "corpus_vectors": out / "corpus_vectors.jsonl",
        "queries_vectors": out / "queries_vectors.jsonl",
        "qrels": out / "qrels.txt",
        "alignment": out / "alignment.json",
        "world": out / "world.json",
    }
    world.source_vocab.write_jsonl(paths["source_vocab"])
    world.target_vocab.write_jsonl(paths["target_vocab"])
    densevec.write_matrix(world.source_emb, paths["source_emb"])
    densevec.write_matrix(world.bridge_src.matrix, paths["bridge_source"])
    densevec.write_matrix(world.bridge_tgt.matrix, paths["bridge_target"])
    with open(paths["docs_tokens"], "w", encoding="utf-8", newline="\n") as fh:
        for doc_id, tokens in zip(world.doc_ids, world.doc_tokens):
            fh.write(json.dumps({"id": doc_id, "tokens": tokens}) + "\n")
    with open(paths["queries_tokens"], "w", encoding="utf-8", newline="\n") as fh:
        for qid, tokens in zip(world.query_ids, world.query_tokens_target):
            fh.write(json.dumps({"id": qid, "tokens": tokens}) + "\n")
    write_vectors_jsonl(encode_docs(world), paths["corpus_vectors"])
    write_vectors_jsonl(encode_queries_source_form(world), paths["queries_vectors"])
    write_qrels(world.qrels, paths["qrels"])
    with open(paths["alignment"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "counterpart": {str(t): s for t, s in sorted(world.alignment.counterpart.items())},
                "overlap_target_ids": sorted(world.alignment.overlap_target_ids),
            },
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    with open(paths["world"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(
            {
                "spec": world.spec.to_dict(),
                "encoder": {
                    "doc_top_k": DOC_TOP_K,
                    "query_top_k": QUERY_TOP_K,
                    "threshold": ENCODE_THRESHOLD,
                },
            },
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    return {name: str(p) for name, p in paths.items()}


def _read_token_lines(path) -> tuple[list[str], list[list[int]]]:
    ids: list[str] = []
    tokens: list[list[int]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ids.append(str(rec["id"]))
                tokens.append([int(t) for t in rec["tokens"]])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}: line {lineno}: bad token record: {exc}") from exc
    return ids, tokens


def read_world(world_dir) -> SyntheticWorld:
    """Load a directory written by :func:`write_world` back into memory.

    Only the generation inputs are read back (vocabularies, matrices, token
    lists, qrels, alignment, spec); the derived encodings are recomputed on
    demand. Queries' source forms are reconstructed through the alignment.
    """
    d = Path(world_dir)
    with open(d / "world.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    try:
        spec = SyntheticLanguageSpec(**meta["spec"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{d / 'world.json'}: bad spec block: {exc}") from exc
    source_vocab = Vocabulary.read_jsonl(d / "source_vocab.jsonl")
    target_vocab = Vocabulary.read_jsonl(d / "target_vocab.jsonl")
    source_emb = densevec.read_matrix(d / "source_emb.embm")
    bridge_src = from_arrays(source_vocab, densevec.read_matrix(d / "bridge_source.embm"))
    bridge_tgt = from_arrays(target_vocab, densevec.read_matrix(d / "bridge_target.embm"))
    doc_ids, doc_tokens = _read_token_lines(d / "docs_tokens.jsonl")
    query_ids, query_tokens_target = _read_token_lines(d / "queries_tokens.jsonl")
    with open(d / "alignment.json", encoding="utf-8") as fh:
        align = json.load(fh)
    counterpart = {int(t): int(s) for t, s in align["counterpart"].items()}
    alignment = GroundTruthAlignment(
        counterpart=counterpart,
        overlap_target_ids=frozenset(int(t) for t in align["overlap_target_ids"]),
    )
    query_tokens_source = [[counterpart[t] for t in toks] for toks in query_tokens_target]
    return SyntheticWorld(
        spec=spec,
        source_vocab=source_vocab,
        target_vocab=target_vocab,
        source_emb=source_emb,
        bridge_src=bridge_src,
        bridge_tgt=bridge_tgt,
        alignment=alignment,
        doc_ids=doc_ids,
        doc_tokens=doc_tokens,
        query_ids=query_ids,
        query_tokens_source=query_tokens_source,
        query_tokens_target=query_tokens_target,
        qrels=read_qrels(d / "qrels.txt"),
    )
