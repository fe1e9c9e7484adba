"""Sparse retrieval: inverted index, exact dot-product search, and evaluation.

Scoring is an exact sparse dot product (no approximations, no quantization).
Query terms are accumulated in ascending token order and ties in the ranking
break by ascending doc id, so results are reproducible bit for bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import FormatError, InapplicableError, ValidationError

Qrels = dict[str, dict[str, int]]


@dataclass
class SparseVector:
    """A sparse activation vector: token id -> strictly positive weight."""

    id: str
    entries: dict[int, float]

    def __post_init__(self):
        for token, weight in self.entries.items():
            if not isinstance(token, int) or token < 0:
                raise ValidationError(f"vector {self.id!r}: bad token id {token!r}")
            if not math.isfinite(weight) or weight <= 0.0:
                raise ValidationError(
                    f"vector {self.id!r}: weight for token {token} must be finite and > 0,"
                    f" got {weight!r}"
                )


def sparse_dot(a: SparseVector, b: SparseVector) -> float:
    """Exact dot product, accumulated over shared tokens in ascending token order."""
    small, large = (a, b) if len(a.entries) <= len(b.entries) else (b, a)
    total = 0.0
    for token in sorted(small.entries):
        other = large.entries.get(token)
        if other is not None:
            total += small.entries[token] * other
    return total


@dataclass
class InvertedIndex:
    """Postings token -> [(doc id, weight)], each list sorted by doc id."""

    postings: dict[int, list[tuple[str, float]]] = field(default_factory=dict)
    doc_count: int = 0


def build_index(corpus: Iterable[SparseVector]) -> InvertedIndex:
    """Index a corpus. Duplicate doc ids raise a validation error."""
    index = InvertedIndex()
    seen: set[str] = set()
    for doc in corpus:
        if doc.id in seen:
            raise ValidationError(f"duplicate doc id {doc.id!r}")
        seen.add(doc.id)
        index.doc_count += 1
        for token, weight in doc.entries.items():
            index.postings.setdefault(token, []).append((doc.id, weight))
    for plist in index.postings.values():
        plist.sort(key=lambda entry: entry[0])
    return index


def search(index: InvertedIndex, query: SparseVector, k: int) -> list[tuple[str, float]]:
    """Top-k docs by exact dot product; docs sharing no token are omitted.

    Sorted by descending score, then ascending doc id.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    scores: dict[str, float] = {}
    for token in sorted(query.entries):
        weight = query.entries[token]
        for doc_id, doc_weight in index.postings.get(token, ()):
            scores[doc_id] = scores.get(doc_id, 0.0) + weight * doc_weight
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


@dataclass
class EvalResult:
    ndcg_per_query: dict[str, float]
    mean_ndcg: float
    k: int
    query_count: int
    flops: float | None = None


def _dcg(rels: Sequence[int]) -> float:
    return sum((2.0 ** rel - 1.0) / math.log2(i + 2.0) for i, rel in enumerate(rels))


def ndcg_at_k(run: Mapping[str, Sequence], qrels: Qrels, k: int) -> EvalResult:
    """Mean nDCG@k with gain 2^rel - 1 and log2(rank + 1) discount.

    Queries with no relevant documents score 0 and still count toward the
    mean, which runs over the union of run and qrels query ids.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    per_query: dict[str, float] = {}
    for qid in sorted(set(run) | set(qrels)):
        judged = qrels.get(qid, {})
        ideal = sorted((r for r in judged.values() if r > 0), reverse=True)[:k]
        if not ideal:
            per_query[qid] = 0.0
            continue
        ranked = run.get(qid, ())
        doc_ids = [entry[0] if isinstance(entry, tuple) else entry for entry in ranked[:k]]
        gains = [judged.get(doc_id, 0) for doc_id in doc_ids]
        per_query[qid] = _dcg(gains) / _dcg(ideal)
    count = len(per_query)
    mean = sum(per_query[qid] for qid in sorted(per_query)) / count if count else 0.0
    return EvalResult(ndcg_per_query=per_query, mean_ndcg=mean, k=k, query_count=count)


def flops_metric(queries: Sequence[SparseVector], docs: Sequence[SparseVector]) -> float:
    """Expected floating-point match operations per (query, doc) pair.

    Sum over tokens of the query-side activation probability times the
    doc-side activation probability. Scale-invariant by construction.
    """
    if not queries or not docs:
        raise InapplicableError("flops_metric requires at least one query and one document")
    q_counts: dict[int, int] = {}
    d_counts: dict[int, int] = {}
    for vec in queries:
        for token in vec.entries:
            q_counts[token] = q_counts.get(token, 0) + 1
    for vec in docs:
        for token in vec.entries:
            d_counts[token] = d_counts.get(token, 0) + 1
    nq = float(len(queries))
    nd = float(len(docs))
    return sum(
        (q_counts[token] / nq) * (d_counts.get(token, 0) / nd) for token in sorted(q_counts)
    )


def flops_regularizer(batch: Sequence[Mapping[int, float]], vocab_size: int) -> float:
    """Sum over tokens of the squared mean absolute activation in the batch.

    Vectors are dicts that may carry weights of any sign; tokens absent from
    a vector contribute zero to its mean.
    """
    if not batch:
        raise InapplicableError("flops_regularizer requires a non-empty batch")
    sums: dict[int, float] = {}
    for vec in batch:
        for token, weight in vec.items():
            if not 0 <= token < vocab_size:
                raise ValidationError(f"token id {token} out of range for vocab size {vocab_size}")
            sums[token] = sums.get(token, 0.0) + abs(weight)
    n = float(len(batch))
    return sum((sums[token] / n) ** 2 for token in sorted(sums))


def infonce_loss(query_vecs: Sequence[SparseVector], positive_vecs: Sequence[SparseVector]) -> float:
    """In-batch-negatives InfoNCE over sparse dot-product scores.

    Row i's positive is column i; every other column is a negative. Uses
    max-subtraction for a stable log-sum-exp. A batch of one scores 0.
    """
    if len(query_vecs) != len(positive_vecs):
        raise ValidationError(
            f"batch mismatch: {len(query_vecs)} queries vs {len(positive_vecs)} positives"
        )
    if not query_vecs:
        raise InapplicableError("infonce_loss requires a non-empty batch")
    n = len(query_vecs)
    total = 0.0
    for i, q in enumerate(query_vecs):
        scores = [sparse_dot(q, p) for p in positive_vecs]
        mx = max(scores)
        lse = mx + math.log(sum(math.exp(s - mx) for s in scores))
        total += lse - scores[i]
    return total / n


# --- file formats ---------------------------------------------------------


def read_vectors_jsonl(path) -> list[SparseVector]:
    """Read JSON-lines records {"id": str, "vector": {token id: weight}}."""
    out: list[SparseVector] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}, line {lineno + 1}: invalid JSON: {exc}") from exc
            if "id" not in rec or "vector" not in rec:
                raise FormatError(f"{path}, line {lineno + 1}: expected id and vector fields")
            try:
                entries = {int(t): float(w) for t, w in rec["vector"].items()}
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}, line {lineno + 1}: bad vector entry: {exc}") from exc
            out.append(SparseVector(id=str(rec["id"]), entries=entries))
    return out


def write_vectors_jsonl(vectors: Iterable[SparseVector], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for vec in vectors:
            record = {"id": vec.id, "vector": {str(t): vec.entries[t] for t in sorted(vec.entries)}}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_qrels(path) -> Qrels:
    """Read whitespace-separated qrels lines: qid 0 docid rel."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}, line {lineno + 1}: expected 4 fields, got {len(parts)}")
            qid, _, doc_id, rel = parts
            try:
                rel_value = int(rel)
            except ValueError as exc:
                raise FormatError(f"{path}, line {lineno + 1}: bad relevance {rel!r}") from exc
            if rel_value < 0:
                raise ValidationError(
                    f"{path}, line {lineno + 1}: relevance must be >= 0, got {rel_value}"
                )
            qrels.setdefault(qid, {})[doc_id] = rel_value
    return qrels


def write_qrels(qrels: Qrels, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(qrels):
            for doc_id in sorted(qrels[qid]):
                fh.write(f"{qid} 0 {doc_id} {qrels[qid][doc_id]}\n")


def write_run(run: Mapping[str, Sequence[tuple[str, float]]], path, tag: str = "sembridge") -> None:
    """Write ranked results in the standard six-column run format."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(run):
            for rank, (doc_id, score) in enumerate(run[qid], start=1):
                fh.write(f"{qid} Q0 {doc_id} {rank} {score:.6f} {tag}\n")
