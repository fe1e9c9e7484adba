"""Embed every vocabulary token with a pretrained dense encoder.

Tokens are rendered to bare surface forms (subword markers stripped),
framed as ordinary short inputs, mean-pooled over non-special positions,
and unit-normalized. Tokens that render to nothing, or that the model
tokenizes to zero content pieces, become zero rows and are listed in the
manifest so downstream loaders can treat them as missing rather than
guessing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .formats import ModelLoadError, read_vocab, write_matrix

# wordpiece continuation, sentencepiece word-start, byte-level word-start
_MARKER_PREFIXES = ("##", "▁", "Ġ")
_MARKER_SUFFIXES = ("</w>",)

TOKEN_RENDERING = (
    "strip one leading ##/▁/Ġ marker and one trailing </w>,"
    " then trim whitespace; empty renderings become zero rows"
)
POOLING = "mean over final-layer vectors at non-special positions"

# tokens are single surface forms; anything longer is pathological
_MAX_PIECES = 64


@dataclass
class ExportManifest:
    """Everything a consumer needs to interpret the exported matrix."""

    model: str
    dim: int
    rows: int
    token_rendering: str
    pooling: str
    normalized: bool
    unencodable_count: int
    unencodable_ids: list[int]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, sort_keys=True, indent=2)
            fh.write("\n")


def render_token(token: str) -> str:
    """Bare surface form of one vocabulary entry."""
    for prefix in _MARKER_PREFIXES:
        if token.startswith(prefix):
            token = token[len(prefix):]
            break
    for suffix in _MARKER_SUFFIXES:
        if token.endswith(suffix):
            token = token[: -len(suffix)]
            break
    return token.strip()


def load_encoder(model_id):
    """Tokenizer/model pair in eval mode; any load problem is one error type."""
    try:
        from transformers import AutoModel, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ModelLoadError(f"could not load model {model_id!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _embed_batch(tokenizer, model, texts: list[str], limit: int):
    """Pooled vectors and content-piece counts for one batch of surface forms."""
    import torch

    enc = tokenizer(
        texts,
        padding=True,
        truncation=True,
        max_length=limit,
        return_special_tokens_mask=True,
        return_tensors="pt",
    )
    special = enc["special_tokens_mask"]
    with torch.no_grad():
        hidden = model(
            input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]
        ).last_hidden_state
    keep = (enc["attention_mask"] * (1 - special)).unsqueeze(-1).to(hidden.dtype)
    counts = keep.sum(dim=1)
    pooled = (hidden * keep).sum(dim=1) / counts.clamp(min=1.0)
    return (
        pooled.numpy().astype(np.float32),
        counts.squeeze(-1).numpy().astype(np.int64),
    )


def export_vocab_embeddings(
    vocab_path, model_id, out_matrix, out_manifest, batch_size: int = 32
) -> ExportManifest:
    """Write the bridge matrix and manifest for one vocabulary file.

    Output order follows vocabulary ids regardless of batch size. Rows are
    unit-normalized float32; unencodable tokens stay all-zero.
    """
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    tokens = read_vocab(vocab_path)
    tokenizer, model = load_encoder(model_id)
    dim = int(model.config.hidden_size)
    limit = min(int(getattr(model.config, "max_position_embeddings", 512)), _MAX_PIECES)

    renderable: list[tuple[int, str]] = []
    unencodable: list[int] = []
    for tid, token in enumerate(tokens):
        text = render_token(token)
        if text:
            renderable.append((tid, text))
        else:
            unencodable.append(tid)

    matrix = np.zeros((len(tokens), dim), dtype=np.float32)
    for start in range(0, len(renderable), batch_size):
        batch = renderable[start : start + batch_size]
        pooled, counts = _embed_batch(tokenizer, model, [t for _, t in batch], limit)
        norms = np.linalg.norm(pooled.astype(np.float64), axis=1)
        for (tid, _), row, count, norm in zip(batch, pooled, counts, norms):
            if count == 0 or norm == 0.0:
                unencodable.append(tid)
                continue
            matrix[tid] = (row.astype(np.float64) / norm).astype(np.float32)

    unencodable.sort()
    write_matrix(matrix, out_matrix)
    manifest = ExportManifest(
        model=str(model_id),
        dim=dim,
        rows=len(tokens),
        token_rendering=TOKEN_RENDERING,
        pooling=POOLING,
        normalized=True,
        unencodable_count=len(unencodable),
        unencodable_ids=unencodable,
    )
    manifest.write(out_manifest)
    return manifest
