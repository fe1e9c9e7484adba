"""Bridge-embedding exporter: embed every token of a vocabulary with a
pretrained dense encoder and write the matrix + manifest files the
transplant toolkit consumes."""

__version__ = "0.1.0"

from .export import ExportManifest, export_vocab_embeddings, render_token
from .formats import ModelLoadError, VocabError, read_vocab, write_matrix

__all__ = [
    "ExportManifest",
    "ModelLoadError",
    "VocabError",
    "export_vocab_embeddings",
    "read_vocab",
    "render_token",
    "write_matrix",
]
