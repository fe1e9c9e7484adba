"""Vocabulary transplantation for learned sparse retrievers.

Copies overlap-token embeddings bit-exactly and synthesizes the rest as
sparse convex combinations of source embeddings, weighted by alpha-entmax
over bridge-space similarities. Ships baseline initializers, exact sparse
retrieval with nDCG/FLOPS evaluation, and a synthetic twin-language
benchmark.
"""

__version__ = "0.1.0"

from .bridge import BridgeEmbeddings, SimilarityRow, load_bridge, stream_similarities
from .densevec import cosine, l2_normalize_rows, read_matrix, write_matrix
from .entmax import EntmaxConfig, SparseWeightVector, entmax, softmax, sparsemax, support
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    InapplicableError,
    SembridgeError,
    SolverError,
    ValidationError,
)
from .retrieval import (
    EvalResult,
    InvertedIndex,
    SparseVector,
    build_index,
    flops_metric,
    flops_regularizer,
    infonce_loss,
    ndcg_at_k,
    search,
)
from .synthbench import (
    SyntheticLanguageSpec,
    SyntheticWorld,
    alignment_precision_at_k,
    generate_world,
    run_zero_shot_bench,
    tied_projection_encode,
)
from .transplant import TransplantConfig, TransplantReport, transplant
from .vocab import NormalizationPolicy, OverlapMap, Vocabulary, compute_overlap, script_distribution

__all__ = [
    "AlignmentError",
    "BridgeEmbeddings",
    "ConfigError",
    "DegenerateInputError",
    "EntmaxConfig",
    "EvalResult",
    "FormatError",
    "InapplicableError",
    "InvertedIndex",
    "NormalizationPolicy",
    "OverlapMap",
    "SembridgeError",
    "SimilarityRow",
    "SolverError",
    "SparseVector",
    "SparseWeightVector",
    "SyntheticLanguageSpec",
    "SyntheticWorld",
    "TransplantConfig",
    "TransplantReport",
    "ValidationError",
    "Vocabulary",
    "alignment_precision_at_k",
    "build_index",
    "compute_overlap",
    "cosine",
    "entmax",
    "flops_metric",
    "flops_regularizer",
    "generate_world",
    "infonce_loss",
    "l2_normalize_rows",
    "load_bridge",
    "ndcg_at_k",
    "read_matrix",
    "run_zero_shot_bench",
    "script_distribution",
    "search",
    "softmax",
    "sparsemax",
    "stream_similarities",
    "support",
    "tied_projection_encode",
    "transplant",
    "write_matrix",
]
