"""Export word-level cross-attention and word vectors from a translation model."""

from .aggregate import (
    SPM_MARKER,
    aggregate_to_words,
    group_subwords,
    mean_over_heads,
)
from .export import (
    AGGREGATION_MODE,
    EXPORT_SCHEMA,
    HEAD_MODE,
    INTERCHANGE_RECORD_SCHEMA,
    GenerationError,
    ModelLoadError,
    SourceUnavailableError,
    export_attention,
    export_embeddings,
    validate_export,
    write_word_vectors,
)

__version__ = "0.1.0"

__all__ = [
    "AGGREGATION_MODE",
    "EXPORT_SCHEMA",
    "GenerationError",
    "HEAD_MODE",
    "INTERCHANGE_RECORD_SCHEMA",
    "ModelLoadError",
    "SPM_MARKER",
    "SourceUnavailableError",
    "aggregate_to_words",
    "export_attention",
    "export_embeddings",
    "group_subwords",
    "mean_over_heads",
    "validate_export",
    "write_word_vectors",
]
