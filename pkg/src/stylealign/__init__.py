"""Style-preserving machine translation toolkit.

Aligns styled words between a source sentence and its translation and
projects typographic style spans (bold, italic, underline, highlight,
hyperlink, color, font) onto the target text.  Four methods are provided:
attention-based alignment, tag-preserving translation, delimiter-prompted
completion, and a hybrid that maps styled unigrams onto a plain translation.
"""

from .align import (
    AlignmentMap,
    AlignmentMatrix,
    DimensionMismatchError,
    EmbeddingLexicon,
    Ibm1Model,
    OovPolicy,
    ZeroVectorError,
    attention_align,
    cosine_similarity,
    ibm1_align,
    ibm1_train,
    load_lexicon,
    load_lexicon_file,
    load_matrices,
)
from .backends import (
    AuthError,
    BackendConfig,
    BackendError,
    CompletionRequest,
    DictionaryBackend,
    MoveRule,
    RemoteError,
    ReplayBackend,
    TransportError,
    TranslationRequest,
    build_backend,
    load_backends,
)
from .evalkit import (
    GoldRecord,
    MethodReport,
    SentenceScore,
    aer,
    contiguity,
    evaluate_method,
    load_gold_records,
    render_comparison,
    score_sentence,
    threshold_sweep,
)
from .markup import (
    AnomalyKind,
    MarkupFormat,
    MarkupOverlapError,
    ParseAnomaly,
    StyleAttr,
    StyleKind,
    StyleSpan,
    StyledText,
    Token,
    parse_tagged,
    render_tagged,
    styled_text_from_json,
    styled_text_to_json,
    tokenize,
)
from .pipelines import (
    MapParseError,
    MethodKind,
    OccurrenceTiebreak,
    ProjectionPolicy,
    StyledTranslation,
    UnalignedPolicy,
    parse_unigram_maps,
    project_styles,
    run_attention_method,
    run_hybrid_method,
    run_llm_delimiters_method,
    run_nmt_tags_method,
    styled_translation_from_json,
    styled_translation_to_json,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMap",
    "AlignmentMatrix",
    "AnomalyKind",
    "AuthError",
    "BackendConfig",
    "BackendError",
    "CompletionRequest",
    "DictionaryBackend",
    "DimensionMismatchError",
    "EmbeddingLexicon",
    "GoldRecord",
    "Ibm1Model",
    "MapParseError",
    "MarkupFormat",
    "MarkupOverlapError",
    "MethodKind",
    "MethodReport",
    "MoveRule",
    "OccurrenceTiebreak",
    "OovPolicy",
    "ParseAnomaly",
    "ProjectionPolicy",
    "RemoteError",
    "ReplayBackend",
    "SentenceScore",
    "StyleAttr",
    "StyleKind",
    "StyleSpan",
    "StyledText",
    "StyledTranslation",
    "Token",
    "TransportError",
    "TranslationRequest",
    "UnalignedPolicy",
    "ZeroVectorError",
    "aer",
    "attention_align",
    "build_backend",
    "contiguity",
    "cosine_similarity",
    "evaluate_method",
    "ibm1_align",
    "ibm1_train",
    "load_backends",
    "load_gold_records",
    "load_lexicon",
    "load_lexicon_file",
    "load_matrices",
    "parse_tagged",
    "parse_unigram_maps",
    "project_styles",
    "render_comparison",
    "render_tagged",
    "run_attention_method",
    "run_hybrid_method",
    "run_llm_delimiters_method",
    "run_nmt_tags_method",
    "score_sentence",
    "styled_text_from_json",
    "styled_text_to_json",
    "styled_translation_from_json",
    "styled_translation_to_json",
    "threshold_sweep",
    "tokenize",
    "__version__",
]
