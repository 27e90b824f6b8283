"""End-to-end methods that carry style spans through translation.

Four methods are provided.  The attention method aligns styled words via
an attention matrix and projects their spans.  The tag method sends
numbered tags through an NMT backend and trusts the returned markup.  The
delimiter method does the same with anonymous delimiters via an LLM.  The
hybrid method translates plain text with NMT, then asks an LLM only for
unigram mappings of the styled words and projects spans from those.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .align import (
    AlignmentMap,
    AlignmentMatrix,
    DimensionMismatchError,
    EmbeddingLexicon,
    OovPolicy,
    attention_align,
)
from .backends import CompletionRequest, TranslationRequest
from .markup import (
    AnomalyKind,
    MarkupFormat,
    MarkupOverlapError,
    ParseAnomaly,
    StyledText,
    StyleSpan,
    contiguous_runs,
    parse_tagged,
    render_tagged,
    styled_text_from_json,
    styled_text_to_json,
)


class MethodKind(Enum):
    ATTENTION = "attention"
    NMT_TAGS = "nmt_tags"
    LLM_DELIMITERS = "llm_delimiters"
    HYBRID = "hybrid"


class OccurrenceTiebreak(Enum):
    """How to pick among repeated target words when locating a mapping."""

    RELATIVE_POSITION = "relative_position"
    LAST_OCCURRENCE = "last_occurrence"
    FIRST_OCCURRENCE = "first_occurrence"


class UnalignedPolicy(Enum):
    DROP = "drop"
    WARN_DROP = "warn_drop"


@dataclass(frozen=True)
class ProjectionPolicy:
    occurrence_tiebreak: OccurrenceTiebreak = OccurrenceTiebreak.RELATIVE_POSITION
    unaligned_styled_word: UnalignedPolicy = UnalignedPolicy.WARN_DROP
    merge_adjacent: bool = True


DEFAULT_POLICY = ProjectionPolicy()


@dataclass(frozen=True)
class StyledTranslation:
    """A translated document with spans, plus how it was produced."""

    target: StyledText
    map: AlignmentMap
    anomalies: tuple[ParseAnomaly, ...]
    method: MethodKind
    warnings: tuple[str, ...] = ()


class MapParseError(ValueError):
    """The unigram-mapping completion has no parseable word list."""


def project_styles(
    source: StyledText,
    target_tokens: Sequence[str],
    alignment: AlignmentMap,
    policy: ProjectionPolicy = DEFAULT_POLICY,
) -> tuple[StyledText, list[str]]:
    """Carry the source's style spans onto target tokens via an alignment.

    Each target token receives the union of attributes of every styled
    source token aligned to it; per style id, the resulting token set is
    regrouped into contiguous spans (non-contiguous results are legal and
    yield several spans).  Returns the styled target plus warnings about
    styled source words the alignment dropped.
    """
    if alignment.source_len != len(source.tokens):
        raise DimensionMismatchError(
            f"alignment covers {alignment.source_len} source tokens, "
            f"document has {len(source.tokens)}"
        )
    if alignment.target_len != len(target_tokens):
        raise DimensionMismatchError(
            f"alignment covers {alignment.target_len} target tokens, got {len(target_tokens)}"
        )

    warnings: list[str] = []
    styled = sorted(source.styled_indices())
    for j in styled:
        if not alignment.targets_of(j):
            if policy.unaligned_styled_word is UnalignedPolicy.WARN_DROP:
                warnings.append(
                    f"styled source token {source.tokens[j].surface!r} (index {j}) "
                    "has no alignment; its style was dropped"
                )

    attrs_by_id = source.attrs_by_id
    spans: list[StyleSpan] = []
    for style_id in sorted(attrs_by_id):
        attrs = attrs_by_id[style_id]
        if policy.merge_adjacent:
            image = alignment.image_of(source.styled_indices(style_id))
            runs = contiguous_runs(image)
        else:
            seen: set[tuple[int, int]] = set()
            runs = []
            for span in source.spans:
                if span.style_id != style_id:
                    continue
                for run in contiguous_runs(alignment.image_of(span.token_indices)):
                    if run not in seen:
                        seen.add(run)
                        runs.append(run)
            runs.sort()
        for start, end in runs:
            spans.append(StyleSpan(style_id, attrs, start, end))

    spans.sort(key=lambda s: (s.start, s.end, s.style_id))
    return StyledText.from_tokens(target_tokens, spans), warnings


def run_attention_method(
    source: StyledText,
    matrix: AlignmentMatrix,
    lexicon: EmbeddingLexicon,
    k: int = 3,
    threshold: float = 0.5,
    oov_policy: OovPolicy = OovPolicy.PERMISSIVE,
    policy: ProjectionPolicy = DEFAULT_POLICY,
) -> StyledTranslation:
    """Project styles using an attention matrix over the given sentence pair."""
    if matrix.source_tokens != source.surfaces:
        raise DimensionMismatchError(
            "attention matrix source tokens do not match the document tokens"
        )
    alignment = attention_align(
        matrix, source.styled_indices(), lexicon, k=k, threshold=threshold,
        oov_policy=oov_policy,
    )
    target, warnings = project_styles(source, matrix.target_tokens, alignment, policy)
    return StyledTranslation(target, alignment, (), MethodKind.ATTENTION, tuple(warnings))


def load_prompt(name: str, prompt_dir: str | Path | None = None) -> str:
    """Read a prompt template, from a directory override or packaged data."""
    if prompt_dir is not None:
        return (Path(prompt_dir) / name).read_text(encoding="utf-8").rstrip("\n")
    return (
        resources.files("stylealign").joinpath(f"prompts/{name}").read_text(encoding="utf-8")
    ).rstrip("\n")


def _no_markup_anomaly(parsed_spans: int, source_spans: int) -> list[ParseAnomaly]:
    if source_spans and not parsed_spans:
        return [
            ParseAnomaly(
                AnomalyKind.EMPTY_SPAN,
                0,
                "response carries no style markup although the request was styled",
            )
        ]
    return []


def run_nmt_tags_method(
    source: StyledText,
    backend,
    policy: ProjectionPolicy = DEFAULT_POLICY,
    source_lang: str = "en",
    target_lang: str = "de",
) -> StyledTranslation:
    """Translate with numbered tags inline and trust the returned tags.

    Styles arrive positionally, so the alignment map is empty; markup
    defects in the response surface as anomalies.
    """
    body = render_tagged(source, MarkupFormat.NUMBERED_TAGS)
    response = backend.translate(
        TranslationRequest(body, source_lang, target_lang, preserve_markup=True)
    )
    target, anomalies = parse_tagged(
        response, MarkupFormat.NUMBERED_TAGS, attrs_by_id=source.attrs_by_id
    )
    anomalies.extend(_no_markup_anomaly(len(target.spans), len(source.spans)))
    empty = AlignmentMap(frozenset(), len(source.tokens), len(target.tokens))
    return StyledTranslation(target, empty, tuple(anomalies), MethodKind.NMT_TAGS)


def run_llm_delimiters_method(
    source: StyledText,
    backend,
    policy: ProjectionPolicy = DEFAULT_POLICY,
    max_output_tokens: int = 256,
    extended: bool = False,
    prompt_dir: str | Path | None = None,
) -> StyledTranslation:
    """Prompt an LLM to translate while keeping ##start##/##end## markers.

    The anonymous delimiter format carries a single style identity; the
    parsed spans are re-labelled with the source's style id.  Sources with
    several distinct style ids require ``extended`` numbering.
    """
    ids = sorted({span.style_id for span in source.spans})
    if len(ids) > 1 and not extended:
        raise MarkupOverlapError(
            "delimiter prompting cannot distinguish multiple styles; enable extended mode"
        )
    user_prompt = render_tagged(source, MarkupFormat.DELIMITERS, extended=extended)
    system_prompt = load_prompt("llm_delimiters_system.txt", prompt_dir)
    response = backend.complete(
        CompletionRequest(system_prompt, user_prompt, max_output_tokens)
    )

    if extended:
        attrs_by_id = source.attrs_by_id
    elif ids:
        attrs_by_id = {1: source.attrs_by_id[ids[0]]}
    else:
        attrs_by_id = None
    target, anomalies = parse_tagged(response, MarkupFormat.DELIMITERS, attrs_by_id=attrs_by_id)
    if not extended and ids and ids[0] != 1:
        relabelled = tuple(
            replace(span, style_id=ids[0]) for span in target.spans
        )
        target = StyledText(target.text, target.tokens, relabelled)
    anomalies = list(anomalies)
    anomalies.extend(_no_markup_anomaly(len(target.spans), len(source.spans)))
    empty = AlignmentMap(frozenset(), len(source.tokens), len(target.tokens))
    return StyledTranslation(target, empty, tuple(anomalies), MethodKind.LLM_DELIMITERS)


_MAPS_MARKER_RE = re.compile(r"maps\s*:", re.IGNORECASE)
_QUOTED_RE = re.compile(r"'([^']*)'|\"([^\"]*)\"")
_QUOTE_CHARS = "'\"`‘’“”"


def parse_unigram_maps(completion: str) -> list[str]:
    """Extract the word list from a ``maps: {...}`` completion.

    Tolerates brace, bracket, or bare comma lists, and single or double
    quotes.  Quoted items may contain commas.  Order and duplicates are
    preserved.
    """
    marker = _MAPS_MARKER_RE.search(completion)
    if not marker:
        raise MapParseError("completion contains no 'maps:' list")
    rest = completion[marker.end():].lstrip()
    if rest[:1] in ("{", "["):
        closer = "}" if rest[0] == "{" else "]"
        end = rest.find(closer)
        region = rest[1:end] if end >= 0 else rest[1:]
    else:
        region = rest.splitlines()[0] if rest else ""

    quoted = _QUOTED_RE.findall(region)
    if quoted:
        return [a if a else b for a, b in quoted]
    words = []
    for piece in region.split(","):
        word = piece.strip().strip(_QUOTE_CHARS).strip()
        if word:
            words.append(word)
    return words


def render_unigram_set(words: Sequence[str]) -> str:
    """Format styled source words as the prompt's unigram set literal."""
    return "{" + ", ".join(f"'{w}'" for w in words) + "}"


def _relative_position(index: int, length: int) -> float:
    return index / (length - 1) if length > 1 else 0.5


def _normalize_word(word: str) -> str:
    import unicodedata

    folded = word.casefold()
    trimmed = folded
    while trimmed and unicodedata.category(trimmed[-1]).startswith("P"):
        trimmed = trimmed[:-1]
    return trimmed or folded


def _locate_occurrences(word: str, target_tokens: Sequence[str]) -> list[int]:
    exact = [i for i, tok in enumerate(target_tokens) if tok == word]
    if exact:
        return exact
    wanted = _normalize_word(word)
    return [i for i, tok in enumerate(target_tokens) if _normalize_word(tok) == wanted]


def _pick_occurrence(
    occurrences: list[int],
    source_index: int,
    source_len: int,
    target_len: int,
    tiebreak: OccurrenceTiebreak,
) -> int:
    if tiebreak is OccurrenceTiebreak.FIRST_OCCURRENCE:
        return occurrences[0]
    if tiebreak is OccurrenceTiebreak.LAST_OCCURRENCE:
        return occurrences[-1]
    anchor = _relative_position(source_index, source_len)
    return min(
        occurrences,
        key=lambda i: (abs(_relative_position(i, target_len) - anchor), i),
    )


def run_hybrid_method(
    source: StyledText,
    nmt_backend,
    llm_backend,
    policy: ProjectionPolicy = DEFAULT_POLICY,
    source_lang: str = "en",
    target_lang: str = "de",
    max_output_tokens: int = 256,
    prompt_dir: str | Path | None = None,
) -> StyledTranslation:
    """Translate plain text with NMT, then map styled unigrams with an LLM.

    The LLM is shown the source sentence, the plain translation, and the
    set of styled source words (source order, duplicates kept); it answers
    with one target word per unigram.  Each returned word is located in
    the target sentence and the resulting alignment drives projection.
    """
    styled = sorted(source.styled_indices())
    if not styled:
        raise ValueError("the hybrid method requires at least one styled token")

    plain = nmt_backend.translate(
        TranslationRequest(source.text, source_lang, target_lang, preserve_markup=False)
    )
    target_tokens = [tok.surface for tok in (StyledText.from_text(plain)).tokens]

    unigrams = [source.tokens[j].surface for j in styled]
    user_prompt = load_prompt("hybrid_user.txt", prompt_dir).format(
        source=source.text, target=plain, unigrams=render_unigram_set(unigrams)
    )
    system_prompt = load_prompt("hybrid_system.txt", prompt_dir)
    completion = llm_backend.complete(
        CompletionRequest(system_prompt, user_prompt, max_output_tokens)
    )
    mapped = parse_unigram_maps(completion)

    warnings: list[str] = []
    if len(mapped) != len(unigrams):
        warnings.append(
            f"unigram map length mismatch: {len(unigrams)} styled words, "
            f"{len(mapped)} mappings; pairing positionally"
        )
    pairs: set[tuple[int, int]] = set()
    source_len = len(source.tokens)
    target_len = len(target_tokens)
    for j, word in zip(styled, mapped):
        occurrences = _locate_occurrences(word, target_tokens)
        if not occurrences:
            warnings.append(f"mapped word {word!r} does not occur in the translation")
            continue
        i = _pick_occurrence(
            occurrences, j, source_len, target_len, policy.occurrence_tiebreak
        )
        pairs.add((j, i))

    alignment = AlignmentMap(frozenset(pairs), source_len, target_len)
    target, projection_warnings = project_styles(source, target_tokens, alignment, policy)
    warnings.extend(projection_warnings)
    return StyledTranslation(
        target, alignment, (), MethodKind.HYBRID, tuple(warnings)
    )


def styled_translation_to_json(result: StyledTranslation, source: StyledText) -> dict:
    """Serialize one pipeline result; deterministic for identical inputs."""
    return {
        "method": result.method.value,
        "source_text": source.text,
        "target": styled_text_to_json(result.target),
        "map": {
            "pairs": [[j, i] for j, i in result.map.sorted_pairs()],
            "source_len": result.map.source_len,
            "target_len": result.map.target_len,
        },
        "anomalies": [
            {"kind": a.kind.value, "location": a.location, "detail": a.detail}
            for a in result.anomalies
        ],
        "warnings": list(result.warnings),
    }


def styled_translation_from_json(data: Mapping) -> tuple[StyledTranslation, str]:
    """Rebuild a result entry; returns (translation, source_text)."""
    target = styled_text_from_json(data["target"])
    map_data = data["map"]
    alignment = AlignmentMap.from_pairs(
        [tuple(p) for p in map_data["pairs"]],
        map_data["source_len"],
        map_data["target_len"],
    )
    anomalies = tuple(
        ParseAnomaly(AnomalyKind(a["kind"]), a["location"], a["detail"])
        for a in data.get("anomalies", ())
    )
    translation = StyledTranslation(
        target,
        alignment,
        anomalies,
        MethodKind(data["method"]),
        tuple(data.get("warnings", ())),
    )
    return translation, data["source_text"]
