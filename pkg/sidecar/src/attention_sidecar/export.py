"""Export attention interchange files and word-vector files.

The heavy model stack (torch, transformers) is imported lazily inside the
functions that need it, so schema validation, the empty-input path, and
embedding export from an explicit source all run without it.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from pathlib import Path

import jsonschema
import numpy as np

from .aggregate import SPM_MARKER, aggregate_to_words, group_subwords, mean_over_heads

AGGREGATION_MODE = "sum-target-columns, mean-source-rows, renormalize"
HEAD_MODE = "mean"
ROW_SUM_TOLERANCE = 1e-3


class ModelLoadError(RuntimeError):
    """The translation model could not be loaded."""


class GenerationError(RuntimeError):
    """Translating one sentence failed; other sentences continue."""


class SourceUnavailableError(RuntimeError):
    """No embedding source was given and no model is available."""


INTERCHANGE_RECORD_SCHEMA = {
    "type": "object",
    "required": ["source_tokens", "target_tokens", "weights"],
    "additionalProperties": False,
    "properties": {
        "source_tokens": {
            "type": "array",
            "items": {"type": "string", "minLength": 1},
            "minItems": 1,
        },
        "target_tokens": {
            "type": "array",
            "items": {"type": "string", "minLength": 1},
            "minItems": 1,
        },
        "weights": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "number", "minimum": 0},
            },
        },
    },
}

EXPORT_SCHEMA = {
    "type": "object",
    "required": ["metadata", "sentences"],
    "additionalProperties": False,
    "properties": {
        "metadata": {
            "type": "object",
            "required": ["model_id", "layer_index", "aggregation", "head_mode"],
            "properties": {
                "model_id": {"type": "string"},
                "layer_index": {"type": "integer"},
                "aggregation": {"type": "string"},
                "head_mode": {"type": "string"},
                "generation_errors": {"type": "array"},
            },
            "additionalProperties": True,
        },
        "sentences": {"type": "array", "items": INTERCHANGE_RECORD_SCHEMA},
    },
}


def validate_export(data: Mapping) -> None:
    """Check an export against the interchange schema and its invariants.

    Beyond the JSON shape this enforces the numeric contract: weights are
    (source x target), every row sums to 1 within tolerance, and token
    lists are word-level (no subword markers survive aggregation).
    """
    jsonschema.validate(instance=data, schema=EXPORT_SCHEMA)
    for index, record in enumerate(data["sentences"]):
        source = record["source_tokens"]
        target = record["target_tokens"]
        weights = record["weights"]
        if len(weights) != len(source) or any(len(row) != len(target) for row in weights):
            raise ValueError(
                f"sentence {index}: weights are not "
                f"{len(source)}x{len(target)} (source x target)"
            )
        for row_index, row in enumerate(weights):
            if abs(sum(row) - 1.0) > ROW_SUM_TOLERANCE:
                raise ValueError(
                    f"sentence {index}: row {row_index} sums to {sum(row):.6f}, "
                    f"expected 1 within {ROW_SUM_TOLERANCE}"
                )
        for token in (*source, *target):
            if SPM_MARKER in token:
                raise ValueError(
                    f"sentence {index}: token {token!r} still carries a subword marker"
                )


def _metadata(model_id: str, layer_index: int) -> dict:
    return {
        "model_id": model_id,
        "layer_index": layer_index,
        "aggregation": AGGREGATION_MODE,
        "head_mode": HEAD_MODE,
    }


def _write_json(data: dict, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def export_attention(
    sentences: Sequence[str],
    model_id: str,
    output_path: str | Path,
    layer_index: int = -1,
) -> dict:
    """Translate sentences and export word-level cross-attention records.

    Returns the export payload after writing it to ``output_path``.  An
    empty sentence list short-circuits before any model import, producing
    an empty export with metadata only.  Per-sentence generation failures
    are recorded under ``metadata.generation_errors`` while the remaining
    sentences continue.
    """
    sentences = list(sentences)
    data: dict = {"metadata": _metadata(model_id, layer_index), "sentences": []}
    if sentences:
        translator = _load_model(model_id)
        errors: list[dict] = []
        for index, sentence in enumerate(sentences):
            try:
                data["sentences"].append(
                    _attend_one(translator, sentence, layer_index)
                )
            except GenerationError as exc:
                errors.append({"index": index, "error": str(exc)})
        if errors:
            data["metadata"]["generation_errors"] = errors
    validate_export(data)
    _write_json(data, output_path)
    return data


def _load_model(model_id: str):
    try:
        import torch  # noqa: F401
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
    except ImportError as exc:
        raise ModelLoadError(
            f"the model stack is not installed ({exc}); install the 'model' extra"
        ) from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForSeq2SeqLM.from_pretrained(model_id)
    except Exception as exc:
        raise ModelLoadError(f"could not load model {model_id!r}: {exc}") from exc
    model.eval()
    return tokenizer, model


def _attend_one(translator, sentence: str, layer_index: int) -> dict:
    """Translate one sentence and aggregate its cross-attention to words."""
    import torch

    tokenizer, model = translator
    try:
        encoded = tokenizer(sentence, return_tensors="pt")
        with torch.no_grad():
            generated = model.generate(**encoded, max_new_tokens=256)
            outputs = model(
                input_ids=encoded["input_ids"],
                attention_mask=encoded.get("attention_mask"),
                decoder_input_ids=generated,
                output_attentions=True,
            )
        # One matrix per decoder layer, each (batch, heads, target, source).
        layer = outputs.cross_attentions[layer_index][0]
        matrix = mean_over_heads(layer.numpy())

        source_pieces = tokenizer.convert_ids_to_tokens(encoded["input_ids"][0])
        target_pieces = tokenizer.convert_ids_to_tokens(generated[0])
        specials = set(tokenizer.all_special_tokens)
        source_keep = [i for i, p in enumerate(source_pieces) if p not in specials]
        target_keep = [i for i, p in enumerate(target_pieces) if p not in specials]
        if not source_keep or not target_keep:
            raise ValueError("no content pieces after removing special tokens")

        # Orient as (source pieces x target pieces); aggregation renormalizes.
        piece_matrix = matrix.T[np.ix_(source_keep, target_keep)]
        source_words, source_groups = group_subwords(
            [source_pieces[i] for i in source_keep]
        )
        target_words, target_groups = group_subwords(
            [target_pieces[i] for i in target_keep]
        )
        word_matrix = aggregate_to_words(piece_matrix, source_groups, target_groups)
    except GenerationError:
        raise
    except Exception as exc:
        raise GenerationError(f"{sentence!r}: {exc}") from exc
    return {
        "source_tokens": source_words,
        "target_tokens": target_words,
        "weights": [[float(w) for w in row] for row in word_matrix],
    }


def write_word_vectors(vectors: Mapping[str, Sequence[float]], path: str | Path) -> None:
    """Write a mapping as word-vector text: a count/dimension header, then
    one word per line followed by its components."""
    items = list(vectors.items())
    if not items:
        raise ValueError("cannot write an empty word-vector file")
    dimension = len(items[0][1])
    for word, vector in items:
        if len(vector) != dimension:
            raise ValueError(
                f"vector for {word!r} has {len(vector)} components, expected {dimension}"
            )
    lines = [f"{len(items)} {dimension}"]
    for word, vector in items:
        lines.append(word + " " + " ".join(repr(float(v)) for v in vector))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def export_embeddings(
    vocabulary: Sequence[str],
    output_path: str | Path,
    source: Mapping[str, Sequence[float]] | None = None,
    model_id: str | None = None,
    report_path: str | Path | None = None,
) -> dict:
    """Write word vectors for a vocabulary, reporting out-of-vocabulary words.

    ``source`` is any word-to-vector mapping; when omitted, vectors come
    from the input embedding table of ``model_id`` (words that tokenize to
    a single piece).  The report — written next to the output unless
    ``report_path`` overrides — lists the covered words and the OOV words
    omitted from the file.
    """
    if source is None:
        if model_id is None:
            raise SourceUnavailableError(
                "no embedding source: pass a vector mapping or a model id"
            )
        source = _model_embedding_source(model_id, vocabulary)

    covered: dict[str, Sequence[float]] = {}
    oov: list[str] = []
    for word in dict.fromkeys(vocabulary):
        vector = source.get(word)
        if vector is None:
            oov.append(word)
        else:
            covered[word] = vector
    if not covered:
        raise SourceUnavailableError(
            "the embedding source covers none of the requested words"
        )
    write_word_vectors(covered, output_path)

    report = {"covered": sorted(covered), "oov": sorted(oov)}
    if report_path is None:
        report_path = Path(output_path).with_suffix(".report.json")
    _write_json(report, report_path)
    return report


def _model_embedding_source(
    model_id: str, vocabulary: Sequence[str]
) -> dict[str, list[float]]:
    """Input-embedding vectors for words that tokenize to a single piece."""
    try:
        import torch
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
    except ImportError as exc:
        raise SourceUnavailableError(
            f"the model stack is not installed ({exc}); install the 'model' extra"
        ) from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForSeq2SeqLM.from_pretrained(model_id)
    except Exception as exc:
        raise SourceUnavailableError(f"could not load model {model_id!r}: {exc}") from exc
    table = model.get_input_embeddings().weight
    out: dict[str, list[float]] = {}
    specials = set(tokenizer.all_special_ids)
    for word in dict.fromkeys(vocabulary):
        ids = [i for i in tokenizer(word)["input_ids"] if i not in specials]
        if len(ids) != 1:
            continue
        with torch.no_grad():
            out[word] = [float(v) for v in table[ids[0]]]
    return out
