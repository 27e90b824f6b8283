"""Word-alignment primitives: attention-based alignment and IBM Model 1.

An alignment is a set of (source index, target index) pairs; many-to-many
links are permitted.  The attention aligner reads a row-stochastic
attention matrix and keeps only top-k candidates whose word embeddings
clear a cosine-similarity threshold.  IBM Model 1 is the classic EM
lexical-translation baseline, included for comparison on small corpora.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

ROW_SUM_TOLERANCE = 1e-3


class ZeroVectorError(ValueError):
    """Cosine similarity is undefined for a zero vector."""


class DimensionMismatchError(ValueError):
    """Operands disagree on dimensionality."""


class LexiconFormatError(ValueError):
    """Malformed word-vector text; the message names the offending line."""


class MatrixFormatError(ValueError):
    """Attention matrix violates shape or stochasticity constraints."""


class EmptyCorpusError(ValueError):
    """Model training requires at least one sentence pair."""


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1 or va.shape != vb.shape:
        raise DimensionMismatchError(
            f"cannot compare vectors of shape {va.shape} and {vb.shape}"
        )
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for zero vectors")
    value = float(np.dot(va, vb) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))


def top_k_indices(row: Sequence[float] | np.ndarray, k: int) -> list[int]:
    """Indices of the k largest entries, ties broken toward the lower index."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    values = list(row)
    return sorted(range(len(values)), key=lambda i: (-values[i], i))[:k]


@dataclass(frozen=True)
class AlignmentMap:
    """A set of (source j, target i) links with the sentence dimensions."""

    pairs: frozenset[tuple[int, int]]
    source_len: int
    target_len: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "pairs", frozenset(self.pairs))
        if self.source_len < 0 or self.target_len < 0:
            raise ValueError("sentence lengths must be non-negative")
        for j, i in self.pairs:
            if not (0 <= j < self.source_len and 0 <= i < self.target_len):
                raise ValueError(
                    f"pair ({j}, {i}) outside {self.source_len}x{self.target_len}"
                )

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[int, int]], source_len: int, target_len: int
    ) -> AlignmentMap:
        return cls(frozenset((int(j), int(i)) for j, i in pairs), source_len, target_len)

    def targets_of(self, j: int) -> set[int]:
        return {i for jj, i in self.pairs if jj == j}

    def image_of(self, source_indices: Iterable[int]) -> set[int]:
        wanted = set(source_indices)
        return {i for j, i in self.pairs if j in wanted}

    def sorted_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pairs)


@dataclass(frozen=True, eq=False)
class AlignmentMatrix:
    """Row-stochastic source-to-target attention over word tokens."""

    source_tokens: tuple[str, ...]
    target_tokens: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "source_tokens", tuple(self.source_tokens))
        object.__setattr__(self, "target_tokens", tuple(self.target_tokens))
        arr = np.array(self.weights, dtype=np.float64)
        if arr.ndim != 2 or arr.shape != (len(self.source_tokens), len(self.target_tokens)):
            raise MatrixFormatError(
                f"weights shape {arr.shape} does not match "
                f"{len(self.source_tokens)} source x {len(self.target_tokens)} target tokens"
            )
        if np.any(arr < 0.0):
            raise MatrixFormatError("attention weights must be non-negative")
        sums = arr.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)[0]
        if bad.size:
            raise MatrixFormatError(
                f"row {int(bad[0])} sums to {sums[bad[0]]:.6f}, expected 1 "
                f"within {ROW_SUM_TOLERANCE}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "weights", arr)

    @classmethod
    def from_json_dict(cls, data: Mapping) -> AlignmentMatrix:
        try:
            return cls(
                tuple(data["source_tokens"]),
                tuple(data["target_tokens"]),
                np.asarray(data["weights"], dtype=np.float64),
            )
        except KeyError as exc:
            raise MatrixFormatError(f"missing key in attention record: {exc}") from exc
        except (TypeError, ValueError) as exc:
            if isinstance(exc, MatrixFormatError):
                raise
            raise MatrixFormatError(f"malformed attention record: {exc}") from exc

    def to_json_dict(self) -> dict:
        return {
            "source_tokens": list(self.source_tokens),
            "target_tokens": list(self.target_tokens),
            "weights": [[float(w) for w in row] for row in self.weights],
        }


def load_matrices(path: str | Path) -> list[AlignmentMatrix]:
    """Load one interchange record or an array of them from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    records = data if isinstance(data, list) else [data]
    return [AlignmentMatrix.from_json_dict(rec) for rec in records]


class OovPolicy(Enum):
    """What the similarity filter does when a word has no embedding."""

    PERMISSIVE = "permissive"
    STRICT = "strict"


@dataclass(frozen=True, eq=False)
class EmbeddingLexicon:
    """Word-to-vector table with optional casefolded fallback lookup."""

    dimension: int
    table: Mapping[str, np.ndarray]
    casefold_lookup: bool = True
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        any_nonzero = False
        for word, vec in self.table.items():
            if vec.shape != (self.dimension,):
                raise DimensionMismatchError(
                    f"vector for {word!r} has shape {vec.shape}, expected ({self.dimension},)"
                )
            if np.any(vec):
                any_nonzero = True
        if not any_nonzero:
            raise ValueError("lexicon contains no non-zero vector")

    def lookup(self, word: str) -> np.ndarray | None:
        vec = self.table.get(word)
        if vec is None and self.casefold_lookup:
            vec = self.table.get(word.casefold())
        return vec

    def __len__(self) -> int:
        return len(self.table)


def load_lexicon(
    source: IO[str] | Iterable[str], casefold_lookup: bool = True
) -> EmbeddingLexicon:
    """Parse word-vector text: a "count dimension" header, then one word per line.

    Duplicate words keep the first occurrence.  A header count that
    disagrees with the body is tolerated and recorded as a warning; a line
    whose value count disagrees with the header dimension is an error.
    """
    lines = iter(source)
    try:
        header = next(lines)
    except StopIteration:
        raise LexiconFormatError("line 1: empty input, expected 'count dimension' header")
    parts = header.split()
    if len(parts) != 2:
        raise LexiconFormatError(f"line 1: expected 'count dimension' header, got {header!r}")
    try:
        count, dimension = int(parts[0]), int(parts[1])
    except ValueError:
        raise LexiconFormatError(f"line 1: non-integer header fields in {header!r}")
    if count < 0 or dimension < 1:
        raise LexiconFormatError(f"line 1: bad header values count={count} dimension={dimension}")

    table: dict[str, np.ndarray] = {}
    body_lines = 0
    for lineno, raw in enumerate(lines, start=2):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        body_lines += 1
        fields = line.split()
        word, values = fields[0], fields[1:]
        if len(values) != dimension:
            raise DimensionMismatchError(
                f"line {lineno}: expected {dimension} values for {word!r}, got {len(values)}"
            )
        try:
            vec = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise LexiconFormatError(f"line {lineno}: non-numeric vector component")
        if word not in table:
            vec.setflags(write=False)
            table[word] = vec

    warnings: list[str] = []
    if body_lines != count:
        warnings.append(f"header declares {count} entries but body has {body_lines}")
    return EmbeddingLexicon(dimension, table, casefold_lookup, tuple(warnings))


def load_lexicon_file(path: str | Path, casefold_lookup: bool = True) -> EmbeddingLexicon:
    with open(path, encoding="utf-8") as fh:
        return load_lexicon(fh, casefold_lookup)


def attention_align(
    matrix: AlignmentMatrix,
    styled_source_indices: Iterable[int],
    lexicon: EmbeddingLexicon,
    k: int = 3,
    threshold: float = 0.5,
    oov_policy: OovPolicy = OovPolicy.PERMISSIVE,
) -> AlignmentMap:
    """Align styled source words via attention rank plus a similarity gate.

    For each styled source index j, the top-k attention candidates in row j
    are kept iff the embeddings of the two words have cosine similarity
    strictly greater than ``threshold``.  Under the permissive OOV policy a
    missing (or zero) embedding lets the candidate pass on attention rank
    alone; under the strict policy it fails the gate and zero-vector errors
    propagate.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [-1, 1], got {threshold}")
    source_len = len(matrix.source_tokens)
    target_len = len(matrix.target_tokens)
    styled = sorted(set(styled_source_indices))
    for j in styled:
        if not 0 <= j < source_len:
            raise ValueError(f"styled index {j} outside source length {source_len}")

    pairs: set[tuple[int, int]] = set()
    for j in styled:
        src_vec = lexicon.lookup(matrix.source_tokens[j])
        for i in top_k_indices(matrix.weights[j], k):
            tgt_vec = lexicon.lookup(matrix.target_tokens[i])
            if src_vec is None or tgt_vec is None:
                if oov_policy is OovPolicy.PERMISSIVE:
                    pairs.add((j, i))
                continue
            try:
                sim = cosine_similarity(src_vec, tgt_vec)
            except ZeroVectorError:
                if oov_policy is OovPolicy.PERMISSIVE:
                    pairs.add((j, i))
                    continue
                raise
            if sim > threshold:
                pairs.add((j, i))
    return AlignmentMap(frozenset(pairs), source_len, target_len)


@dataclass(frozen=True)
class Ibm1Model:
    """Lexical translation table t(target | source) plus training trace."""

    t_table: Mapping[str, Mapping[str, float]]
    source_vocab: frozenset[str]
    target_vocab: frozenset[str]
    iteration_count: int
    log_likelihoods: tuple[float, ...] = field(repr=False)

    def probability(self, target_word: str, source_word: str) -> float:
        return self.t_table.get(source_word, {}).get(target_word, 0.0)


def _corpus_log_likelihood(
    pairs: Sequence[tuple[list[str], list[str]]],
    t_table: Mapping[str, Mapping[str, float]],
) -> float:
    total = 0.0
    for src, tgt in pairs:
        for t in tgt:
            marginal = sum(t_table[s].get(t, 0.0) for s in src) / len(src)
            total += math.log(marginal)
    return total


def ibm1_train(
    corpus: Iterable[tuple[Sequence[str], Sequence[str]]], iterations: int = 10
) -> Ibm1Model:
    """Train IBM Model 1 by expectation-maximization.

    Translation probabilities start uniform over co-occurring words and are
    re-estimated from expected counts each iteration.  The per-iteration
    corpus log-likelihood (including the initial table) is recorded on the
    returned model; EM guarantees it never decreases.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    pairs = [(list(src), list(tgt)) for src, tgt in corpus]
    if not pairs:
        raise EmptyCorpusError("training corpus is empty")
    for n, (src, tgt) in enumerate(pairs):
        if not src or not tgt:
            raise ValueError(f"sentence pair {n} has an empty side")

    source_vocab = {s for src, _ in pairs for s in src}
    target_vocab = {t for _, tgt in pairs for t in tgt}
    uniform = 1.0 / len(target_vocab)

    cooccurring: dict[str, set[str]] = defaultdict(set)
    for src, tgt in pairs:
        for s in set(src):
            cooccurring[s].update(tgt)
    t_table: dict[str, dict[str, float]] = {
        s: {t: uniform for t in sorted(ts)} for s, ts in cooccurring.items()
    }

    likelihoods = [_corpus_log_likelihood(pairs, t_table)]
    for _ in range(iterations):
        counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        totals: dict[str, float] = defaultdict(float)
        for src, tgt in pairs:
            for t in tgt:
                sentence_total = sum(t_table[s].get(t, 0.0) for s in src)
                for s in src:
                    delta = t_table[s].get(t, 0.0) / sentence_total
                    if delta:
                        counts[s][t] += delta
                        totals[s] += delta
        t_table = {
            s: {t: c / totals[s] for t, c in sorted(word_counts.items())}
            for s, word_counts in counts.items()
        }
        likelihoods.append(_corpus_log_likelihood(pairs, t_table))

    return Ibm1Model(
        t_table,
        frozenset(source_vocab),
        frozenset(target_vocab),
        iterations,
        tuple(likelihoods),
    )


def ibm1_align(
    model: Ibm1Model, source: Sequence[str], target: Sequence[str]
) -> AlignmentMap:
    """Pair each source word with its most probable target word.

    Ties break toward the lower target index.  A source word unseen in
    training, or one whose candidates all have zero probability, pairs with
    nothing.
    """
    pairs: set[tuple[int, int]] = set()
    for j, word in enumerate(source):
        row = model.t_table.get(word)
        if not row:
            continue
        best_i = -1
        best_p = 0.0
        for i, tgt_word in enumerate(target):
            p = row.get(tgt_word, 0.0)
            if p > best_p:
                best_p, best_i = p, i
        if best_i >= 0:
            pairs.add((j, best_i))
    return AlignmentMap(frozenset(pairs), len(source), len(target))
