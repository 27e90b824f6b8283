"""Aggregate subword-level cross-attention to word level.

Translation models attend between subword pieces, but the interchange
format consumed downstream is word-level.  Aggregation proceeds in three
steps: attention mass flowing into one target word is summed over that
word's subword columns, a source word split into several pieces gets the
mean of its subword rows, and finally every row is renormalized to sum
to one.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

SPM_MARKER = "▁"  # the sentencepiece word-start marker "▁"


def group_subwords(pieces: Sequence[str]) -> tuple[list[str], list[list[int]]]:
    """Merge sentencepiece pieces into words plus their piece-index groups.

    A piece starting with the word-start marker opens a new word and the
    marker is stripped from the surface; the very first piece opens a word
    regardless.  Raises ValueError when a group yields an empty surface
    (for example a bare marker with no continuation).
    """
    words: list[str] = []
    groups: list[list[int]] = []
    for index, piece in enumerate(pieces):
        starts_word = piece.startswith(SPM_MARKER) or not words
        surface = piece[len(SPM_MARKER):] if piece.startswith(SPM_MARKER) else piece
        if starts_word:
            words.append(surface)
            groups.append([index])
        else:
            words[-1] += surface
            groups[-1].append(index)
    for word, group in zip(words, groups):
        if not word:
            raise ValueError(f"pieces {group} yield an empty word surface")
    return words, groups


def _check_groups(groups: Sequence[Sequence[int]], size: int, side: str) -> None:
    flat = [index for group in groups for index in group]
    if sorted(flat) != list(range(size)):
        raise ValueError(
            f"{side} groups must partition the {size} subword positions, got {groups}"
        )


def mean_over_heads(head_matrices) -> np.ndarray:
    """Average a stack of per-head attention matrices into one matrix."""
    arr = np.asarray(head_matrices, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] < 1:
        raise ValueError(f"expected a (heads, rows, columns) stack, got shape {arr.shape}")
    return arr.mean(axis=0)


def aggregate_to_words(
    weights,
    source_groups: Sequence[Sequence[int]],
    target_groups: Sequence[Sequence[int]],
) -> np.ndarray:
    """Collapse a subword attention matrix onto word groups.

    ``weights`` is (source subwords x target subwords).  Target columns
    belonging to one word are summed, source rows belonging to one word
    are averaged, then each row is renormalized to sum to one.
    """
    arr = np.asarray(weights, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if np.any(arr < 0.0):
        raise ValueError("attention weights must be non-negative")
    _check_groups(source_groups, arr.shape[0], "source")
    _check_groups(target_groups, arr.shape[1], "target")

    summed = np.stack([arr[:, list(g)].sum(axis=1) for g in target_groups], axis=1)
    averaged = np.stack([summed[list(g), :].mean(axis=0) for g in source_groups], axis=0)
    row_mass = averaged.sum(axis=1, keepdims=True)
    if np.any(row_mass <= 0.0):
        raise ValueError("a source word received zero total attention mass")
    return averaged / row_mass
