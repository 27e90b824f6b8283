"""Evaluation harness: span scoring, contiguity, AER, sweeps, comparisons.

Correctness is token-exact per style id against a gold-styled reference
translation.  Alignment quality is scored with the alignment error rate
over sure links.  The comparison renderer lays several methods side by
side, one row per sentence, with contiguity and correctness flags.
"""

from __future__ import annotations

import io
import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .align import (
    AlignmentMap,
    AlignmentMatrix,
    DimensionMismatchError,
    EmbeddingLexicon,
    OovPolicy,
)
from .markup import StyledText, styled_text_from_json, styled_text_to_json
from .pipelines import (
    DEFAULT_POLICY,
    ProjectionPolicy,
    StyledTranslation,
    run_attention_method,
)


class TokenizationMismatchError(ValueError):
    """Prediction and gold disagree on target tokens; sentence is excluded."""


class UnknownStyleIdError(KeyError):
    """The document carries no span with the requested style id."""


class FixtureSetMismatchError(ValueError):
    """Reports or files cover different fixture sets and cannot be joined."""


@dataclass(frozen=True)
class GoldRecord:
    """One reference sentence: styled source, styled translation, links."""

    source: StyledText
    gold_target: StyledText
    gold_map: AlignmentMap | None = None
    notes: str = ""


@dataclass(frozen=True)
class SentenceScore:
    index: int
    source_text: str
    contiguous_source: bool
    contiguous_target: bool
    correct: bool
    precision: float
    recall: float
    f1: float
    excluded_reason: str | None = None

    @property
    def excluded(self) -> bool:
        return self.excluded_reason is not None


@dataclass(frozen=True)
class MethodReport:
    method: str
    scores: tuple[SentenceScore, ...]

    @property
    def total(self) -> int:
        return len(self.scores)

    @property
    def included(self) -> tuple[SentenceScore, ...]:
        return tuple(s for s in self.scores if not s.excluded)

    @property
    def correct_count(self) -> int:
        return sum(1 for s in self.included if s.correct)

    def _mean(self, values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    @property
    def mean_precision(self) -> float:
        return self._mean([s.precision for s in self.included])

    @property
    def mean_recall(self) -> float:
        return self._mean([s.recall for s in self.included])

    @property
    def mean_f1(self) -> float:
        return self._mean([s.f1 for s in self.included])

    @property
    def source_texts(self) -> tuple[str, ...]:
        return tuple(s.source_text for s in self.scores)


@dataclass(frozen=True)
class AerScore:
    precision: float
    recall: float
    aer: float


def contiguity(doc: StyledText, style_id: int) -> bool:
    """Whether all tokens carrying the style form one contiguous run."""
    indices = doc.styled_indices(style_id)
    if not indices:
        raise UnknownStyleIdError(f"document has no span with style id {style_id}")
    return max(indices) - min(indices) + 1 == len(indices)


def _all_contiguous(doc: StyledText) -> bool:
    return all(contiguity(doc, sid) for sid in doc.attrs_by_id)


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def score_sentence(
    pred: StyledTranslation, gold: GoldRecord, index: int = 0
) -> SentenceScore:
    """Token-exact comparison of predicted vs gold styling, per style id.

    Precision and recall are micro-averaged over (style id, token) pairs.
    Raises :class:`TokenizationMismatchError` when the prediction's target
    tokens differ from the gold's; callers exclude such sentences.
    """
    pred_tokens = pred.target.surfaces
    gold_tokens = gold.gold_target.surfaces
    if pred_tokens != gold_tokens:
        raise TokenizationMismatchError(
            f"sentence {index}: prediction tokens differ from gold tokens"
        )

    style_ids = set(pred.target.attrs_by_id) | set(gold.gold_target.attrs_by_id)
    true_positive = 0
    pred_size = 0
    gold_size = 0
    correct = True
    for sid in style_ids:
        pred_set = pred.target.styled_indices(sid)
        gold_set = gold.gold_target.styled_indices(sid)
        true_positive += len(pred_set & gold_set)
        pred_size += len(pred_set)
        gold_size += len(gold_set)
        if pred_set != gold_set:
            correct = False

    precision = true_positive / pred_size if pred_size else 0.0
    recall = true_positive / gold_size if gold_size else 0.0
    # A prediction without spans is vacuously contiguous.
    contiguous_target = _all_contiguous(pred.target) if pred.target.spans else True
    return SentenceScore(
        index=index,
        source_text=gold.source.text,
        contiguous_source=_all_contiguous(gold.source) if gold.source.spans else True,
        contiguous_target=contiguous_target,
        correct=correct,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
    )


def evaluate_method(
    preds: Sequence[StyledTranslation],
    golds: Sequence[GoldRecord],
    method: str | None = None,
) -> MethodReport:
    """Score a method over a fixture set; mismatched sentences are excluded."""
    if len(preds) != len(golds):
        raise FixtureSetMismatchError(
            f"{len(preds)} predictions for {len(golds)} gold records"
        )
    label = method or (preds[0].method.value if preds else "unknown")
    scores: list[SentenceScore] = []
    for index, (pred, gold) in enumerate(zip(preds, golds)):
        try:
            scores.append(score_sentence(pred, gold, index))
        except TokenizationMismatchError as exc:
            scores.append(
                SentenceScore(
                    index=index,
                    source_text=gold.source.text,
                    contiguous_source=_all_contiguous(gold.source) if gold.source.spans else True,
                    contiguous_target=False,
                    correct=False,
                    precision=0.0,
                    recall=0.0,
                    f1=0.0,
                    excluded_reason=str(exc),
                )
            )
    return MethodReport(label, tuple(scores))


def aer(pred: AlignmentMap, gold: AlignmentMap) -> AerScore:
    """Alignment error rate over sure links: 1 - 2|A&S| / (|A|+|S|)."""
    if (pred.source_len, pred.target_len) != (gold.source_len, gold.target_len):
        raise DimensionMismatchError(
            f"alignment dimensions differ: {pred.source_len}x{pred.target_len} "
            f"vs {gold.source_len}x{gold.target_len}"
        )
    matches = len(pred.pairs & gold.pairs)
    precision = matches / len(pred.pairs) if pred.pairs else 0.0
    recall = matches / len(gold.pairs) if gold.pairs else 0.0
    denominator = len(pred.pairs) + len(gold.pairs)
    rate = 1.0 - (2.0 * matches / denominator) if denominator else 0.0
    return AerScore(precision, recall, rate)


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    mean_f1: float
    mean_aer: float | None
    pair_count: int


def threshold_sweep(
    fixtures: Sequence[GoldRecord],
    lexicon: EmbeddingLexicon,
    matrices: Sequence[AlignmentMatrix],
    k: int = 3,
    thresholds: Sequence[float] = (),
    oov_policy: OovPolicy = OovPolicy.PERMISSIVE,
    policy: ProjectionPolicy = DEFAULT_POLICY,
) -> list[SweepRow]:
    """Run the attention method across a threshold grid.

    Thresholds must be sorted ascending.  Raising the threshold can only
    shrink the surviving pair set, which is re-checked defensively here.
    """
    if len(fixtures) != len(matrices):
        raise FixtureSetMismatchError(
            f"{len(fixtures)} fixtures but {len(matrices)} matrices"
        )
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")

    rows: list[SweepRow] = []
    previous_pairs: int | None = None
    for threshold in thresholds:
        f1_values: list[float] = []
        aer_values: list[float] = []
        pair_count = 0
        for index, (gold, matrix) in enumerate(zip(fixtures, matrices)):
            pred = run_attention_method(
                gold.source, matrix, lexicon, k=k, threshold=threshold,
                oov_policy=oov_policy, policy=policy,
            )
            pair_count += len(pred.map.pairs)
            f1_values.append(score_sentence(pred, gold, index).f1)
            if gold.gold_map is not None:
                aer_values.append(aer(pred.map, gold.gold_map).aer)
        if previous_pairs is not None and pair_count > previous_pairs:
            raise RuntimeError(
                "pair count grew while the threshold rose; aligner is inconsistent"
            )
        previous_pairs = pair_count
        rows.append(
            SweepRow(
                threshold,
                sum(f1_values) / len(f1_values) if f1_values else 0.0,
                sum(aer_values) / len(aer_values) if aer_values else None,
                pair_count,
            )
        )
    return rows


def _check_congruent(reports: Sequence[MethodReport]) -> None:
    if not reports:
        return
    first = reports[0]
    for report in reports[1:]:
        if report.source_texts != first.source_texts:
            raise FixtureSetMismatchError(
                f"report {report.method!r} covers a different fixture set "
                f"than {first.method!r}"
            )


_YES_NO = {True: "y", False: "n"}
_OK = {True: "✓", False: "X"}


def render_comparison(reports: Sequence[MethodReport]) -> str:
    """Plain-text comparison matrix: one row per sentence, Cont./OK per method."""
    _check_congruent(reports)
    header_1 = [" #", "Eng."]
    header_2 = ["", "Cont."]
    for report in reports:
        header_1 += [report.method, ""]
        header_2 += ["Cont.", "OK"]

    body: list[list[str]] = []
    total = reports[0].total if reports else 0
    for row_idx in range(total):
        gold_cont = reports[0].scores[row_idx].contiguous_source
        row = [str(row_idx + 1), _YES_NO[gold_cont]]
        for report in reports:
            score = report.scores[row_idx]
            if score.excluded:
                row += ["-", "-"]
            else:
                row += [_YES_NO[score.contiguous_target], _OK[score.correct]]
        body.append(row)

    footer = ["", "OK"]
    for report in reports:
        footer += ["", f"{report.correct_count}/{report.total}"]

    table = [header_1, header_2] + body + ([footer] if reports else [])
    widths = [max(len(row[col]) for row in table) for col in range(len(table[0]))]
    lines = [
        "  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip()
        for row in table
    ]
    return "\n".join(lines)


def comparison_to_csv(reports: Sequence[MethodReport]) -> str:
    """CSV twin of :func:`render_comparison`, ASCII flags only."""
    _check_congruent(reports)
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    header = ["sentence", "source_contiguous"]
    for report in reports:
        header += [f"{report.method}_contiguous", f"{report.method}_correct"]
    writer.writerow(header)
    total = reports[0].total if reports else 0
    for row_idx in range(total):
        row = [str(row_idx + 1), _YES_NO[reports[0].scores[row_idx].contiguous_source]]
        for report in reports:
            score = report.scores[row_idx]
            if score.excluded:
                row += ["-", "-"]
            else:
                row += [_YES_NO[score.contiguous_target], "ok" if score.correct else "x"]
        writer.writerow(row)
    return buffer.getvalue()


def render_sweep(rows: Sequence[SweepRow]) -> str:
    lines = ["threshold  mean_f1  mean_aer  pairs"]
    for row in rows:
        aer_text = f"{row.mean_aer:.4f}" if row.mean_aer is not None else "-"
        lines.append(
            f"{row.threshold:9.2f}  {row.mean_f1:7.4f}  {aer_text:>8}  {row.pair_count:5d}"
        )
    return "\n".join(lines)


def gold_record_to_json(record: GoldRecord) -> dict:
    data = {
        "source": styled_text_to_json(record.source),
        "gold_target": styled_text_to_json(record.gold_target),
        "notes": record.notes,
    }
    if record.gold_map is not None:
        data["gold_map"] = {
            "pairs": [[j, i] for j, i in record.gold_map.sorted_pairs()],
            "source_len": record.gold_map.source_len,
            "target_len": record.gold_map.target_len,
        }
    return data


def gold_record_from_json(data: Mapping) -> GoldRecord:
    gold_map = None
    if "gold_map" in data:
        gm = data["gold_map"]
        gold_map = AlignmentMap.from_pairs(
            [tuple(p) for p in gm["pairs"]], gm["source_len"], gm["target_len"]
        )
    return GoldRecord(
        source=styled_text_from_json(data["source"]),
        gold_target=styled_text_from_json(data["gold_target"]),
        gold_map=gold_map,
        notes=data.get("notes", ""),
    )


def load_gold_records(path: str | Path) -> list[GoldRecord]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return [gold_record_from_json(item) for item in data]


def save_gold_records(records: Sequence[GoldRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([gold_record_to_json(r) for r in records], fh, ensure_ascii=False, indent=2)
        fh.write("\n")
