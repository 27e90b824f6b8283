"""Acceptance checks: one end-to-end test per headline capability.

Each test's docstring first line is the label printed in the pass/fail
summary at the end of the run.
"""

from __future__ import annotations

import math
import random
import time

import numpy as np

from fixture_corpus import (
    BOLD,
    EXPECTED_FLAGS,
    EXPECTED_TOTALS,
    HIGHLIGHT,
    ITALIC,
    ROWS,
    UNDERLINE,
    gold_doc,
    source_doc,
)
from stylealign import align, backends, cli, evalkit, pipelines
from stylealign.markup import MarkupFormat, StyledText, StyleSpan, parse_tagged, render_tagged


def test_nmt_tags_fixture(corpus_dir):
    """tag-preserving translation keeps the styled phrase intact on a recorded fixture."""
    backend = backends.load_backends(corpus_dir / "backends.json")["nmt-replay"]
    row = ROWS[1]
    begin = time.perf_counter()
    result = pipelines.run_nmt_tags_method(
        source_doc(row), backend, source_lang="en", target_lang="de"
    )
    elapsed = time.perf_counter() - begin
    assert result.anomalies == ()
    assert [(s.start, s.end) for s in result.target.spans] == [(12, 14)]
    assert result.target.surfaces[12:14] == ("fast", "verfünffacht")
    assert result.target.spans[0].attrs == row.attrs
    assert elapsed < 1.0


def test_llm_split_spans(corpus_dir):
    """delimiter prompting recovers a phrase that splits into two spans."""
    backend = backends.load_backends(corpus_dir / "backends.json")["llm-split"]
    result = pipelines.run_llm_delimiters_method(source_doc(ROWS[0]), backend)
    assert result.anomalies == ()
    assert [(s.start, s.end) for s in result.target.spans] == [(16, 18), (23, 27)]
    surfaces = result.target.surfaces
    assert surfaces[16:18] == ("im", "Februar")
    assert surfaces[23:27] == ("unter", "10", "Millionen", "fiel")
    assert all(span.attrs == ROWS[0].attrs for span in result.target.spans)


def test_hybrid_unigram_mapping(corpus_dir):
    """hybrid unigram mapping aligns six styled words and projects two spans."""
    pool = backends.load_backends(corpus_dir / "backends.json")
    result = pipelines.run_hybrid_method(
        source_doc(ROWS[0]), pool["nmt-replay"], pool["llm-replay"]
    )
    assert len(result.map.pairs) == 6
    assert result.map.pairs == frozenset(ROWS[0].styled_pairs)
    assert [(s.start, s.end) for s in result.target.spans] == [(16, 18), (23, 27)]
    assert result.warnings == ()


def test_comparison_table(corpus_dir, tmp_path, capsys):
    """the four methods reproduce the reference comparison table end to end."""
    result_args = []
    gold_args = []
    gold_names = ("gold_attention.json", "gold_nmt.json", "gold_llm.json", "gold_hybrid.json")
    for method, gold_name in zip(pipelines.MethodKind, gold_names):
        out = tmp_path / f"{method.value}.json"
        code = cli.main([
            "translate-styled",
            "--in", str(corpus_dir / "documents.json"),
            "--out", str(out),
            "--method", method.value,
            "--backends", str(corpus_dir / "backends.json"),
            "--nmt-backend", "nmt-replay",
            "--llm-backend", "llm-replay",
            "--lexicon", str(corpus_dir / "lexicon.vec"),
            "--matrix", str(corpus_dir / "matrices.json"),
        ])
        assert code == 0
        result_args.append(str(out))
        gold_args += ["--gold", str(corpus_dir / gold_name)]
    capsys.readouterr()

    code = cli.main(["compare", *gold_args, "--results", *result_args])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    flag_map = {"✓": "ok", "X": "x"}
    got_rows = [
        tuple(flag_map.get(cell, cell) for cell in line.split()[1:])
        for line in lines[2 : 2 + len(EXPECTED_FLAGS)]
    ]
    assert got_rows == list(EXPECTED_FLAGS)
    footer = lines[2 + len(EXPECTED_FLAGS)].split()
    assert footer == ["OK", *EXPECTED_TOTALS]


def _brute_force_pairs(src_words, tgt_words, weights, styled, vectors, k, threshold, strict):
    """Plain-math re-derivation of rank-then-gate alignment.

    Returns None when any gate comparison lands within 1e-9 of the
    threshold, so the caller can discard the instance as ambiguous.
    """
    pairs = set()
    for j in styled:
        row = weights[j]
        ranked = sorted(range(len(row)), key=lambda i: (-row[i], i))[:k]
        for i in ranked:
            va = vectors.get(src_words[j])
            vb = vectors.get(tgt_words[i])
            if va is None or vb is None:
                if not strict:
                    pairs.add((j, i))
                continue
            dot = sum(x * y for x, y in zip(va, vb))
            norm = math.sqrt(sum(x * x for x in va)) * math.sqrt(sum(y * y for y in vb))
            cos = max(-1.0, min(1.0, dot / norm))
            if abs(cos - threshold) < 1e-9:
                return None
            if cos > threshold:
                pairs.add((j, i))
    return pairs


def test_attention_brute_force():
    """attention alignment matches a brute-force reference on random instances."""
    rng = random.Random(20260817)
    checked = 0
    attempts = 0
    while checked < 200:
        attempts += 1
        assert attempts < 4000, "could not draw enough unambiguous instances"
        source_count = rng.randint(1, 8)
        target_count = rng.randint(1, 8)
        dim = rng.randint(2, 4)
        src_words = [f"src{j}" for j in range(source_count)]
        tgt_words = [f"tgt{i}" for i in range(target_count)]

        vectors = {}
        for index, word in enumerate(src_words + tgt_words):
            if index > 0 and rng.random() < 0.15:
                continue  # out-of-vocabulary word
            vec = [0] * dim
            while not any(vec):
                vec = [rng.randint(-3, 3) for _ in range(dim)]
            vectors[word] = vec

        weights = []
        for _ in range(source_count):
            raw = [rng.random() + 0.05 for _ in range(target_count)]
            total = sum(raw)
            weights.append([value / total for value in raw])

        styled = [j for j in range(source_count) if rng.random() < 0.5]
        k = rng.randint(1, 4)
        threshold = rng.choice([-0.5, 0.0, 0.25, 0.5, 0.9])
        strict = rng.random() < 0.5

        expected = _brute_force_pairs(
            src_words, tgt_words, weights, styled, vectors, k, threshold, strict
        )
        if expected is None:
            continue

        matrix = align.AlignmentMatrix(tuple(src_words), tuple(tgt_words), weights)
        lexicon = align.EmbeddingLexicon(
            dim, {w: np.asarray(v, dtype=np.float64) for w, v in vectors.items()}
        )
        got = align.attention_align(
            matrix, styled, lexicon, k=k, threshold=threshold,
            oov_policy=align.OovPolicy.STRICT if strict else align.OovPolicy.PERMISSIVE,
        )
        assert got.pairs == frozenset(expected), (
            f"instance {checked}: J={source_count} I={target_count} k={k} "
            f"threshold={threshold} strict={strict}"
        )
        assert (got.source_len, got.target_len) == (source_count, target_count)
        checked += 1


def test_cosine_analytic():
    """cosine similarity is exact on the analytic case and invariant to scale."""
    assert math.isclose(
        align.cosine_similarity([1.0, 0.0], [1.0, 1.0]), 1 / math.sqrt(2), abs_tol=1e-9
    )
    assert align.cosine_similarity([2.0, 0.0], [5.0, 0.0]) == 1.0
    assert align.cosine_similarity([1.0, 0.0], [-3.0, 0.0]) == -1.0
    a = [1.5, -2.0, 0.25]
    b = [0.5, 0.75, -1.0]
    reference = align.cosine_similarity(a, b)
    assert math.isclose(reference, align.cosine_similarity(b, a), abs_tol=1e-9)
    for scale in (1e-3, 3.7, 1e3):
        scaled = align.cosine_similarity(a, [scale * x for x in b])
        assert math.isclose(reference, scaled, abs_tol=1e-9)


def test_em_convergence(corpus_dir):
    """expectation-maximization training converges and never decreases likelihood."""
    toy = [
        ("the house".split(), "das haus".split()),
        ("the book".split(), "das buch".split()),
    ]
    model3 = align.ibm1_train(toy, iterations=3)
    assert math.isclose(model3.probability("das", "the"), 9 / 13, abs_tol=1e-9)

    model20 = align.ibm1_train(toy, iterations=20)
    assert len(model20.log_likelihoods) == 21
    assert math.isclose(model20.log_likelihoods[0], 4 * math.log(1 / 3), abs_tol=1e-9)
    trace = model20.log_likelihoods
    assert all(later >= earlier - 1e-9 for earlier, later in zip(trace, trace[1:]))
    assert model20.probability("das", "the") > 0.9
    assert model20.probability("haus", "house") > 0.9

    # A lexical model trained on just these ten sentence pairs scores far
    # below the attention method on the same gold fixtures.
    golds = evalkit.load_gold_records(corpus_dir / "gold_attention.json")
    lexicon = align.load_lexicon_file(corpus_dir / "lexicon.vec")
    matrices = align.load_matrices(corpus_dir / "matrices.json")
    em_model = align.ibm1_train(
        [(source_doc(r).surfaces, gold_doc(r).surfaces) for r in ROWS], iterations=15
    )
    em_preds = []
    attention_preds = []
    for row, gold, matrix in zip(ROWS, golds, matrices):
        source = source_doc(row)
        target_surfaces = gold.gold_target.surfaces
        full = align.ibm1_align(em_model, source.surfaces, target_surfaces)
        styled = source.styled_indices()
        restricted = align.AlignmentMap(
            frozenset(p for p in full.pairs if p[0] in styled),
            full.source_len,
            full.target_len,
        )
        target, warnings = pipelines.project_styles(source, target_surfaces, restricted)
        em_preds.append(
            pipelines.StyledTranslation(
                target, restricted, (), pipelines.MethodKind.ATTENTION, tuple(warnings)
            )
        )
        attention_preds.append(pipelines.run_attention_method(source, matrix, lexicon))

    em_report = evalkit.evaluate_method(em_preds, golds, "lexical-em")
    attention_report = evalkit.evaluate_method(attention_preds, golds, "attention")
    assert attention_report.mean_f1 == 1.0
    assert em_report.mean_f1 < attention_report.mean_f1


def test_markup_round_trip():
    """wire markup round-trips for arbitrary documents in both formats."""
    rng = random.Random(8)
    vocabulary = ["alpha", "beta", "gamma", "delta", "wort", "zeichen", "stil", "satz"]
    attr_pool = [
        frozenset({BOLD}),
        frozenset({ITALIC}),
        frozenset({UNDERLINE, HIGHLIGHT}),
        frozenset({BOLD, ITALIC}),
    ]
    for case in range(500):
        word_count = rng.randint(1, 12)
        words = [rng.choice(vocabulary) for _ in range(word_count)]
        style_ids = rng.sample([1, 2, 3], rng.randint(0, 3))
        spans = []
        attrs_by_id = {}
        for style_id in sorted(style_ids):
            span_count = rng.randint(1, 2)
            if 2 * span_count > word_count + 1:
                span_count = 1
            cuts = sorted(rng.sample(range(word_count + 1), 2 * span_count))
            attrs = rng.choice(attr_pool)
            attrs_by_id[style_id] = attrs
            for start, end in zip(cuts[::2], cuts[1::2]):
                spans.append(StyleSpan(style_id, attrs, start, end))
        doc = StyledText.from_tokens(words, spans)

        for fmt, extended in (
            (MarkupFormat.NUMBERED_TAGS, False),
            (MarkupFormat.DELIMITERS, True),
        ):
            wire = render_tagged(doc, fmt, extended=extended)
            parsed, anomalies = parse_tagged(wire, fmt, attrs_by_id=attrs_by_id or None)
            assert anomalies == [], f"case {case} via {fmt.value}: {anomalies}"
            assert parsed.surfaces == doc.surfaces, f"case {case} via {fmt.value}"
            for style_id in style_ids:
                assert parsed.styled_indices(style_id) == doc.styled_indices(style_id), (
                    f"case {case} via {fmt.value}: style {style_id}"
                )
            assert parsed.attrs_by_id == doc.attrs_by_id, f"case {case} via {fmt.value}"
