"""Tokenizer, document model, wire formats, and parse recovery."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from stylealign.markup import (
    DEFAULT_ATTRS,
    AnomalyKind,
    MarkupFormat,
    MarkupOverlapError,
    ParseAnomaly,
    StyleAttr,
    StyleKind,
    StyleSpan,
    StyledText,
    Token,
    contiguous_runs,
    parse_tagged,
    render_tagged,
    spans_from_indices,
    styled_text_from_json,
    styled_text_to_json,
    tokenize,
)

BOLD = StyleAttr(StyleKind.BOLD)
ITALIC = StyleAttr(StyleKind.ITALIC)
LINK = StyleAttr(StyleKind.HYPERLINK, "https://example.com/x")


class TestTokenize:
    def test_splits_on_whitespace(self):
        assert [t.surface for t in tokenize("im Februar erstmals")] == [
            "im",
            "Februar",
            "erstmals",
        ]

    def test_trailing_punctuation_detaches(self):
        assert [t.surface for t in tokenize("Millionen fiel.")] == [
            "Millionen",
            "fiel",
            ".",
        ]

    def test_edge_punctuation_peels_one_character_at_a_time(self):
        assert [t.surface for t in tokenize("(hello)!")] == ["(", "hello", ")", "!"]
        assert [t.surface for t in tokenize('"Ja!", sagte er.')] == [
            '"',
            "Ja",
            "!",
            '"',
            ",",
            "sagte",
            "er",
            ".",
        ]

    def test_internal_punctuation_stays_attached(self):
        assert [t.surface for t in tokenize("three-day drills")] == ["three-day", "drills"]
        assert [t.surface for t in tokenize("the committee's plans")] == [
            "the",
            "committee's",
            "plans",
        ]

    def test_offsets_are_faithful(self):
        text = "  A Labor(!) report,  due soon."
        for tok in tokenize(text):
            assert text[tok.char_start : tok.char_end] == tok.surface

    def test_all_punctuation_chunk(self):
        assert [t.surface for t in tokenize("...")] == [".", ".", "."]

    def test_empty_and_whitespace_only(self):
        assert tokenize("") == ()
        assert tokenize(" \t\n ") == ()

    def test_unicode_whitespace_separates(self):
        assert [t.surface for t in tokenize("a b c")] == ["a", "b", "c"]


class TestStyleAttr:
    def test_payload_kinds_require_payload(self):
        with pytest.raises(ValueError):
            StyleAttr(StyleKind.HYPERLINK)
        with pytest.raises(ValueError):
            StyleAttr(StyleKind.COLOR, "")
        assert StyleAttr(StyleKind.FONT, "Lora").payload == "Lora"

    def test_plain_kinds_reject_payload(self):
        with pytest.raises(ValueError):
            StyleAttr(StyleKind.BOLD, "x")
        assert StyleAttr(StyleKind.UNDERLINE).payload is None


class TestStyleSpan:
    def test_rejects_bad_ranges_and_ids(self):
        with pytest.raises(ValueError):
            StyleSpan(0, frozenset({BOLD}), 0, 1)
        with pytest.raises(ValueError):
            StyleSpan(1, frozenset(), 0, 1)
        with pytest.raises(ValueError):
            StyleSpan(1, frozenset({BOLD}), 2, 2)
        with pytest.raises(ValueError):
            StyleSpan(1, frozenset({BOLD}), -1, 1)

    def test_token_indices(self):
        assert list(StyleSpan(1, frozenset({BOLD}), 2, 5).token_indices) == [2, 3, 4]


class TestStyledText:
    def test_from_text_builds_tokens(self):
        doc = StyledText.from_text("went viral fast.")
        assert doc.surfaces == ("went", "viral", "fast", ".")

    def test_rejects_span_beyond_tokens(self):
        with pytest.raises(ValueError):
            StyledText.from_text("two words", [StyleSpan(1, frozenset({BOLD}), 0, 3)])

    def test_rejects_same_id_with_differing_attrs(self):
        spans = [
            StyleSpan(1, frozenset({BOLD}), 0, 1),
            StyleSpan(1, frozenset({ITALIC}), 1, 2),
        ]
        with pytest.raises(ValueError):
            StyledText.from_text("two words", spans)

    def test_rejects_mismatched_token_slice(self):
        with pytest.raises(ValueError):
            StyledText("abc", (Token("x", 0, 1),))

    def test_rejects_overlapping_tokens(self):
        with pytest.raises(ValueError):
            StyledText("abc", (Token("ab", 0, 2), Token("bc", 1, 3)))

    def test_from_tokens_round_trips_surfaces(self):
        doc = StyledText.from_tokens(["unter", "10", "Millionen"])
        assert doc.text == "unter 10 Millionen"
        assert doc.surfaces == ("unter", "10", "Millionen")

    def test_from_tokens_rejects_non_words(self):
        with pytest.raises(ValueError):
            StyledText.from_tokens(["ok", ""])
        with pytest.raises(ValueError):
            StyledText.from_tokens(["a b"])

    def test_styled_indices_filters_by_id(self):
        doc = StyledText.from_tokens(
            ["a", "b", "c", "d"],
            [
                StyleSpan(1, frozenset({BOLD}), 0, 2),
                StyleSpan(2, frozenset({ITALIC}), 3, 4),
            ],
        )
        assert doc.styled_indices() == {0, 1, 3}
        assert doc.styled_indices(2) == {3}
        assert doc.attrs_by_id == {1: frozenset({BOLD}), 2: frozenset({ITALIC})}


class TestRender:
    def test_numbered_tags_at_token_boundaries(self):
        doc = StyledText.from_text(
            "the number fell below 10 million.",
            [StyleSpan(1, frozenset({BOLD}), 2, 6)],
        )
        assert (
            render_tagged(doc, MarkupFormat.NUMBERED_TAGS)
            == "the number <S1>fell below 10 million</S1>."
        )

    def test_marker_lands_inside_punctuation_cluster(self):
        doc = StyledText.from_text("fiel.", [StyleSpan(1, frozenset({BOLD}), 0, 1)])
        assert render_tagged(doc, MarkupFormat.NUMBERED_TAGS) == "<S1>fiel</S1>."
        doc2 = StyledText.from_text("fiel.", [StyleSpan(1, frozenset({BOLD}), 0, 2)])
        assert render_tagged(doc2, MarkupFormat.NUMBERED_TAGS) == "<S1>fiel.</S1>"

    def test_delimiters_anonymous(self):
        doc = StyledText.from_text(
            "Der Clip ging viral.", [StyleSpan(1, frozenset({BOLD}), 2, 4)]
        )
        assert (
            render_tagged(doc, MarkupFormat.DELIMITERS)
            == "Der Clip ##start##ging viral##end##."
        )

    def test_delimiters_refuse_two_style_ids(self):
        doc = StyledText.from_tokens(
            ["a", "b", "c"],
            [
                StyleSpan(1, frozenset({BOLD}), 0, 1),
                StyleSpan(2, frozenset({ITALIC}), 2, 3),
            ],
        )
        with pytest.raises(MarkupOverlapError):
            render_tagged(doc, MarkupFormat.DELIMITERS)

    def test_extended_delimiters_carry_ids(self):
        doc = StyledText.from_tokens(
            ["a", "b", "c"],
            [
                StyleSpan(1, frozenset({BOLD}), 0, 1),
                StyleSpan(2, frozenset({ITALIC}), 2, 3),
            ],
        )
        out = render_tagged(doc, MarkupFormat.DELIMITERS, extended=True)
        assert out == "##start1##a##end1## b ##start2##c##end2##"

    def test_two_same_id_spans(self):
        doc = StyledText.from_tokens(
            ["Kristin", "Cavallari", "and", "Sarah"],
            [
                StyleSpan(1, frozenset({BOLD}), 0, 2),
                StyleSpan(1, frozenset({BOLD}), 3, 4),
            ],
        )
        assert (
            render_tagged(doc, MarkupFormat.NUMBERED_TAGS)
            == "<S1>Kristin Cavallari</S1> and <S1>Sarah</S1>"
        )

    def test_nested_spans_emit_proper_nesting(self):
        doc = StyledText.from_tokens(
            ["a", "b", "c", "d"],
            [
                StyleSpan(1, frozenset({BOLD}), 0, 4),
                StyleSpan(2, frozenset({ITALIC}), 1, 3),
            ],
        )
        out = render_tagged(doc, MarkupFormat.NUMBERED_TAGS)
        assert out == "<S1>a <S2>b c</S2> d</S1>"


class TestParse:
    def test_numbered_tags_happy_path(self):
        text = "Auch der Stellenabbau hat sich <S1>fast verfünffacht</S1>."
        doc, anomalies = parse_tagged(text, MarkupFormat.NUMBERED_TAGS)
        assert anomalies == []
        assert doc.text == "Auch der Stellenabbau hat sich fast verfünffacht."
        (span,) = doc.spans
        assert (span.start, span.end, span.style_id) == (5, 7, 1)
        assert span.attrs == DEFAULT_ATTRS

    def test_attrs_by_id_is_applied(self):
        attrs = {1: {ITALIC, LINK}}
        doc, anomalies = parse_tagged(
            "<S1>ging viral</S1>", MarkupFormat.NUMBERED_TAGS, attrs_by_id=attrs
        )
        assert anomalies == []
        assert doc.spans[0].attrs == frozenset({ITALIC, LINK})

    def test_unknown_id_falls_back_to_default_attrs(self):
        doc, anomalies = parse_tagged(
            "<S2>word</S2>", MarkupFormat.NUMBERED_TAGS, attrs_by_id={1: {ITALIC}}
        )
        assert doc.spans[0].attrs == DEFAULT_ATTRS
        assert [a.kind for a in anomalies] == [AnomalyKind.UNKNOWN_STYLE_ID]

    def test_no_mapping_given_means_no_unknown_id_anomaly(self):
        doc, anomalies = parse_tagged("<S2>word</S2>", MarkupFormat.NUMBERED_TAGS)
        assert anomalies == []
        assert doc.spans[0].style_id == 2

    def test_delimiters_whitespace_tolerant(self):
        text = "Stellen ##start## im Februar ##end## erstmals"
        doc, anomalies = parse_tagged(text, MarkupFormat.DELIMITERS)
        assert anomalies == []
        (span,) = doc.spans
        assert doc.surfaces[span.start : span.end] == ("im", "Februar")

    def test_extended_delimiters_always_parse(self):
        doc, anomalies = parse_tagged(
            "##start2##ging viral##end2##", MarkupFormat.DELIMITERS
        )
        assert anomalies == []
        assert doc.spans[0].style_id == 2

    def test_unclosed_tag_extends_to_end(self):
        doc, anomalies = parse_tagged("a <S1>b c", MarkupFormat.NUMBERED_TAGS)
        (span,) = doc.spans
        assert (span.start, span.end) == (1, 3)
        assert [a.kind for a in anomalies] == [AnomalyKind.UNCLOSED_TAG]
        assert anomalies[0].location == 2

    def test_close_for_never_opened_id_is_unknown_style_id(self):
        doc, anomalies = parse_tagged("a </S7> b", MarkupFormat.NUMBERED_TAGS)
        assert doc.spans == ()
        assert [a.kind for a in anomalies] == [AnomalyKind.UNKNOWN_STYLE_ID]

    def test_close_before_open_of_known_id_is_orphan(self):
        doc, anomalies = parse_tagged(
            "</S1> a <S1>b</S1>", MarkupFormat.NUMBERED_TAGS
        )
        assert [a.kind for a in anomalies] == [AnomalyKind.ORPHAN_CLOSE]
        (span,) = doc.spans
        assert doc.surfaces[span.start : span.end] == ("b",)

    def test_delimiter_orphan_close(self):
        doc, anomalies = parse_tagged("a ##end## b", MarkupFormat.DELIMITERS)
        assert doc.spans == ()
        assert [a.kind for a in anomalies] == [AnomalyKind.ORPHAN_CLOSE]

    def test_zero_style_id_is_rejected_per_marker(self):
        doc, anomalies = parse_tagged("<S0>x</S0>", MarkupFormat.NUMBERED_TAGS)
        assert doc.spans == ()
        assert [a.kind for a in anomalies] == [
            AnomalyKind.UNKNOWN_STYLE_ID,
            AnomalyKind.UNKNOWN_STYLE_ID,
        ]

    def test_empty_span_reported(self):
        doc, anomalies = parse_tagged("a ##start## ##end## b", MarkupFormat.DELIMITERS)
        assert doc.spans == ()
        assert [a.kind for a in anomalies] == [AnomalyKind.EMPTY_SPAN]

    def test_marker_inside_word_still_covers_that_token(self):
        doc, anomalies = parse_tagged("ver<S1>fünf</S1>facht", MarkupFormat.NUMBERED_TAGS)
        assert anomalies == []
        (span,) = doc.spans
        assert doc.surfaces[span.start : span.end] == ("verfünffacht",)

    def test_same_id_adjacent_spans_survive(self):
        text = "<S1>Kristin Cavallari</S1> und <S1>Sarah</S1>"
        doc, anomalies = parse_tagged(text, MarkupFormat.NUMBERED_TAGS)
        assert anomalies == []
        assert [(s.start, s.end) for s in doc.spans] == [(0, 2), (3, 4)]

    def test_anomalies_sorted_by_location(self):
        text = "a </S9> b <S1>c"
        _, anomalies = parse_tagged(text, MarkupFormat.NUMBERED_TAGS)
        locs = [a.location for a in anomalies]
        assert locs == sorted(locs)
        assert {a.kind for a in anomalies} == {
            AnomalyKind.UNKNOWN_STYLE_ID,
            AnomalyKind.UNCLOSED_TAG,
        }


class TestRoundTrip:
    WORDS = ["alpha", "beta", "gamma", "delta", "echo", "foxtrot", "golf", "hotel"]
    ATTR_CHOICES = [
        frozenset({BOLD}),
        frozenset({ITALIC}),
        frozenset({BOLD, ITALIC}),
        frozenset({LINK}),
        frozenset({StyleAttr(StyleKind.HIGHLIGHT)}),
    ]

    @staticmethod
    def _spans_for_id(draw, style_id: int, attrs, n: int) -> list[StyleSpan]:
        cuts = draw(
            st.lists(st.integers(0, n), min_size=0, max_size=4, unique=True).map(sorted)
        )
        spans = []
        for a, b in zip(cuts[::2], cuts[1::2]):
            if a < b:
                spans.append(StyleSpan(style_id, attrs, a, b))
        return spans

    @given(st.data())
    def test_numbered_tags_round_trip(self, data):
        words = data.draw(st.lists(st.sampled_from(self.WORDS), min_size=1, max_size=10))
        spans: list[StyleSpan] = []
        for sid in range(1, data.draw(st.integers(0, 3)) + 1):
            attrs = data.draw(st.sampled_from(self.ATTR_CHOICES))
            spans.extend(self._spans_for_id(data.draw, sid, attrs, len(words)))
        doc = StyledText.from_tokens(words, spans)
        wire = render_tagged(doc, MarkupFormat.NUMBERED_TAGS)
        parsed, anomalies = parse_tagged(
            wire, MarkupFormat.NUMBERED_TAGS, attrs_by_id=doc.attrs_by_id
        )
        assert anomalies == []
        assert parsed.surfaces == doc.surfaces
        assert set(parsed.spans) == set(doc.spans)

    @given(st.data())
    def test_extended_delimiters_round_trip(self, data):
        words = data.draw(st.lists(st.sampled_from(self.WORDS), min_size=1, max_size=10))
        spans: list[StyleSpan] = []
        for sid in range(1, data.draw(st.integers(0, 3)) + 1):
            attrs = data.draw(st.sampled_from(self.ATTR_CHOICES))
            spans.extend(self._spans_for_id(data.draw, sid, attrs, len(words)))
        doc = StyledText.from_tokens(words, spans)
        wire = render_tagged(doc, MarkupFormat.DELIMITERS, extended=True)
        parsed, anomalies = parse_tagged(
            wire, MarkupFormat.DELIMITERS, attrs_by_id=doc.attrs_by_id
        )
        assert anomalies == []
        assert parsed.surfaces == doc.surfaces
        assert set(parsed.spans) == set(doc.spans)

    def test_same_id_overlap_preserves_token_union(self):
        doc = StyledText.from_tokens(
            ["a", "b", "c", "d", "e"],
            [
                StyleSpan(1, frozenset({BOLD}), 0, 3),
                StyleSpan(1, frozenset({BOLD}), 2, 5),
            ],
        )
        wire = render_tagged(doc, MarkupFormat.NUMBERED_TAGS)
        parsed, _ = parse_tagged(wire, MarkupFormat.NUMBERED_TAGS, attrs_by_id=doc.attrs_by_id)
        assert parsed.styled_indices(1) == doc.styled_indices(1)


class TestHelpers:
    def test_contiguous_runs(self):
        assert contiguous_runs([3, 1, 2, 7, 8]) == [(1, 4), (7, 9)]
        assert contiguous_runs([]) == []
        assert contiguous_runs([5, 5, 5]) == [(5, 6)]

    def test_spans_from_indices(self):
        spans = spans_from_indices(
            {1: [0, 1, 4], 2: [2]},
            {1: {BOLD}, 2: {ITALIC}},
        )
        assert [(s.style_id, s.start, s.end) for s in spans] == [
            (1, 0, 2),
            (2, 2, 3),
            (1, 4, 5),
        ]

    def test_json_round_trip(self):
        doc = StyledText.from_text(
            "Der Clip ging viral.",
            [StyleSpan(1, frozenset({BOLD, LINK}), 2, 4)],
        )
        data = styled_text_to_json(doc)
        again = styled_text_from_json(data)
        assert again == doc
        # attrs serialize sorted and stable
        assert data["spans"][0]["attrs"][0]["kind"] == "bold"
        assert data["spans"][0]["attrs"][1]["payload"] == "https://example.com/x"
