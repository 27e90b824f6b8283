"""Styled-text model, tokenization, and the inline markup wire formats.

The canonical document model is :class:`StyledText`: plain text, word-level
tokens with character offsets, and style spans over token ranges.  Two wire
formats carry spans inline through translation backends: numbered tags
(``<S1>...</S1>``) and anonymous delimiters (``##start##...##end##``).
Parsing is tolerant: malformed markup is recovered and reported as
:class:`ParseAnomaly` records instead of raising.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Iterable, Mapping, NamedTuple, Sequence


class StyleKind(Enum):
    BOLD = "bold"
    ITALIC = "italic"
    UNDERLINE = "underline"
    HIGHLIGHT = "highlight"
    HYPERLINK = "hyperlink"
    COLOR = "color"
    FONT = "font"


# Kinds whose meaning depends on a payload (target URL, color value, font name).
PAYLOAD_KINDS = frozenset({StyleKind.HYPERLINK, StyleKind.COLOR, StyleKind.FONT})


@dataclass(frozen=True)
class StyleAttr:
    """One typographic attribute, with a payload where the kind requires it."""

    kind: StyleKind
    payload: str | None = None

    def __post_init__(self) -> None:
        if self.kind in PAYLOAD_KINDS:
            if not self.payload:
                raise ValueError(f"{self.kind.value} attribute requires a payload")
        elif self.payload is not None:
            raise ValueError(f"{self.kind.value} attribute carries no payload")


class Token(NamedTuple):
    surface: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class StyleSpan:
    """A run of styled tokens, addressed as a half-open token range."""

    style_id: int
    attrs: frozenset[StyleAttr]
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.style_id < 1:
            raise ValueError(f"style_id must be >= 1, got {self.style_id}")
        if not self.attrs:
            raise ValueError("a span must carry at least one attribute")
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span range [{self.start}, {self.end})")
        if not isinstance(self.attrs, frozenset):
            object.__setattr__(self, "attrs", frozenset(self.attrs))

    @property
    def token_indices(self) -> range:
        return range(self.start, self.end)


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


_CHUNK_RE = re.compile(r"\S+")


def tokenize(text: str) -> tuple[Token, ...]:
    """Split on Unicode whitespace, detaching edge punctuation as tokens.

    Leading and trailing punctuation characters of each whitespace-delimited
    chunk become standalone tokens; internal punctuation (hyphens,
    apostrophes) stays attached.  Offsets are faithful:
    ``text[tok.char_start:tok.char_end] == tok.surface``.
    """
    tokens: list[Token] = []
    for m in _CHUNK_RE.finditer(text):
        chunk, base = m.group(), m.start()
        left, right = 0, len(chunk)
        trailing: list[Token] = []
        while left < right and _is_punct(chunk[left]):
            tokens.append(Token(chunk[left], base + left, base + left + 1))
            left += 1
        while right > left and _is_punct(chunk[right - 1]):
            trailing.append(Token(chunk[right - 1], base + right - 1, base + right))
            right -= 1
        if left < right:
            tokens.append(Token(chunk[left:right], base + left, base + right))
        tokens.extend(reversed(trailing))
    return tuple(tokens)


@dataclass(frozen=True)
class StyledText:
    """Plain text plus offset-faithful tokens and style spans over them."""

    text: str
    tokens: tuple[Token, ...]
    spans: tuple[StyleSpan, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "spans", tuple(self.spans))
        prev_end = 0
        for tok in self.tokens:
            if not 0 <= tok.char_start < tok.char_end <= len(self.text):
                raise ValueError(f"token offsets out of range: {tok}")
            if tok.char_start < prev_end:
                raise ValueError(f"tokens overlap or are out of order at {tok}")
            if self.text[tok.char_start : tok.char_end] != tok.surface:
                raise ValueError(f"token surface does not match text slice: {tok}")
            prev_end = tok.char_end
        attrs_seen: dict[int, frozenset[StyleAttr]] = {}
        for span in self.spans:
            if span.end > len(self.tokens):
                raise ValueError(f"span {span} exceeds token count {len(self.tokens)}")
            prior = attrs_seen.setdefault(span.style_id, span.attrs)
            if prior != span.attrs:
                raise ValueError(f"style_id {span.style_id} used with differing attrs")

    @classmethod
    def from_text(cls, text: str, spans: Iterable[StyleSpan] = ()) -> StyledText:
        return cls(text, tokenize(text), tuple(spans))

    @classmethod
    def from_tokens(cls, words: Sequence[str], spans: Iterable[StyleSpan] = ()) -> StyledText:
        """Build a document from bare word surfaces, joined by single spaces."""
        toks: list[Token] = []
        pos = 0
        for word in words:
            if not word or word != word.strip() or any(ch.isspace() for ch in word):
                raise ValueError(f"not a valid token surface: {word!r}")
            toks.append(Token(word, pos, pos + len(word)))
            pos += len(word) + 1
        return cls(" ".join(words), tuple(toks), tuple(spans))

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(tok.surface for tok in self.tokens)

    @property
    def attrs_by_id(self) -> dict[int, frozenset[StyleAttr]]:
        return {span.style_id: span.attrs for span in self.spans}

    def styled_indices(self, style_id: int | None = None) -> set[int]:
        """Token indices covered by spans (optionally of one style only)."""
        out: set[int] = set()
        for span in self.spans:
            if style_id is None or span.style_id == style_id:
                out.update(span.token_indices)
        return out


class MarkupFormat(Enum):
    NUMBERED_TAGS = "numbered_tags"
    DELIMITERS = "delimiters"


class AnomalyKind(Enum):
    UNCLOSED_TAG = "unclosed_tag"
    ORPHAN_CLOSE = "orphan_close"
    UNKNOWN_STYLE_ID = "unknown_style_id"
    EMPTY_SPAN = "empty_span"


@dataclass(frozen=True)
class ParseAnomaly:
    """One recovered markup defect; ``location`` is a char offset in the input."""

    kind: AnomalyKind
    location: int
    detail: str


class MarkupOverlapError(ValueError):
    """Raised when spans cannot be carried by the requested wire format."""


DEFAULT_ATTRS = frozenset({StyleAttr(StyleKind.BOLD)})

_TAG_RE = re.compile(r"<(/?)S(\d+)>")
_DELIM_RE = re.compile(r"##(start|end)(\d*)##")


class _Event(NamedTuple):
    plain_pos: int
    input_offset: int
    is_close: bool
    style_id: int


def _scan_markup(text: str, fmt: MarkupFormat) -> tuple[str, list[_Event]]:
    regex = _TAG_RE if fmt is MarkupFormat.NUMBERED_TAGS else _DELIM_RE
    parts: list[str] = []
    events: list[_Event] = []
    plain_len = 0
    last = 0
    for m in regex.finditer(text):
        seg = text[last : m.start()]
        parts.append(seg)
        plain_len += len(seg)
        if fmt is MarkupFormat.NUMBERED_TAGS:
            is_close = m.group(1) == "/"
            style_id = int(m.group(2))
        else:
            is_close = m.group(1) == "end"
            style_id = int(m.group(2)) if m.group(2) else 1
        events.append(_Event(plain_len, m.start(), is_close, style_id))
        last = m.end()
    parts.append(text[last:])
    return "".join(parts), events


def parse_tagged(
    text: str,
    fmt: MarkupFormat,
    attrs_by_id: Mapping[int, AbstractSet[StyleAttr]] | None = None,
    default_attrs: frozenset[StyleAttr] = DEFAULT_ATTRS,
) -> tuple[StyledText, list[ParseAnomaly]]:
    """Strip inline markup and recover spans, reporting defects as anomalies.

    Args:
        text: wire text possibly containing markup of the given format.
        fmt: which wire format to look for.
        attrs_by_id: known attribute sets per style id; ids outside the
            mapping get ``default_attrs`` plus an ``unknown_style_id`` anomaly.
        default_attrs: attrs used when no mapping entry applies.

    Recovery rules: an unclosed opener extends its span to the end of the
    text; a close without a matching open is ignored.  Both are reported.
    """
    plain, events = _scan_markup(text, fmt)
    anomalies: list[ParseAnomaly] = []
    opened_ids = {ev.style_id for ev in events if not ev.is_close and ev.style_id >= 1}
    stacks: dict[int, list[_Event]] = {}
    # (plain_start, plain_end, style_id, anchor input offset)
    ranges: list[tuple[int, int, int, int]] = []

    for ev in events:
        if ev.style_id < 1:
            anomalies.append(
                ParseAnomaly(
                    AnomalyKind.UNKNOWN_STYLE_ID,
                    ev.input_offset,
                    f"style id {ev.style_id} is out of range",
                )
            )
            continue
        if not ev.is_close:
            stacks.setdefault(ev.style_id, []).append(ev)
            continue
        stack = stacks.get(ev.style_id)
        if stack:
            op = stack.pop()
            ranges.append((op.plain_pos, ev.plain_pos, ev.style_id, op.input_offset))
        elif fmt is MarkupFormat.NUMBERED_TAGS and ev.style_id not in opened_ids:
            anomalies.append(
                ParseAnomaly(
                    AnomalyKind.UNKNOWN_STYLE_ID,
                    ev.input_offset,
                    f"close tag for style {ev.style_id}, which is never opened",
                )
            )
        else:
            anomalies.append(
                ParseAnomaly(
                    AnomalyKind.ORPHAN_CLOSE,
                    ev.input_offset,
                    f"close marker for style {ev.style_id} has no matching open",
                )
            )

    for style_id in sorted(stacks):
        for op in stacks[style_id]:
            anomalies.append(
                ParseAnomaly(
                    AnomalyKind.UNCLOSED_TAG,
                    op.input_offset,
                    f"open marker for style {style_id} is never closed; span extended to end",
                )
            )
            ranges.append((op.plain_pos, len(plain), style_id, op.input_offset))

    tokens = tokenize(plain)

    resolved: dict[int, frozenset[StyleAttr]] = {}
    for style_id in sorted({sid for _, _, sid, _ in ranges}):
        if attrs_by_id is not None and style_id in attrs_by_id:
            resolved[style_id] = frozenset(attrs_by_id[style_id])
        else:
            resolved[style_id] = default_attrs
            if attrs_by_id is not None:
                anchor = min(a for _, _, sid, a in ranges if sid == style_id)
                anomalies.append(
                    ParseAnomaly(
                        AnomalyKind.UNKNOWN_STYLE_ID,
                        anchor,
                        f"style id {style_id} has no known attributes",
                    )
                )

    spans: list[StyleSpan] = []
    for r_start, r_end, style_id, anchor in ranges:
        hit = [
            i
            for i, tok in enumerate(tokens)
            if tok.char_start < r_end and tok.char_end > r_start
        ]
        if not hit:
            anomalies.append(
                ParseAnomaly(
                    AnomalyKind.EMPTY_SPAN,
                    anchor,
                    f"span for style {style_id} covers no tokens",
                )
            )
            continue
        spans.append(StyleSpan(style_id, resolved[style_id], hit[0], hit[-1] + 1))

    spans.sort(key=lambda s: (s.start, s.end, s.style_id))
    anomalies.sort(key=lambda a: (a.location, a.kind.value))
    return StyledText(plain, tokens, tuple(spans)), anomalies


def render_tagged(doc: StyledText, fmt: MarkupFormat, extended: bool = False) -> str:
    """Serialize a document to wire text with inline markup.

    Markers are inserted at token boundaries, never inside a token surface.
    The delimiter format carries no style identity, so it refuses documents
    with more than one distinct style id unless ``extended`` numbering
    (``##start1##``) is enabled.
    """
    if fmt is MarkupFormat.DELIMITERS:
        ids = {span.style_id for span in doc.spans}
        if len(ids) > 1 and not extended:
            raise MarkupOverlapError(
                f"delimiter format cannot carry {len(ids)} distinct styles; "
                "use numbered tags or extended delimiters"
            )
        if extended:
            markers = {
                sid: (f"##start{sid}##", f"##end{sid}##") for sid in ids
            }
        else:
            markers = {sid: ("##start##", "##end##") for sid in ids}
    else:
        markers = {
            span.style_id: (f"<S{span.style_id}>", f"</S{span.style_id}>")
            for span in doc.spans
        }

    # (char position, 0=close/1=open, nesting tiebreak, marker text)
    insertions: list[tuple[int, int, tuple[int, int], str]] = []
    for span in doc.spans:
        open_marker, close_marker = markers[span.style_id]
        open_pos = doc.tokens[span.start].char_start
        close_pos = doc.tokens[span.end - 1].char_end
        insertions.append((open_pos, 1, (-span.end, span.style_id), open_marker))
        insertions.append((close_pos, 0, (-span.start, span.style_id), close_marker))
    insertions.sort(key=lambda item: item[:3])

    out: list[str] = []
    last = 0
    for pos, _, _, marker in insertions:
        out.append(doc.text[last:pos])
        out.append(marker)
        last = pos
    out.append(doc.text[last:])
    return "".join(out)


def contiguous_runs(indices: Iterable[int]) -> list[tuple[int, int]]:
    """Group token indices into maximal half-open runs, ascending."""
    runs: list[tuple[int, int]] = []
    for i in sorted(set(indices)):
        if runs and runs[-1][1] == i:
            runs[-1] = (runs[-1][0], i + 1)
        else:
            runs.append((i, i + 1))
    return runs


def spans_from_indices(
    indices_by_id: Mapping[int, Iterable[int]],
    attrs_by_id: Mapping[int, AbstractSet[StyleAttr]],
) -> tuple[StyleSpan, ...]:
    """Build maximal contiguous spans per style id from raw token indices."""
    spans: list[StyleSpan] = []
    for style_id in sorted(indices_by_id):
        attrs = frozenset(attrs_by_id[style_id])
        for start, end in contiguous_runs(indices_by_id[style_id]):
            spans.append(StyleSpan(style_id, attrs, start, end))
    spans.sort(key=lambda s: (s.start, s.end, s.style_id))
    return tuple(spans)


def style_attr_to_json(attr: StyleAttr) -> dict:
    data: dict = {"kind": attr.kind.value}
    if attr.payload is not None:
        data["payload"] = attr.payload
    return data


def style_attr_from_json(data: Mapping) -> StyleAttr:
    return StyleAttr(StyleKind(data["kind"]), data.get("payload"))


def styled_text_to_json(doc: StyledText) -> dict:
    """Canonical JSON form: text plus spans; tokens are derived on load."""
    return {
        "text": doc.text,
        "spans": [
            {
                "style_id": span.style_id,
                "attrs": [style_attr_to_json(a) for a in sorted(span.attrs, key=lambda a: (a.kind.value, a.payload or ""))],
                "token_range": [span.start, span.end],
            }
            for span in doc.spans
        ],
    }


def styled_text_from_json(data: Mapping) -> StyledText:
    spans = []
    for item in data.get("spans", ()):
        start, end = item["token_range"]
        spans.append(
            StyleSpan(
                item["style_id"],
                frozenset(style_attr_from_json(a) for a in item["attrs"]),
                start,
                end,
            )
        )
    return StyledText.from_text(data["text"], spans)
