"""Document/attribute data model and text segmentation primitives.

All span offsets throughout the toolkit are UTF-8 *byte* offsets into the
document text. Byte offsets are cheapest for slicing and unambiguous across
languages; every tagger emits spans on codepoint boundaries, so slicing the
encoded text at span edges always yields valid UTF-8.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator


@dataclass(frozen=True)
class AttributeSpan:
    """A scored character range: [start, end) in UTF-8 byte offsets."""

    start: int
    end: int
    score: float

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span [{self.start}, {self.end})")
        if self.score != self.score or self.score in (float("inf"), float("-inf")):
            raise ValueError(f"span score must be finite, got {self.score}")


@dataclass
class Document:
    """One text record; the unit flowing through every pipeline stage.

    ``metadata`` is a flat string-keyed map of JSON scalars (URL, file
    extension, vote count, subreddit, ...). Unknown top-level fields from
    serialized records are preserved opaquely in ``extra``.
    """

    id: str
    text: str
    source: str = ""
    created: str | None = None
    metadata: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")

    @property
    def text_bytes(self) -> bytes:
        return self.text.encode("utf-8")


@dataclass
class DocumentAttributes:
    """Tagger outputs for one document, stored beside (not inside) it.

    Attribute names follow the ``<tagger>__<rule>`` convention; span lists
    are kept sorted by start and non-overlapping within one attribute name.
    """

    id: str
    attributes: dict[str, list[AttributeSpan]] = field(default_factory=dict)

    def merge(self, other: "DocumentAttributes") -> None:
        if other.id != self.id:
            raise ValueError(f"attribute id mismatch: {self.id!r} vs {other.id!r}")
        for name, spans in other.attributes.items():
            if name in self.attributes:
                raise ValueError(f"duplicate attribute name {name!r} for doc {self.id!r}")
            self.attributes[name] = spans


@dataclass
class CorpusStats:
    utf8_bytes: int = 0
    documents: int = 0
    unicode_words: int = 0

    def add(self, doc: Document) -> None:
        self.utf8_bytes += len(doc.text_bytes)
        self.documents += 1
        self.unicode_words += count_words(doc.text, mode="unicode")


def char_spans_to_byte_spans(
    text: str, spans: Iterable[tuple[int, int, float]]
) -> list[AttributeSpan]:
    """Convert (start, end, score) codepoint spans to byte-offset spans.

    Spans must be sorted by start; this walks the text once.
    """
    encoded_len = len(text.encode("utf-8"))
    if encoded_len == len(text):  # pure ASCII: byte offset == char offset
        return [AttributeSpan(s, e, score) for s, e, score in spans]
    out = []
    char_pos = 0
    byte_pos = 0
    for s, e, score in spans:
        if s < char_pos:
            raise ValueError("char spans must be sorted and non-overlapping")
        byte_pos += len(text[char_pos:s].encode("utf-8"))
        byte_start = byte_pos
        byte_pos += len(text[s:e].encode("utf-8"))
        char_pos = e
        out.append(AttributeSpan(byte_start, byte_pos, score))
    return out


def segment_paragraphs(text: str) -> list[AttributeSpan]:
    """Split text into paragraph spans at newline boundaries.

    A paragraph is a span of text ending in a newline; the trailing newline
    is excluded from the span. Empty paragraphs produce empty spans (they
    participate in deduplication like any other paragraph). Offsets are byte
    offsets; "" yields a single empty span.
    """
    data = text.encode("utf-8")
    spans = []
    start = 0
    while True:
        idx = data.find(b"\n", start)
        if idx < 0:
            spans.append(AttributeSpan(start, len(data), 1.0))
            return spans
        spans.append(AttributeSpan(start, idx, 1.0))
        start = idx + 1


def paragraph_texts(text: str) -> list[str]:
    return text.split("\n")


# UAX #29-style word segmentation, reduced to a documented rule set:
# word characters are letters, decimal digits, and connector punctuation;
# combining marks extend a started word; a single mid-letter character
# between two letters (or mid-number character between two digits) does
# not break the word. Only segments containing a letter or digit count.
_MID_LETTER = {"'", "’", "·", "."}
_MID_NUM = {".", ","}


def _char_class(ch: str) -> str:
    cat = unicodedata.category(ch)
    if cat[0] == "L":
        return "letter"
    if cat == "Nd":
        return "digit"
    if cat == "Pc":
        return "connector"
    if cat[0] == "M":
        return "mark"
    return "other"


def _unicode_word_char_spans(text: str) -> Iterator[tuple[int, int]]:
    n = len(text)
    i = 0
    while i < n:
        cls = _char_class(text[i])
        if cls not in ("letter", "digit", "connector"):
            i += 1
            continue
        start = i
        has_alnum = cls in ("letter", "digit")
        i += 1
        while i < n:
            cls = _char_class(text[i])
            if cls in ("letter", "digit"):
                has_alnum = True
                i += 1
            elif cls in ("connector", "mark"):
                i += 1
            elif (
                i + 1 < n
                and text[i] in _MID_LETTER
                and _char_class(text[i - 1]) == "letter"
                and _char_class(text[i + 1]) == "letter"
            ):
                i += 1
            elif (
                i + 1 < n
                and text[i] in _MID_NUM
                and _char_class(text[i - 1]) == "digit"
                and _char_class(text[i + 1]) == "digit"
            ):
                i += 1
            else:
                break
        if has_alnum:
            yield start, i


def _whitespace_word_char_spans(text: str) -> Iterator[tuple[int, int]]:
    n = len(text)
    i = 0
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        start = i
        while i < n and not text[i].isspace():
            i += 1
        yield start, i


def segment_words(text: str, mode: str = "unicode") -> list[AttributeSpan]:
    """Return word spans (byte offsets, score 1.0).

    ``unicode`` mode counts word-like segments per the rule set documented
    above; ``whitespace`` mode splits on runs of whitespace.
    """
    if mode == "unicode":
        char_spans = _unicode_word_char_spans(text)
    elif mode == "whitespace":
        char_spans = _whitespace_word_char_spans(text)
    else:
        raise ValueError(f"unknown segmentation mode {mode!r}")
    return char_spans_to_byte_spans(text, ((s, e, 1.0) for s, e in char_spans))


def count_words(text: str, mode: str = "unicode") -> int:
    if mode == "unicode":
        return sum(1 for _ in _unicode_word_char_spans(text))
    if mode == "whitespace":
        return sum(1 for _ in _whitespace_word_char_spans(text))
    raise ValueError(f"unknown segmentation mode {mode!r}")


def count_stats(docs: Iterable[Document]) -> CorpusStats:
    """Sum UTF-8 byte length, document count, and unicode word count."""
    stats = CorpusStats()
    for doc in docs:
        stats.add(doc)
    return stats
