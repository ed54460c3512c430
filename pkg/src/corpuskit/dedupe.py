"""Exact deduplication stages and test-set decontamination.

Three stages, run in pipeline order: URL, whole-document, and paragraph
dedup. The first occurrence of a key in stream order is kept; later ones
are flagged. Grouped paragraph dedup partitions consecutive shards into
byte-capped groups and dedupes within each group independently.
Decontamination seeds a filter with evaluation-set paragraphs and flags
any document sharing one.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Protocol
from urllib.parse import urlsplit, urlunsplit

from corpuskit.documents import (
    AttributeSpan,
    Document,
    DocumentAttributes,
    count_words,
    segment_paragraphs,
)
from corpuskit.shard_io import read_documents

logger = logging.getLogger(__name__)

URL_DUPLICATE = "dedupe__url_duplicate"
DOC_DUPLICATE = "dedupe__doc_duplicate"
PARAGRAPH_DUPLICATE = "dedupe__dup_paragraph"
CONTAMINATED = "decontamination__contaminated"

DECONTAMINATION_MIN_TOKENS = 13
CCNET_MAX_GROUP_BYTES = 20 * 2**30
CCNET_DIGEST = "sha1"


class KeyFilter(Protocol):
    read_only: bool

    def insert_check(self, key: bytes) -> bool: ...

    def contains(self, key: bytes) -> bool: ...


@dataclass
class DedupeStageConfig:
    stage: str  # url | document | paragraph
    min_paragraph_tokens: int = 0  # 0 disables the gate (empty paragraphs included)
    read_only: bool = False

    def __post_init__(self) -> None:
        if self.stage not in ("url", "document", "paragraph"):
            raise ValueError(f"unknown dedupe stage {self.stage!r}")
        if self.min_paragraph_tokens < 0:
            raise ValueError("min_paragraph_tokens must be >= 0")


@dataclass
class DedupeCounters:
    documents: int = 0
    flagged: int = 0
    missing_url: int = 0
    flagged_paragraphs: int = 0
    reasons: dict = field(default_factory=dict)


def normalize_url(url: str) -> str:
    """Lowercase scheme and host, strip the fragment and any trailing slash."""
    parts = urlsplit(url.strip())
    path = parts.path.rstrip("/")
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, parts.query, ""))


def dedupe_by_url(
    docs: Iterable[Document],
    backend: KeyFilter,
    counters: DedupeCounters | None = None,
) -> Iterator[tuple[Document, DocumentAttributes]]:
    """Flag documents whose normalized URL was already seen.

    Documents without a URL pass through with a warning counter.
    """
    counters = counters if counters is not None else DedupeCounters()
    for doc in docs:
        counters.documents += 1
        attrs = DocumentAttributes(id=doc.id)
        url = doc.metadata.get("url")
        if url is None:
            counters.missing_url += 1
        else:
            key = normalize_url(str(url)).encode("utf-8")
            if backend.insert_check(key):
                counters.flagged += 1
                attrs.attributes[URL_DUPLICATE] = [
                    AttributeSpan(0, len(doc.text_bytes), 1.0)
                ]
        yield doc, attrs


def dedupe_by_document(
    docs: Iterable[Document],
    backend: KeyFilter,
    counters: DedupeCounters | None = None,
) -> Iterator[tuple[Document, DocumentAttributes]]:
    """Flag exact text duplicates; the key is the raw text bytes, so empty
    documents share a key and count as duplicates of each other."""
    counters = counters if counters is not None else DedupeCounters()
    for doc in docs:
        counters.documents += 1
        attrs = DocumentAttributes(id=doc.id)
        if backend.insert_check(doc.text_bytes):
            counters.flagged += 1
            attrs.attributes[DOC_DUPLICATE] = [AttributeSpan(0, len(doc.text_bytes), 1.0)]
        yield doc, attrs


def _gated_paragraphs(doc: Document, min_tokens: int):
    data = doc.text_bytes
    for span in segment_paragraphs(doc.text):
        para = data[span.start : span.end]
        if min_tokens > 0 and count_words(para.decode("utf-8"), "unicode") <= min_tokens:
            continue
        yield span, para


def dedupe_by_paragraph(
    docs: Iterable[Document],
    backend: KeyFilter,
    counters: DedupeCounters | None = None,
    min_paragraph_tokens: int = 0,
) -> Iterator[tuple[Document, DocumentAttributes]]:
    """Flag repeat paragraphs anywhere in the stream, empty ones included."""
    counters = counters if counters is not None else DedupeCounters()
    for doc in docs:
        counters.documents += 1
        attrs = DocumentAttributes(id=doc.id)
        spans = []
        for span, para in _gated_paragraphs(doc, min_paragraph_tokens):
            if backend.insert_check(para):
                spans.append(AttributeSpan(span.start, span.end, 1.0))
        if spans:
            counters.flagged += 1
            counters.flagged_paragraphs += len(spans)
            attrs.attributes[PARAGRAPH_DUPLICATE] = spans
        yield doc, attrs


def plan_shard_groups(
    paths: list[str | os.PathLike], max_group_bytes: int = CCNET_MAX_GROUP_BYTES
) -> list[list[Path]]:
    """Partition consecutive shards into groups of bounded cumulative size.

    A single shard over the cap becomes its own group (with a warning).
    """
    groups: list[list[Path]] = []
    current: list[Path] = []
    current_bytes = 0
    for raw in paths:
        path = Path(raw)
        size = path.stat().st_size
        if size > max_group_bytes:
            logger.warning("shard %s (%d bytes) exceeds the %d-byte group cap", path, size, max_group_bytes)
        if current and current_bytes + size > max_group_bytes:
            groups.append(current)
            current = []
            current_bytes = 0
        current.append(path)
        current_bytes += size
    if current:
        groups.append(current)
    return groups


def ccnet_group_dedupe(
    shard_paths: list[str | os.PathLike],
    max_group_bytes: int = CCNET_MAX_GROUP_BYTES,
) -> Iterator[tuple[Path, list[DocumentAttributes]]]:
    """Exact paragraph dedup within consecutive byte-capped shard groups.

    Paragraphs are compared by content digest (sha1); duplicates across
    different groups are deliberately not flagged.
    """
    for group in plan_shard_groups(shard_paths, max_group_bytes):
        seen: set[bytes] = set()
        for path in group:
            records: list[DocumentAttributes] = []
            for doc in read_documents(path):
                attrs = DocumentAttributes(id=doc.id)
                spans = []
                data = doc.text_bytes
                for span in segment_paragraphs(doc.text):
                    digest = hashlib.sha1(data[span.start : span.end]).digest()
                    if digest in seen:
                        spans.append(AttributeSpan(span.start, span.end, 1.0))
                    else:
                        seen.add(digest)
                if spans:
                    attrs.attributes[PARAGRAPH_DUPLICATE] = spans
                records.append(attrs)
            yield path, records


def decontaminate_seed(
    filt: KeyFilter,
    test_docs: Iterable[Document],
    min_paragraph_tokens: int = DECONTAMINATION_MIN_TOKENS,
) -> KeyFilter:
    """Insert every test-set paragraph longer than the token gate, then
    freeze the filter read-only."""
    if filt.read_only:
        raise ValueError("decontamination seeding needs a mutable filter")
    for doc in test_docs:
        for _, para in _gated_paragraphs(doc, min_paragraph_tokens):
            filt.insert_check(para)
    return filt.freeze()


def decontaminate_tag(
    docs: Iterable[Document],
    seeded: KeyFilter,
    counters: DedupeCounters | None = None,
    min_paragraph_tokens: int = DECONTAMINATION_MIN_TOKENS,
) -> Iterator[tuple[Document, DocumentAttributes]]:
    """Flag documents with at least one seeded paragraph (same token gate)."""
    if not seeded.read_only:
        raise ValueError("decontamination tagging requires a read-only (seeded) filter")
    counters = counters if counters is not None else DedupeCounters()
    for doc in docs:
        counters.documents += 1
        attrs = DocumentAttributes(id=doc.id)
        contaminated = any(
            seeded.contains(para) for _, para in _gated_paragraphs(doc, min_paragraph_tokens)
        )
        if contaminated:
            counters.flagged += 1
            attrs.attributes[CONTAMINATED] = [AttributeSpan(0, len(doc.text_bytes), 1.0)]
        yield doc, attrs
