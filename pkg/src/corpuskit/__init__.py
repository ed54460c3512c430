"""corpuskit: tag, filter, deduplicate, decontaminate, and mix text corpora.

Documents flow through the toolkit as newline-delimited JSON shards.
Taggers annotate documents with named, scored character spans stored in
sidecar attribute shards; the mixer consumes documents plus attributes and
applies drop/remove/replace policies, sampling, and source mixing.
"""

from corpuskit.documents import (
    AttributeSpan,
    CorpusStats,
    Document,
    DocumentAttributes,
    count_stats,
    segment_paragraphs,
    segment_words,
)
from corpuskit.shard_io import (
    read_attributes,
    read_documents,
    write_attributes,
    write_documents,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeSpan",
    "CorpusStats",
    "Document",
    "DocumentAttributes",
    "count_stats",
    "segment_paragraphs",
    "segment_words",
    "read_attributes",
    "read_documents",
    "write_attributes",
    "write_documents",
]
