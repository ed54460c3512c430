"""Newline-delimited JSON shard I/O for documents and attribute sidecars.

One JSON object per line. Gzip is detected on read by magic bytes (robust
to renamed shards) and selected on write by a ``.gz`` suffix. Gzip members
are written with mtime pinned to 0 so identical content always produces
identical bytes.
"""

from __future__ import annotations

import gzip
import io
import json
import os
from pathlib import Path
from typing import Iterable, Iterator

from corpuskit.documents import AttributeSpan, Document, DocumentAttributes

_GZIP_MAGIC = b"\x1f\x8b"

_DOC_FIELDS = ("id", "text", "source", "created", "metadata")


class MalformedRecordError(ValueError):
    def __init__(self, path: str | os.PathLike, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason


def open_shard_read(path: str | os.PathLike) -> io.TextIOBase:
    f = open(path, "rb")
    magic = f.read(2)
    f.seek(0)
    if magic == _GZIP_MAGIC:
        return io.TextIOWrapper(gzip.GzipFile(fileobj=f, mode="rb"), encoding="utf-8")
    return io.TextIOWrapper(f, encoding="utf-8")


def open_shard_write(path: str | os.PathLike) -> io.TextIOBase:
    raw = open(path, "wb")
    if str(path).endswith(".gz"):
        return io.TextIOWrapper(
            gzip.GzipFile(filename="", fileobj=raw, mode="wb", mtime=0),
            encoding="utf-8",
        )
    return io.TextIOWrapper(raw, encoding="utf-8")


def _doc_from_obj(obj: dict) -> Document:
    return Document(
        id=obj["id"],
        text=obj.get("text", ""),
        source=obj.get("source", ""),
        created=obj.get("created"),
        metadata=obj.get("metadata", {}),
        extra={k: v for k, v in obj.items() if k not in _DOC_FIELDS},
    )


def _doc_to_obj(doc: Document) -> dict:
    # Field order is normalized on write: known fields first, extras sorted.
    obj: dict = {"id": doc.id, "text": doc.text, "source": doc.source}
    if doc.created is not None:
        obj["created"] = doc.created
    if doc.metadata:
        obj["metadata"] = doc.metadata
    for key in sorted(doc.extra):
        obj[key] = doc.extra[key]
    return obj


def document_to_line(doc: Document) -> str:
    """Serialize one document to its canonical JSON line (no newline)."""
    return json.dumps(_doc_to_obj(doc), ensure_ascii=False)


def read_documents(
    path: str | os.PathLike,
    malformed: str = "error",
    errors: list | None = None,
) -> Iterator[Document]:
    """Yield documents in file order.

    ``malformed="error"`` raises :class:`MalformedRecordError` with the line
    number; ``malformed="skip"`` skips bad lines, appending
    ``(line_no, reason)`` to ``errors`` when a sink list is given.
    """
    if malformed not in ("error", "skip"):
        raise ValueError(f"malformed must be 'error' or 'skip', got {malformed!r}")
    with open_shard_read(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                doc = _doc_from_obj(obj)
            except (ValueError, KeyError, TypeError) as exc:
                if malformed == "error":
                    raise MalformedRecordError(path, line_no, str(exc)) from exc
                if errors is not None:
                    errors.append((line_no, str(exc)))
                continue
            yield doc


def write_documents(docs: Iterable[Document], path: str | os.PathLike) -> int:
    """Write documents as one JSON object per line; returns the count.

    Writes go to a temporary sibling first and are renamed into place, so an
    I/O failure never leaves a partial shard behind.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    count = 0
    try:
        with open_shard_write(tmp) as f:
            for doc in docs:
                f.write(json.dumps(_doc_to_obj(doc), ensure_ascii=False))
                f.write("\n")
                count += 1
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    os.replace(tmp, path)
    return count


def _attrs_from_obj(obj: dict) -> DocumentAttributes:
    attributes = {}
    for name, spans in obj.get("attributes", {}).items():
        attributes[name] = [AttributeSpan(int(s), int(e), float(v)) for s, e, v in spans]
    return DocumentAttributes(id=obj["id"], attributes=attributes)


def _attrs_to_obj(attrs: DocumentAttributes) -> dict:
    encoded = {}
    for name in sorted(attrs.attributes):
        spans = sorted(attrs.attributes[name], key=lambda sp: (sp.start, sp.end))
        encoded[name] = [[sp.start, sp.end, float(sp.score)] for sp in spans]
    return {"id": attrs.id, "attributes": encoded}


def read_attributes(
    path: str | os.PathLike,
    malformed: str = "error",
    errors: list | None = None,
) -> Iterator[DocumentAttributes]:
    """Yield attribute records in file order (mirrors ``read_documents``)."""
    if malformed not in ("error", "skip"):
        raise ValueError(f"malformed must be 'error' or 'skip', got {malformed!r}")
    with open_shard_read(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("record is not an object")
                rec = _attrs_from_obj(obj)
            except (ValueError, KeyError, TypeError) as exc:
                if malformed == "error":
                    raise MalformedRecordError(path, line_no, str(exc)) from exc
                if errors is not None:
                    errors.append((line_no, str(exc)))
                continue
            yield rec


def write_attributes(records: Iterable[DocumentAttributes], path: str | os.PathLike) -> int:
    """Write attribute records aligned with their document shard order."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    count = 0
    try:
        with open_shard_write(tmp) as f:
            for rec in records:
                f.write(json.dumps(_attrs_to_obj(rec), ensure_ascii=False))
                f.write("\n")
                count += 1
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    os.replace(tmp, path)
    return count
