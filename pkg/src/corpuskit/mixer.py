"""Mixing: filter streams, up/down-sample sources, and reshard the output.

Sampling is per-document Bernoulli on a seeded hash of (source, doc id,
repeat index), so decisions need no coordination between workers and the
output is reproducible for a fixed config and seed. Filtering runs per
input file (parallelizable); resharding then concatenates the filtered
parts in config order, so output bytes do not depend on worker count.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from corpuskit.documents import Document, DocumentAttributes
from corpuskit.filters import Drop, FilterExpr, apply_filters
from corpuskit.shard_io import (
    document_to_line,
    open_shard_write,
    read_attributes,
    read_documents,
)

_MASK64 = (1 << 64) - 1
DEFAULT_SHARD_BYTES = 64 * 2**20


class MixConfigError(ValueError):
    pass


@dataclass
class StreamConfig:
    documents: list[str]
    attributes: list[str] = field(default_factory=list)
    filters: list[FilterExpr] = field(default_factory=list)

    @classmethod
    def from_json(cls, obj: dict) -> "StreamConfig":
        return cls(
            documents=list(obj["documents"]),
            attributes=list(obj.get("attributes", [])),
            filters=[FilterExpr.from_json(e) for e in obj.get("filters", [])],
        )

    def to_json(self) -> dict:
        return {
            "documents": self.documents,
            "attributes": self.attributes,
            "filters": [e.to_json() for e in self.filters],
        }


@dataclass
class MixConfig:
    streams: list[StreamConfig]
    proportions: dict[str, float] | None = None  # source -> target weight
    upsample: dict[str, int] = field(default_factory=dict)  # source -> repeats
    seed: int = 0
    output_shard_bytes: int = DEFAULT_SHARD_BYTES

    def __post_init__(self) -> None:
        if not self.streams:
            raise MixConfigError("mix config needs at least one stream")
        if self.proportions is not None:
            if any(w < 0 for w in self.proportions.values()):
                raise MixConfigError("proportion weights must be >= 0")
            if not any(w > 0 for w in self.proportions.values()):
                raise MixConfigError("proportion weights must not all be zero")
        for source, factor in self.upsample.items():
            if int(factor) < 1:
                raise MixConfigError(f"upsample factor for {source!r} must be >= 1")
        if self.output_shard_bytes < 1:
            raise MixConfigError("output_shard_bytes must be >= 1")

    @classmethod
    def from_json(cls, obj: dict) -> "MixConfig":
        return cls(
            streams=[StreamConfig.from_json(s) for s in obj["streams"]],
            proportions=obj.get("proportions"),
            upsample={k: int(v) for k, v in obj.get("upsample", {}).items()},
            seed=int(obj.get("seed", 0)),
            output_shard_bytes=int(obj.get("output_shard_bytes", DEFAULT_SHARD_BYTES)),
        )

    def to_json(self) -> dict:
        obj = {
            "streams": [s.to_json() for s in self.streams],
            "seed": self.seed,
            "output_shard_bytes": self.output_shard_bytes,
        }
        if self.proportions is not None:
            obj["proportions"] = self.proportions
        if self.upsample:
            obj["upsample"] = self.upsample
        return obj


def sample_proportions(
    weights: dict[str, float], sizes: dict[str, float], seed: int = 0
) -> dict[str, float]:
    """Per-source inclusion probabilities realizing the target byte shares.

    Expected output shares equal the normalized weights exactly; the
    densest source is sampled at 100% (a source cannot exceed its available
    mass without upsampling). Deterministic; the seed only drives the
    later per-document draws.
    """
    del seed
    total_weight = sum(weights.values())
    if total_weight <= 0:
        raise MixConfigError("proportion weights must not all be zero")
    densities = {}
    for source, weight in weights.items():
        if weight == 0:
            continue
        size = sizes.get(source, 0)
        if size <= 0:
            raise MixConfigError(f"source {source!r} has weight but no input mass")
        densities[source] = (weight, size)
    peak_w, peak_s = max(densities.values(), key=lambda ws: ws[0] / ws[1])
    # cross products keep equal-density sources at exactly 1.0
    rates = {source: (w * peak_s) / (s * peak_w) for source, (w, s) in densities.items()}
    for source, weight in weights.items():
        if weight == 0:
            rates[source] = 0.0
    return rates


def _keep_draw(seed: int, source: str, doc_id: str, repeat: int) -> float:
    payload = f"{seed}\x1f{source}\x1f{doc_id}\x1f{repeat}".encode("utf-8")
    h = int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")
    return h / (_MASK64 + 1)


@dataclass
class SourceReport:
    input_docs: int = 0
    kept_docs: int = 0
    dropped_docs: int = 0
    sampled_out_docs: int = 0
    kept_text_bytes: int = 0
    drop_reasons: dict = field(default_factory=dict)


@dataclass
class MixReport:
    sources: dict[str, SourceReport] = field(default_factory=dict)
    output_shards: list[str] = field(default_factory=list)

    def source(self, name: str) -> SourceReport:
        if name not in self.sources:
            self.sources[name] = SourceReport()
        return self.sources[name]

    def to_json(self) -> dict:
        total_bytes = sum(s.kept_text_bytes for s in self.sources.values())
        sources = {}
        for name, rep in sorted(self.sources.items()):
            sources[name] = {
                "input_docs": rep.input_docs,
                "kept_docs": rep.kept_docs,
                "dropped_docs": rep.dropped_docs,
                "sampled_out_docs": rep.sampled_out_docs,
                "kept_text_bytes": rep.kept_text_bytes,
                "byte_share": rep.kept_text_bytes / total_bytes if total_bytes else 0.0,
                "drop_reasons": dict(sorted(rep.drop_reasons.items())),
            }
        return {
            "sources": sources,
            "total_kept_docs": sum(s.kept_docs for s in self.sources.values()),
            "total_kept_text_bytes": total_bytes,
            "output_shards": self.output_shards,
        }


def resolve_attribute_paths(doc_path: str | os.PathLike, attribute_entries: list[str]) -> list[Path]:
    """Mirror-tree convention: a directory entry holds a sidecar named like
    the document shard; a file entry is used directly."""
    doc_path = Path(doc_path)
    resolved = []
    for entry in attribute_entries:
        p = Path(entry)
        if p.is_dir():
            candidate = p / doc_path.name
            if not candidate.exists():
                raise FileNotFoundError(f"no attribute sidecar {candidate} for {doc_path}")
            resolved.append(candidate)
        else:
            resolved.append(p)
    return resolved


def iter_doc_attrs(
    doc_path: str | os.PathLike, attribute_entries: list[str]
) -> Iterator[tuple[Document, DocumentAttributes]]:
    """Zip a document shard with its attribute sidecars, checking alignment."""
    attr_paths = resolve_attribute_paths(doc_path, attribute_entries)
    doc_iter = read_documents(doc_path)
    attr_iters = [read_attributes(p) for p in attr_paths]
    for doc in doc_iter:
        merged = DocumentAttributes(id=doc.id)
        for it, path in zip(attr_iters, attr_paths):
            rec = next(it, None)
            if rec is None:
                raise ValueError(f"attribute shard {path} shorter than {doc_path}")
            if rec.id != doc.id:
                raise ValueError(
                    f"attribute shard {path} misaligned: got {rec.id!r}, expected {doc.id!r}"
                )
            merged.merge(rec)
        yield doc, merged
    for it, path in zip(attr_iters, attr_paths):
        if next(it, None) is not None:
            raise ValueError(f"attribute shard {path} longer than {doc_path}")


def measure_source_sizes(config: MixConfig) -> dict[str, int]:
    """Pre-filter text bytes per source, used to derive sampling rates.

    Upsampled sources count once per repeat. Heavy filtering will skew
    realized shares away from the targets; the mix report shows what was
    realized.
    """
    sizes: dict[str, int] = {}
    for stream in config.streams:
        for path in stream.documents:
            for doc in read_documents(path):
                repeats = int(config.upsample.get(doc.source, 1))
                sizes[doc.source] = sizes.get(doc.source, 0) + len(doc.text_bytes) * repeats
    return sizes


def _filter_one_file(
    stream: StreamConfig,
    doc_path: str,
    part_path: str,
    seed: int,
    upsample: dict[str, int],
    rates: dict[str, float] | None,
) -> dict:
    """Phase 1 worker: filter + sample one input file into one part file."""
    per_source: dict[str, SourceReport] = {}

    def report(source: str) -> SourceReport:
        if source not in per_source:
            per_source[source] = SourceReport()
        return per_source[source]

    with open_shard_write(part_path) as out:
        for doc, attrs in iter_doc_attrs(doc_path, stream.attributes):
            rep = report(doc.source)
            rep.input_docs += 1
            decision = apply_filters(doc, attrs, stream.filters)
            if isinstance(decision, Drop):
                rep.dropped_docs += 1
                rep.drop_reasons[decision.reason] = rep.drop_reasons.get(decision.reason, 0) + 1
                continue
            kept_doc = decision.doc
            rate = 1.0 if rates is None else rates.get(doc.source, 1.0)
            for repeat in range(int(upsample.get(doc.source, 1))):
                if rate < 1.0 and _keep_draw(seed, doc.source, doc.id, repeat) >= rate:
                    rep.sampled_out_docs += 1
                    continue
                rep.kept_docs += 1
                rep.kept_text_bytes += len(kept_doc.text_bytes)
                out.write(document_to_line(kept_doc))
                out.write("\n")
    return {
        source: {
            "input_docs": rep.input_docs,
            "kept_docs": rep.kept_docs,
            "dropped_docs": rep.dropped_docs,
            "sampled_out_docs": rep.sampled_out_docs,
            "kept_text_bytes": rep.kept_text_bytes,
            "drop_reasons": rep.drop_reasons,
        }
        for source, rep in per_source.items()
    }


def mix(config: MixConfig, out_dir: str | os.PathLike, workers: int = 1) -> MixReport:
    """Run the full mix: filter, sample, upsample, and reshard.

    Same config and seed produce byte-identical output shards regardless of
    worker count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp_dir = out_dir / ".mix-parts"
    tmp_dir.mkdir(exist_ok=True)

    rates = None
    if config.proportions is not None:
        sizes = measure_source_sizes(config)
        rates = sample_proportions(config.proportions, sizes, config.seed)

    tasks = []
    for stream_idx, stream in enumerate(config.streams):
        for file_idx, doc_path in enumerate(stream.documents):
            part = tmp_dir / f"part-{stream_idx:03d}-{file_idx:05d}.jsonl"
            tasks.append((stream, str(doc_path), str(part)))

    report = MixReport()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _filter_one_file, stream, doc_path, part, config.seed, config.upsample, rates
                )
                for stream, doc_path, part in tasks
            ]
            results = [f.result() for f in futures]
    else:
        results = [
            _filter_one_file(stream, doc_path, part, config.seed, config.upsample, rates)
            for stream, doc_path, part in tasks
        ]

    for result in results:
        for source, counts in result.items():
            rep = report.source(source)
            rep.input_docs += counts["input_docs"]
            rep.kept_docs += counts["kept_docs"]
            rep.dropped_docs += counts["dropped_docs"]
            rep.sampled_out_docs += counts["sampled_out_docs"]
            rep.kept_text_bytes += counts["kept_text_bytes"]
            for reason, n in counts["drop_reasons"].items():
                rep.drop_reasons[reason] = rep.drop_reasons.get(reason, 0) + n

    # Phase 2: concatenate parts in config order into byte-capped shards.
    shard_idx = 0
    current = None
    current_bytes = 0

    def open_next():
        nonlocal shard_idx, current, current_bytes
        path = out_dir / f"part-{shard_idx:05d}.jsonl"
        report.output_shards.append(str(path))
        shard_idx += 1
        current = open(path, "wb")
        current_bytes = 0

    open_next()
    for _, _, part in tasks:
        with open(part, "rb") as f:
            for line in f:
                if current_bytes > 0 and current_bytes + len(line) > config.output_shard_bytes:
                    current.close()
                    open_next()
                current.write(line)
                current_bytes += len(line)
        os.unlink(part)
    current.close()
    tmp_dir.rmdir()
    return report
