"""Shard-parallel tagging and the staged web curation pipeline.

Taggers are pure functions from a document to named span lists, looked up
by name in a registry; custom taggers (e.g. a code-secret scanner) can be
registered at runtime. Tagging parallelizes across shards with one sidecar
file per input shard; attribute bytes are independent of worker count.

The web pipeline runs the fixed stage order: URL dedup, document dedup,
quality/content filtering, and paragraph dedup last.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from corpuskit import code_rules, heuristics
from corpuskit.bloom import BloomFilter, ExactSet
from corpuskit.dedupe import (
    DOC_DUPLICATE,
    PARAGRAPH_DUPLICATE,
    URL_DUPLICATE,
    dedupe_by_paragraph,
    dedupe_by_url,
)
from corpuskit.documents import AttributeSpan, Document, DocumentAttributes
from corpuskit.filters import Drop, FilterExpr, apply_filters, merge_spans
from corpuskit.gopher import tag_gopher
from corpuskit.ngram_classifier import load_model, score_english, score_language_paragraph_avg
from corpuskit.pii import ContentTagConfig, apply_pii_policy, pii_attributes, tag_pii
from corpuskit.shard_io import read_documents, write_attributes, write_documents
from corpuskit.toxicity import tag_toxicity

TaggerFn = Callable[[Document], dict[str, list[AttributeSpan]]]


class UnknownTaggerError(ValueError):
    pass


def _language_tagger(params: dict) -> TaggerFn:
    model = load_model(params["model"])

    def tag(doc: Document) -> dict[str, list[AttributeSpan]]:
        end = len(doc.text_bytes)
        attrs = {"lang__en": [AttributeSpan(0, end, score_english(model, doc.text))]}
        return attrs

    return tag


def _language_paragraph_tagger(params: dict) -> TaggerFn:
    model = load_model(params["model"])

    def tag(doc: Document) -> dict[str, list[AttributeSpan]]:
        end = len(doc.text_bytes)
        result = score_language_paragraph_avg(model, doc.text)
        attrs = {"lang__en_paragraph": [AttributeSpan(0, end, result.score)]}
        if result.degenerate:
            attrs["lang__degenerate"] = [AttributeSpan(0, end, 1.0)]
        return attrs

    return tag


def _toxicity_tagger(params: dict) -> TaggerFn:
    hate = load_model(params["hate_model"]) if params.get("hate_model") else None
    nsfw = load_model(params["nsfw_model"]) if params.get("nsfw_model") else None
    config = ContentTagConfig(
        toxicity_threshold=params.get("threshold", ContentTagConfig().toxicity_threshold),
        hate_threshold=params.get("hate_threshold"),
        nsfw_threshold=params.get("nsfw_threshold"),
    )
    return lambda doc: tag_toxicity(doc, hate, nsfw, config)


def _reddit_quality_tagger(params: dict) -> TaggerFn:
    blocklist = None
    if params.get("blocklist"):
        blocklist = heuristics.load_subreddit_blocklist(params["blocklist"])
    return lambda doc: heuristics.tag_reddit_quality(doc, blocklist)


def _banned_subreddit_tagger(params: dict) -> TaggerFn:
    blocklist = heuristics.load_subreddit_blocklist(params["blocklist"])
    return lambda doc: heuristics.tag_banned_subreddit(doc, blocklist)


def _extension_tagger(params: dict) -> TaggerFn:
    blocklist = frozenset(
        e.lower() for e in params.get("blocklist", code_rules.DEFAULT_BLOCKED_EXTENSIONS)
    )
    return lambda doc: code_rules.tag_extension_filter(doc, blocklist)


_REGISTRY: dict[str, Callable[[dict], TaggerFn]] = {
    "gopher": lambda params: tag_gopher,
    "c4": lambda params: heuristics.tag_c4_nopunc,
    "repetition": lambda params: heuristics.tag_repetition,
    "wiki_short": lambda params: heuristics.tag_wiki_min_words,
    "reddit_quality": _reddit_quality_tagger,
    "banned_subreddit": _banned_subreddit_tagger,
    "code_rpj": lambda params: code_rules.tag_code_rpj,
    "code_starcoder": lambda params: code_rules.tag_code_starcoder,
    "extension": _extension_tagger,
    "pii": lambda params: pii_attributes,
    "language": _language_tagger,
    "language_paragraph": _language_paragraph_tagger,
    "toxicity": _toxicity_tagger,
}


def register_tagger(name: str, factory: Callable[[dict], TaggerFn]) -> None:
    """Plug in a custom tagger (e.g. a code-secret scanner)."""
    _REGISTRY[name] = factory


def build_tagger(name: str, params: dict | None = None) -> TaggerFn:
    if name not in _REGISTRY:
        raise UnknownTaggerError(f"unknown tagger {name!r}; known: {sorted(_REGISTRY)}")
    return _REGISTRY[name](params or {})


@dataclass
class TagReport:
    """Per-attribute document/character counts, in the same units the
    curation reports use (percent of documents, percent of UTF-8 bytes)."""

    total_documents: int = 0
    total_text_bytes: int = 0
    attribute_documents: dict[str, int] = field(default_factory=dict)
    attribute_bytes: dict[str, int] = field(default_factory=dict)
    wall_seconds: float = 0.0

    def merge_shard(self, counts: "TagReport") -> None:
        self.total_documents += counts.total_documents
        self.total_text_bytes += counts.total_text_bytes
        for name, n in counts.attribute_documents.items():
            self.attribute_documents[name] = self.attribute_documents.get(name, 0) + n
        for name, n in counts.attribute_bytes.items():
            self.attribute_bytes[name] = self.attribute_bytes.get(name, 0) + n

    def to_json(self) -> dict:
        attrs = {}
        for name in sorted(self.attribute_documents):
            docs = self.attribute_documents[name]
            tagged = self.attribute_bytes[name]
            attrs[name] = {
                "documents": docs,
                "documents_pct": 100.0 * docs / self.total_documents if self.total_documents else 0.0,
                "characters": tagged,
                "characters_pct": (
                    100.0 * tagged / self.total_text_bytes if self.total_text_bytes else 0.0
                ),
            }
        return {
            "total_documents": self.total_documents,
            "total_text_bytes": self.total_text_bytes,
            "attributes": attrs,
            "wall_seconds": self.wall_seconds,
            "docs_per_second": self.total_documents / self.wall_seconds if self.wall_seconds else 0.0,
        }


def _tag_one_shard(doc_path: str, out_path: str, specs: list[tuple[str, dict]]) -> TagReport:
    taggers = [(name, build_tagger(name, params)) for name, params in specs]
    counts = TagReport()

    def records():
        for doc in read_documents(doc_path):
            counts.total_documents += 1
            counts.total_text_bytes += len(doc.text_bytes)
            merged = DocumentAttributes(id=doc.id)
            for name, tagger in taggers:
                merged.merge(DocumentAttributes(id=doc.id, attributes=tagger(doc)))
            for attr_name, spans in merged.attributes.items():
                if not spans:
                    continue
                counts.attribute_documents[attr_name] = (
                    counts.attribute_documents.get(attr_name, 0) + 1
                )
                covered = sum(sp.end - sp.start for sp in merge_spans(spans))
                counts.attribute_bytes[attr_name] = (
                    counts.attribute_bytes.get(attr_name, 0) + covered
                )
            yield merged

    write_attributes(records(), out_path)
    return counts


def run_tag(
    doc_paths: list[str],
    tagger_specs: list[tuple[str, dict]],
    out_dir: str,
    workers: int = 1,
) -> TagReport:
    """Tag every shard, writing one sidecar per input shard (same name)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    tasks = [(str(p), str(out / Path(p).name)) for p in doc_paths]
    report = TagReport()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_tag_one_shard, dp, op, tagger_specs) for dp, op in tasks]
            shard_counts = [f.result() for f in futures]
    else:
        shard_counts = [_tag_one_shard(dp, op, tagger_specs) for dp, op in tasks]
    for counts in shard_counts:
        report.merge_shard(counts)
    report.wall_seconds = time.monotonic() - started
    return report


@dataclass
class WebPipelineConfig:
    inputs: list[str]
    out_dir: str
    bloom_n: int = 1_000_000
    bloom_p: float = 1e-4
    seed: int = 0
    exact_backend: bool = False
    language_model: str | None = None
    hate_model: str | None = None
    nsfw_model: str | None = None
    toxicity_threshold: float = 0.4
    workers: int = 1

    def make_backend(self):
        if self.exact_backend:
            return ExactSet()
        return BloomFilter.create(self.bloom_n, self.bloom_p, self.seed)


@dataclass
class StageReport:
    stage: str
    input_docs: int = 0
    kept_docs: int = 0
    dropped_docs: int = 0
    drop_reasons: dict = field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.dropped_docs += 1
        self.drop_reasons[reason] = self.drop_reasons.get(reason, 0) + 1

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "input_docs": self.input_docs,
            "kept_docs": self.kept_docs,
            "dropped_docs": self.dropped_docs,
            "drop_reasons": dict(sorted(self.drop_reasons.items())),
        }


QUALITY_DROP_FILTERS = [
    FilterExpr("gopher__matches_any", "document", ">=", 1.0, "drop_doc"),
    FilterExpr("c4__no_punc_fraction", "document", ">", 0.5, "drop_doc"),
    FilterExpr("repetition__run", "document", ">", float(heuristics.MAX_TOKEN_REPETITIONS), "drop_doc"),
]

PARAGRAPH_REMOVE_FILTER = FilterExpr(PARAGRAPH_DUPLICATE, "span", ">=", 1.0, "remove_span")


def _quality_content_shard(
    doc_path: str,
    out_path: str,
    language_model: str | None,
    hate_model: str | None,
    nsfw_model: str | None,
    toxicity_threshold: float,
) -> StageReport:
    report = StageReport(stage="quality_content")
    taggers: list[TaggerFn] = [
        tag_gopher,
        heuristics.tag_c4_nopunc,
        heuristics.tag_repetition,
    ]
    exprs = list(QUALITY_DROP_FILTERS)
    if language_model:
        taggers.append(_language_tagger({"model": language_model}))
        exprs.append(FilterExpr("lang__en", "document", "<", 0.5, "drop_doc"))
    if hate_model or nsfw_model:
        taggers.append(
            _toxicity_tagger(
                {
                    "hate_model": hate_model,
                    "nsfw_model": nsfw_model,
                    "threshold": toxicity_threshold,
                }
            )
        )
        exprs.append(FilterExpr("toxicity__hate", "span", ">", toxicity_threshold, "remove_span"))
        exprs.append(FilterExpr("toxicity__nsfw", "span", ">", toxicity_threshold, "remove_span"))
    pii_config = ContentTagConfig(toxicity_threshold=toxicity_threshold)

    def survivors():
        for doc in read_documents(doc_path):
            report.input_docs += 1
            attrs = DocumentAttributes(id=doc.id)
            for tagger in taggers:
                attrs.merge(DocumentAttributes(id=doc.id, attributes=tagger(doc)))
            # PII density is judged on the original text; sparse spans are
            # masked in the same splice pass as toxic sentence removal.
            if len(tag_pii(doc)) > pii_config.pii_max_spans_for_masking:
                report.drop("pii_density")
                continue
            decision = apply_filters(doc, attrs, exprs)
            if isinstance(decision, Drop):
                report.drop(decision.reason)
                continue
            # re-tag after span removal so PII offsets match the edited text
            masked = apply_pii_policy(decision.doc, tag_pii(decision.doc), pii_config)
            if isinstance(masked, Drop):
                report.drop(masked.reason)
                continue
            report.kept_docs += 1
            yield masked.doc

    write_documents(survivors(), out_path)
    return report


def run_pipeline_web(config: WebPipelineConfig) -> list[StageReport]:
    """URL and document dedup, then quality/content filtering, and finally
    paragraph dedup; aborts naming the stage on failure."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tmp1 = out_dir / ".stage-dedup"
    tmp2 = out_dir / ".stage-quality"
    tmp1.mkdir(exist_ok=True)
    tmp2.mkdir(exist_ok=True)

    url_report = StageReport(stage="url_dedup")
    doc_report = StageReport(stage="doc_dedup")
    url_backend = config.make_backend()
    doc_backend = config.make_backend()
    shards = [Path(p) for p in config.inputs]

    # Dedup inserts are order-sensitive, so stages 1-2 stream sequentially.
    for shard in shards:
        def dedup_survivors(shard=shard):
            for doc, url_attrs in dedupe_by_url(read_documents(shard), url_backend):
                url_report.input_docs += 1
                if URL_DUPLICATE in url_attrs.attributes:
                    url_report.drop(URL_DUPLICATE)
                    continue
                url_report.kept_docs += 1
                doc_report.input_docs += 1
                if doc_backend.insert_check(doc.text_bytes):
                    doc_report.drop(DOC_DUPLICATE)
                    continue
                doc_report.kept_docs += 1
                yield doc

        write_documents(dedup_survivors(), tmp1 / shard.name)

    quality_tasks = [(str(tmp1 / s.name), str(tmp2 / s.name)) for s in shards]
    if config.workers > 1 and len(quality_tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(
                    _quality_content_shard,
                    src,
                    dst,
                    config.language_model,
                    config.hate_model,
                    config.nsfw_model,
                    config.toxicity_threshold,
                )
                for src, dst in quality_tasks
            ]
            quality_shards = [f.result() for f in futures]
    else:
        quality_shards = [
            _quality_content_shard(
                src,
                dst,
                config.language_model,
                config.hate_model,
                config.nsfw_model,
                config.toxicity_threshold,
            )
            for src, dst in quality_tasks
        ]
    quality_report = StageReport(stage="quality_content")
    for shard_report in quality_shards:
        quality_report.input_docs += shard_report.input_docs
        quality_report.kept_docs += shard_report.kept_docs
        quality_report.dropped_docs += shard_report.dropped_docs
        for reason, n in shard_report.drop_reasons.items():
            quality_report.drop_reasons[reason] = quality_report.drop_reasons.get(reason, 0) + n

    # Paragraph dedup runs last; duplicate paragraphs are spliced out and
    # documents emptied by the splice are dropped.
    para_report = StageReport(stage="paragraph_dedup")
    para_backend = config.make_backend()
    for shard in shards:
        def para_survivors(shard=shard):
            for doc, attrs in dedupe_by_paragraph(
                read_documents(tmp2 / shard.name), para_backend
            ):
                para_report.input_docs += 1
                decision = apply_filters(doc, attrs, [PARAGRAPH_REMOVE_FILTER])
                if isinstance(decision, Drop):
                    para_report.drop(decision.reason)
                    continue
                para_report.kept_docs += 1
                yield decision.doc

        write_documents(para_survivors(), out_dir / shard.name)

    for tmp in (tmp1, tmp2):
        for leftover in tmp.iterdir():
            leftover.unlink()
        tmp.rmdir()
    return [url_report, doc_report, quality_report, para_report]
