"""Sentence-level toxicity tagging with trained hate/NSFW scorers."""

from __future__ import annotations

from corpuskit.documents import AttributeSpan, Document
from corpuskit.ngram_classifier import Scorer
from corpuskit.pii import ContentTagConfig
from corpuskit.sentences import SentenceSplitter, split_sentences

TOXIC_LABEL = "toxic"


def _check_model(model: Scorer, name: str) -> None:
    if TOXIC_LABEL not in model.labels:
        raise ValueError(f"{name} model labels {model.labels} do not include {TOXIC_LABEL!r}")


def tag_toxicity(
    doc: Document,
    hate_model: Scorer | None,
    nsfw_model: Scorer | None,
    config: ContentTagConfig | None = None,
    splitter: SentenceSplitter = split_sentences,
) -> dict[str, list[AttributeSpan]]:
    """Score every sentence with both models; tag sentences scoring strictly
    above the threshold.

    The span carries the model's score and covers the sentence, so the
    mixer can delete it. Thresholds default to the shared tau with optional
    per-model overrides.
    """
    config = config or ContentTagConfig()
    models = []
    if hate_model is not None:
        _check_model(hate_model, "hate")
        tau = config.hate_threshold if config.hate_threshold is not None else config.toxicity_threshold
        models.append(("toxicity__hate", hate_model, tau))
    if nsfw_model is not None:
        _check_model(nsfw_model, "nsfw")
        tau = config.nsfw_threshold if config.nsfw_threshold is not None else config.toxicity_threshold
        models.append(("toxicity__nsfw", nsfw_model, tau))
    if not models:
        return {}

    data = doc.text_bytes
    attrs: dict[str, list[AttributeSpan]] = {}
    for span in splitter(doc.text):
        sentence = data[span.start : span.end].decode("utf-8").strip()
        if not sentence:
            continue
        for name, model, tau in models:
            score = model.predict_proba(sentence)[TOXIC_LABEL]
            if score > tau:
                attrs.setdefault(name, []).append(AttributeSpan(span.start, span.end, score))
    return attrs
