import random
import string

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import BENIGN_WORDS, TOXIC_MARKERS, sentence
from corpuskit.documents import Document
from corpuskit.ngram_classifier import NgramConfig, NgramModel
from corpuskit.pii import ContentTagConfig
from corpuskit.toxicity import tag_toxicity


def coin_flip_model(labels=("ok", "toxic")):
    """Zero weights: every text scores exactly 0.5 for both labels."""
    cfg = NgramConfig(hash_buckets=1 << 8, ngram_orders=(1,), feature_kind="word")
    return NgramModel(
        config=cfg,
        labels=list(labels),
        weights=np.zeros((len(labels), cfg.hash_buckets)),
        bias=np.zeros(len(labels)),
    )


class TestTagToxicity:
    def test_benign_corpus_untouched_at_high_threshold(self, hate_model, nsfw_model):
        rng = random.Random(0)
        config = ContentTagConfig(toxicity_threshold=0.4)
        for _ in range(20):
            text = " ".join(
                sentence(rng, BENIGN_WORDS, rng.randrange(2, 7)).capitalize() + "."
                for _ in range(3)
            )
            doc = Document(id="b", text=text)
            assert tag_toxicity(doc, hate_model, nsfw_model, config) == {}, text

    def test_middle_toxic_sentence_gets_exactly_one_span(self, hate_model):
        marker = TOXIC_MARKERS[0]
        text = f"Lovely weather garden. Utterly {marker} {marker} {marker} morning. Thanks lovely coffee."
        doc = Document(id="t", text=text)
        attrs = tag_toxicity(doc, hate_model, None, ContentTagConfig(toxicity_threshold=0.4))
        spans = attrs["toxicity__hate"]
        assert len(spans) == 1
        data = text.encode("utf-8")
        tagged = data[spans[0].start : spans[0].end].decode("utf-8")
        assert marker in tagged and "Lovely" not in tagged and "Thanks" not in tagged

    def test_score_exactly_at_threshold_not_tagged(self):
        model = coin_flip_model()
        doc = Document(id="b", text="Anything at all.")
        at = tag_toxicity(doc, model, None, ContentTagConfig(toxicity_threshold=0.5))
        below = tag_toxicity(doc, model, None, ContentTagConfig(toxicity_threshold=0.4999))
        assert at == {}
        assert len(below["toxicity__hate"]) == 1
        assert below["toxicity__hate"][0].score == 0.5

    @given(st.text(alphabet=string.printable, max_size=60))
    def test_threshold_one_tags_nothing(self, text):
        model = coin_flip_model()
        doc = Document(id="p", text=text)
        assert tag_toxicity(doc, model, model, ContentTagConfig(toxicity_threshold=1.0)) == {}

    def test_both_models_tag_independently(self, hate_model, nsfw_model):
        marker = TOXIC_MARKERS[1]
        doc = Document(id="t", text=f"So much {marker} {marker} content here.")
        attrs = tag_toxicity(doc, hate_model, nsfw_model, ContentTagConfig(toxicity_threshold=0.4))
        assert set(attrs) == {"toxicity__hate", "toxicity__nsfw"}

    def test_per_model_threshold_override(self):
        model = coin_flip_model()
        doc = Document(id="d", text="Words words words.")
        config = ContentTagConfig(toxicity_threshold=0.9, hate_threshold=0.4)
        attrs = tag_toxicity(doc, model, model, config)
        assert "toxicity__hate" in attrs  # 0.5 > 0.4 override
        assert "toxicity__nsfw" not in attrs  # 0.5 <= 0.9 shared default

    def test_wrong_labels_rejected(self, lang_model):
        doc = Document(id="d", text="x")
        with pytest.raises(ValueError):
            tag_toxicity(doc, lang_model, None)

    def test_no_models_no_spans(self):
        assert tag_toxicity(Document(id="d", text="x"), None, None) == {}

    def test_spans_lie_within_document(self, hate_model, nsfw_model):
        rng = random.Random(1)
        marker = TOXIC_MARKERS[2]
        text = f"Nice start. Bad {marker} middle. Clean end."
        doc = Document(id="d", text=text)
        attrs = tag_toxicity(doc, hate_model, nsfw_model, ContentTagConfig(toxicity_threshold=0.1))
        size = len(text.encode("utf-8"))
        for spans in attrs.values():
            for sp in spans:
                assert 0 <= sp.start <= sp.end <= size
                assert 0.0 <= sp.score <= 1.0
