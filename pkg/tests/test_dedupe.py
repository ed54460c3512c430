import random

import pytest

from corpuskit.bloom import BloomFilter, ExactSet
from corpuskit.dedupe import (
    CONTAMINATED,
    DOC_DUPLICATE,
    PARAGRAPH_DUPLICATE,
    URL_DUPLICATE,
    DedupeCounters,
    DedupeStageConfig,
    ccnet_group_dedupe,
    decontaminate_seed,
    decontaminate_tag,
    dedupe_by_document,
    dedupe_by_paragraph,
    dedupe_by_url,
    normalize_url,
    plan_shard_groups,
)
from corpuskit.documents import Document
from corpuskit.shard_io import write_documents


def url_doc(i, url):
    return Document(id=f"d{i}", text=f"text {i}", metadata={"url": url})


class TestNormalizeUrl:
    def test_lowercases_scheme_and_host(self):
        assert normalize_url("HTTP://Example.COM/Path") == "http://example.com/Path"

    def test_strips_fragment_and_trailing_slash(self):
        assert normalize_url("http://a.com/x/#frag") == "http://a.com/x"
        assert normalize_url("http://a.com/x/") == normalize_url("http://a.com/x")

    def test_keeps_query(self):
        assert normalize_url("http://a.com/x?q=1") == "http://a.com/x?q=1"


class TestUrlDedupe:
    def test_second_occurrence_flagged(self):
        docs = [url_doc(0, "http://a.com/x"), url_doc(1, "http://a.com/x")]
        results = list(dedupe_by_url(iter(docs), ExactSet()))
        assert URL_DUPLICATE not in results[0][1].attributes
        assert URL_DUPLICATE in results[1][1].attributes

    def test_trailing_slash_variants_share_key(self):
        docs = [url_doc(0, "http://a.com/x"), url_doc(1, "http://a.com/x/")]
        results = list(dedupe_by_url(iter(docs), ExactSet()))
        assert URL_DUPLICATE in results[1][1].attributes

    def test_missing_url_passes_with_counter(self):
        counters = DedupeCounters()
        docs = [Document(id="n", text="no url")]
        results = list(dedupe_by_url(iter(docs), ExactSet(), counters))
        assert results[0][1].attributes == {}
        assert counters.missing_url == 1

    def test_bloom_matches_exact_oracle_on_planted_dupes(self):
        rng = random.Random(0)
        docs = []
        for i in range(800):
            docs.append(url_doc(i, f"http://site{i}.com/page"))
        for j in range(200):  # plant duplicates of existing URLs
            src = rng.randrange(800)
            docs.append(url_doc(800 + j, f"http://site{src}.com/page"))
        flagged_exact = {
            doc.id
            for doc, attrs in dedupe_by_url(iter(docs), ExactSet())
            if URL_DUPLICATE in attrs.attributes
        }
        bloom = BloomFilter.create(len(docs), 1e-4, 0)
        flagged_bloom = {
            doc.id
            for doc, attrs in dedupe_by_url(iter(docs), bloom)
            if URL_DUPLICATE in attrs.attributes
        }
        assert flagged_exact <= flagged_bloom  # no false negatives
        assert len(flagged_bloom - flagged_exact) <= 2 * 1e-4 * len(docs)
        assert len(flagged_exact) == 200


class TestDocumentDedupe:
    def test_empty_documents_are_duplicates(self):
        docs = [Document(id="a", text=""), Document(id="b", text="")]
        results = list(dedupe_by_document(iter(docs), ExactSet()))
        assert DOC_DUPLICATE not in results[0][1].attributes
        assert DOC_DUPLICATE in results[1][1].attributes

    def test_single_space_difference_not_duplicate(self):
        docs = [Document(id="a", text="same text"), Document(id="b", text="same  text")]
        results = list(dedupe_by_document(iter(docs), ExactSet()))
        assert DOC_DUPLICATE not in results[1][1].attributes

    def test_matches_hash_set_oracle(self):
        rng = random.Random(1)
        texts = [f"document body {rng.randrange(300)}" for _ in range(1000)]
        docs = [Document(id=str(i), text=t) for i, t in enumerate(texts)]
        seen = set()
        expected = set()
        for doc in docs:
            if doc.text in seen:
                expected.add(doc.id)
            seen.add(doc.text)
        got = {
            doc.id
            for doc, attrs in dedupe_by_document(iter(docs), ExactSet())
            if DOC_DUPLICATE in attrs.attributes
        }
        assert got == expected

    def test_first_kept_under_permutation(self):
        texts = ["alpha", "beta", "alpha", "gamma", "beta"]
        for seed in range(5):
            docs = [Document(id=str(i), text=t) for i, t in enumerate(texts)]
            rng = random.Random(seed)
            rng.shuffle(docs)
            results = list(dedupe_by_document(iter(docs), ExactSet()))
            kept = [doc.text for doc, attrs in results if DOC_DUPLICATE not in attrs.attributes]
            assert sorted(kept) == ["alpha", "beta", "gamma"]


class TestParagraphDedupe:
    def test_shared_byline_flagged_in_later_docs(self):
        byline = "By Staff Writer"
        docs = [
            Document(id="a", text=f"{byline}\nstory one"),
            Document(id="b", text=f"{byline}\nstory two"),
            Document(id="c", text=f"{byline}\nstory three"),
        ]
        results = list(dedupe_by_paragraph(iter(docs), ExactSet()))
        assert PARAGRAPH_DUPLICATE not in results[0][1].attributes
        for _, attrs in results[1:]:
            spans = attrs.attributes[PARAGRAPH_DUPLICATE]
            assert len(spans) == 1
            assert (spans[0].start, spans[0].end) == (0, len(byline))

    def test_unique_paragraphs_unflagged(self):
        docs = [Document(id="a", text="one\ntwo"), Document(id="b", text="three\nfour")]
        for _, attrs in dedupe_by_paragraph(iter(docs), ExactSet()):
            assert attrs.attributes == {}

    def test_empty_paragraphs_count_as_duplicates(self):
        docs = [Document(id="a", text="x\n\ny"), Document(id="b", text="p\n\nq")]
        results = list(dedupe_by_paragraph(iter(docs), ExactSet()))
        assert PARAGRAPH_DUPLICATE not in results[0][1].attributes
        spans = results[1][1].attributes[PARAGRAPH_DUPLICATE]
        assert [(sp.start, sp.end) for sp in spans] == [(2, 2)]

    def test_repeat_within_one_document_flagged(self):
        doc = Document(id="a", text="same line\nsame line")
        (_, attrs), = dedupe_by_paragraph(iter([doc]), ExactSet())
        spans = attrs.attributes[PARAGRAPH_DUPLICATE]
        assert [(sp.start, sp.end) for sp in spans] == [(10, 19)]


class TestCcnetGroups:
    def make_shards(self, tmp_path, texts_per_shard):
        paths = []
        for i, texts in enumerate(texts_per_shard):
            path = tmp_path / f"shard-{i}.jsonl"
            write_documents(
                [Document(id=f"s{i}-d{j}", text=t) for j, t in enumerate(texts)], path
            )
            paths.append(path)
        return paths

    def test_duplicate_within_group_flagged(self, tmp_path):
        paths = self.make_shards(tmp_path, [["shared para\nunique a"], ["shared para\nunique b"]])
        results = dict(ccnet_group_dedupe(paths, max_group_bytes=10**9))
        assert results[paths[0]][0].attributes == {}
        assert PARAGRAPH_DUPLICATE in results[paths[1]][0].attributes

    def test_duplicate_across_groups_not_flagged(self, tmp_path):
        paths = self.make_shards(tmp_path, [["shared para"], ["shared para"]])
        # cap below the first shard size forces one group per shard
        cap = paths[0].stat().st_size
        groups = plan_shard_groups(paths, cap)
        assert len(groups) == 2
        results = dict(ccnet_group_dedupe(paths, cap))
        assert results[paths[0]][0].attributes == {}
        assert results[paths[1]][0].attributes == {}

    def test_six_shards_two_groups_match_per_group_oracle(self, tmp_path):
        rng = random.Random(0)
        # fixed-width paragraphs keep every shard the same byte size, so the
        # cap splits the six shards into exactly two groups of three
        pool = [f"paragraph number {i:02d}" for i in range(12)]
        shard_texts = []
        for _ in range(6):
            shard_texts.append(["\n".join(rng.choice(pool) for _ in range(4)) for _ in range(3)])
        paths = self.make_shards(tmp_path, shard_texts)
        sizes = [p.stat().st_size for p in paths]
        assert len(set(sizes)) == 1
        cap = sum(sizes[:3]) + 1  # first three shards fit, rest spill over
        groups = plan_shard_groups(paths, cap)
        assert len(groups) == 2 and [len(g) for g in groups] == [3, 3]

        flagged = {}
        for path, records in ccnet_group_dedupe(paths, cap):
            for rec in records:
                spans = rec.attributes.get(PARAGRAPH_DUPLICATE, [])
                if spans:
                    flagged[rec.id] = [(sp.start, sp.end) for sp in spans]

        expected = {}
        for group in groups:
            seen = set()
            for path in group:
                from corpuskit.shard_io import read_documents

                for doc in read_documents(path):
                    hits = []
                    pos = 0
                    for para in doc.text.split("\n"):
                        if para in seen:
                            hits.append((pos, pos + len(para)))
                        seen.add(para)
                        pos += len(para) + 1
                    if hits:
                        expected[doc.id] = hits
        assert flagged == expected

    def test_oversized_shard_gets_own_group(self, tmp_path):
        paths = self.make_shards(tmp_path, [["x" * 4000], ["small"], ["tiny"]])
        groups = plan_shard_groups(paths, max_group_bytes=1000)
        assert groups[0] == [paths[0]]


class TestDecontamination:
    def para(self, n_tokens, salt=""):
        return " ".join(f"tok{salt}{i}" for i in range(n_tokens))

    def test_13_token_paragraph_not_seeded_14_seeded(self):
        filt = ExactSet()
        test_docs = [Document(id="t", text=self.para(13) + "\n" + self.para(14, "b"))]
        seeded = decontaminate_seed(filt, test_docs)
        assert seeded.read_only
        assert not seeded.contains(self.para(13).encode())
        assert seeded.contains(self.para(14, "b").encode())

    def test_empty_test_set_flags_nothing(self):
        seeded = decontaminate_seed(ExactSet(), [])
        docs = [Document(id="a", text=self.para(20))]
        results = list(decontaminate_tag(iter(docs), seeded))
        assert results[0][1].attributes == {}

    def test_document_sharing_long_paragraph_flagged(self):
        shared = self.para(20, "x")
        seeded = decontaminate_seed(ExactSet(), [Document(id="t", text=shared)])
        doc = Document(id="a", text="intro line\n" + shared + "\noutro line")
        (_, attrs), = decontaminate_tag(iter([doc]), seeded)
        assert CONTAMINATED in attrs.attributes

    def test_short_shared_paragraph_ignored(self):
        shared = self.para(10, "y")
        seeded = decontaminate_seed(ExactSet(), [Document(id="t", text=shared)])
        doc = Document(id="a", text=shared)
        (_, attrs), = decontaminate_tag(iter([doc]), seeded)
        assert attrs.attributes == {}

    def test_mutable_filter_refused_for_tagging(self):
        filt = ExactSet()
        with pytest.raises(ValueError):
            list(decontaminate_tag(iter([Document(id="a", text="x")]), filt))

    def test_seeding_requires_mutable_filter(self):
        filt = ExactSet(read_only=True)
        with pytest.raises(ValueError):
            decontaminate_seed(filt, [])

    def test_stage_config_validation(self):
        with pytest.raises(ValueError):
            DedupeStageConfig(stage="bogus")
        with pytest.raises(ValueError):
            DedupeStageConfig(stage="url", min_paragraph_tokens=-1)
