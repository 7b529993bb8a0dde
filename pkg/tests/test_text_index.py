import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metarec.corpus import Document
from metarec.text_index import AnalyzerConfig, CorpusIndex, build_index, idf, tf_weight, tokenize


def test_tokenize_examples():
    assert tokenize("Deep Learning") == ["deep", "learning"]
    assert tokenize("") == []
    assert tokenize(None) == []
    assert tokenize("TF-IDF: re-weighting, 2019!") == ["tf", "idf", "re", "weighting", "2019"]
    assert tokenize("snake_case words") == ["snake", "case", "words"]


def test_tokenize_keeps_unicode_letters():
    assert tokenize("Über Graphen") == ["über", "graphen"]


def test_analyzer_flags():
    cfg = AnalyzerConfig(stem=True, stopwords=True)
    assert tokenize("The parsers of graphs", cfg) == ["parser", "graph"]
    assert tokenize("The parsers of graphs") == ["the", "parsers", "of", "graphs"]


@given(st.text(max_size=60))
def test_tokenize_idempotent(x):
    once = tokenize(x)
    assert tokenize(" ".join(once)) == once


def test_idf_values():
    assert idf(1, 3) == pytest.approx(1.405465, abs=1e-6)
    # 1 + ln(0.5) is reached at df = 1; df = 0 on one doc gives 1 + ln(1)
    assert idf(1, 1) == pytest.approx(0.306853, abs=1e-6)
    assert idf(0, 1) == 1.0
    assert idf(1, 2) == 1.0
    with pytest.raises(ValueError):
        idf(0, 0)


@given(st.integers(1, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
def test_idf_non_increasing(n, a, b):
    lo, hi = sorted((a, b))
    assert idf(lo, n) >= idf(hi, n)


def test_tf_weight():
    assert tf_weight(4) == 2.0
    assert tf_weight(0) == 0.0
    assert tf_weight(2) == pytest.approx(1.414214, abs=1e-6)


def test_single_doc_postings():
    idx = build_index([Document("d", "a b a")])
    title = idx["title"]
    assert title.postings("a", idx.doc_ids) == [("d", 2)]
    assert title.postings("b", idx.doc_ids) == [("d", 1)]
    assert int(title.doc_lengths[0]) == 3


def test_empty_corpus():
    idx = build_index([])
    assert idx.n_docs == 0
    for f in ("title", "abstract"):
        assert idx[f].doc_count == 0
        assert idx[f].post_docs.shape[0] == 0


def test_abstract_doc_count_skips_missing(toy_index):
    assert toy_index["title"].doc_count == 6
    assert toy_index["abstract"].doc_count == 5


docs_strategy = st.lists(
    st.tuples(st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=8),
              st.one_of(st.none(), st.lists(st.sampled_from("abcdefghij"), max_size=8))),
    max_size=20,
)


def make_docs(spec):
    return [Document(f"{i:03d}", " ".join(t), None if a is None else " ".join(a))
            for i, (t, a) in enumerate(spec)]


@settings(max_examples=60, deadline=None)
@given(docs_strategy)
def test_index_invariants(spec):
    docs = make_docs(spec)
    idx = build_index(docs)
    for f in ("title", "abstract"):
        fi = idx[f]
        lengths = np.zeros(idx.n_docs, dtype=np.int64)
        np.add.at(lengths, fi.post_docs, fi.post_freqs)
        assert lengths.tolist() == fi.doc_lengths.tolist()
        for t in fi.terms:
            assert 1 <= fi.df(t) <= idx.n_docs
    again = build_index(docs)
    assert again.snapshot() == idx.snapshot()


def test_snapshot_round_trip(tmp_path, toy_index):
    p = toy_index.save(tmp_path / "index.json")
    loaded = CorpusIndex.load(p)
    assert loaded.snapshot() == toy_index.snapshot()
    assert loaded["title"] == toy_index["title"]


def test_snapshot_version_checked():
    snap = build_index([Document("a", "x")]).snapshot()
    snap["version"] = 99
    with pytest.raises(ValueError):
        CorpusIndex.from_snapshot(snap)


def test_idf_method_matches_formula(toy_index):
    ti = toy_index["title"]
    assert ti.idf("graph") == pytest.approx(1 + math.log(6 / 3))
