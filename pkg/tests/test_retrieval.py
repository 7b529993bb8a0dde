import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from metarec.corpus import Document
from metarec.retrieval import (ALGORITHMS, AlgorithmId, EmptyQueryError, FieldSet, MltParams, rank_candidates,
                               NotIndexedError, Query, Retriever, build_mlt_query, build_standard_query)
from metarec.text_index import build_index


def test_canonical_order():
    assert [a.value for a in ALGORITHMS] == [
        "mlt_title", "mlt_title_abstract", "std_title", "std_title_abstract"]
    assert [a.index for a in ALGORITHMS] == [0, 1, 2, 3]
    assert AlgorithmId("std_title").field_set is FieldSet.TITLE


def test_standard_query_construction(toy_index):
    q = build_standard_query(toy_index, "graph parsing", FieldSet.TITLE)
    assert q.terms == (("graph", 1.0), ("parsing", 1.0))
    assert q.fields == ("title",)
    q2 = build_standard_query(toy_index, "graph parsing", FieldSet.TITLE_ABSTRACT)
    assert q2.terms == q.terms and q2.fields == ("title", "abstract")
    assert build_standard_query(toy_index, "a a b", FieldSet.TITLE).terms == (("a", 1.0), ("b", 1.0))


def test_empty_query_rejected(toy_index):
    with pytest.raises(EmptyQueryError):
        build_standard_query(toy_index, "?!...", FieldSet.TITLE)
    with pytest.raises(ValueError):
        Query((), ("title",))


def test_mlt_single_unique_term():
    docs = [Document("1", "zebra"), Document("2", "apple pie"), Document("3", "apple tart")]
    idx = build_index(docs)
    q = build_mlt_query(idx, "1", FieldSet.TITLE)
    assert q.terms == (("zebra", pytest.approx(1.0 * oracles.idf(1, 3))),)


def test_mlt_max_terms_keeps_top():
    docs = [Document("1", "alpha beta gamma delta epsilon"),
            Document("2", "alpha beta gamma"), Document("3", "alpha beta")]
    idx = build_index(docs)
    q = build_mlt_query(idx, "1", FieldSet.TITLE, MltParams(max_query_terms=2))
    # delta and epsilon are unique to doc 1 and tie; lexicographic order decides
    assert [t for t, _ in q.terms] == ["delta", "epsilon"]
    assert q.terms == tuple((t, pytest.approx(w)) for t, w in
                            oracles.brute_mlt_terms(docs, "1", ("title",), 2))


def test_mlt_missing_abstract_same_as_title(toy_index):
    a = build_mlt_query(toy_index, "d5", FieldSet.TITLE)
    b = build_mlt_query(toy_index, "d5", FieldSet.TITLE_ABSTRACT)
    assert a.terms == b.terms


def test_mlt_unindexed(toy_index):
    with pytest.raises(NotIndexedError):
        Retriever(toy_index).mlt_query("nope", FieldSet.TITLE)


def test_single_match_and_exclusion():
    docs = [Document("x", "unique words"), Document("y", "other stuff")]
    r = Retriever(build_index(docs))
    q = Query((("unique", 1.0),), ("title",))
    res = r.execute(q, 10)
    assert res.doc_ids() == ["x"] and res.entries[0][1] > 0
    assert r.execute(q, 10, exclude="x").doc_ids() == []
    with pytest.raises(ValueError):
        r.execute(q, 0)


def test_four_doc_bruteforce():
    docs = [Document("a", "graph parsing", "neural graph models"),
            Document("b", "graph theory"), Document("c", "speech parsing", "parsing speech audio"),
            Document("d", "cooking")]
    r = Retriever(build_index(docs))
    q = r.standard_query("graph parsing", FieldSet.TITLE_ABSTRACT)
    got = r.execute(q, 10).entries
    want = oracles.brute_rank(docs, q.terms, q.fields, 10)
    assert [d for d, _ in got] == [d for d, _ in want]
    assert np.allclose([s for _, s in got], [s for _, s in want], rtol=0, atol=1e-9)


def test_recommend_dispatch_and_fallback(toy_index):
    r = Retriever(toy_index)
    rec = r.recommend(AlgorithmId.MLT_TITLE, title="Graph parsing methods", doc_id="d1")
    assert rec.fallback is False and rec.used is AlgorithmId.MLT_TITLE
    assert "d1" not in rec.ranked.doc_ids()
    fb = r.recommend(AlgorithmId.MLT_TITLE_ABSTRACT, title="graph parsing", doc_id="unknown")
    assert fb.fallback is True and fb.used is AlgorithmId.STD_TITLE
    plain = r.run(AlgorithmId.STD_TITLE, "graph parsing", None, 7)
    assert fb.ranked.entries == plain.entries
    std = r.recommend(AlgorithmId.STD_TITLE, title="graph parsing", doc_id="d1", k=7)
    assert std.fallback is False and len(std.ranked) <= 7


def test_recommend_limit_seven(planted_index, planted_store):
    r = Retriever(planted_index)
    doc = planted_store.documents()[0]
    for a in ALGORITHMS:
        assert len(r.recommend(a, doc.title, doc.doc_id, k=7).ranked) == 7


def test_determinism(toy_index):
    q = Query((("parsing", 1.0), ("speech", 1.0)), ("title", "abstract"))
    assert Retriever(toy_index).execute(q, 5) == Retriever(toy_index).execute(q, 5)


corpus_strategy = st.lists(
    st.tuples(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6),
              st.one_of(st.none(), st.lists(st.sampled_from("abcdefgh"), max_size=8))),
    min_size=1, max_size=25,
)


@settings(max_examples=80, deadline=None)
@given(corpus_strategy, st.lists(st.sampled_from("abcdefgh"), min_size=1, max_size=4),
       st.sampled_from(list(FieldSet)), st.integers(1, 12), st.data())
def test_bruteforce_equivalence(spec, words, field_set, k, data):
    docs = [Document(f"{i:02d}", " ".join(t), None if a is None else " ".join(a))
            for i, (t, a) in enumerate(spec)]
    r = Retriever(build_index(docs))
    q = r.standard_query(" ".join(words), field_set)
    exclude = data.draw(st.sampled_from([None] + [d.doc_id for d in docs]))
    got = r.execute(q, k, exclude).entries
    oracles.check_ranking(got, oracles.brute_scores(docs, q.terms, q.fields), k, exclude)
    # term-vector query against the same oracle
    src = data.draw(st.sampled_from(docs))
    mq = r.mlt_query(src.doc_id, field_set)
    want_terms = oracles.brute_mlt_terms(docs, src.doc_id, field_set.fields)
    assert [t for t, _ in mq.terms] == [t for t, _ in want_terms]
    assert np.allclose([w for _, w in mq.terms], [w for _, w in want_terms], rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(corpus_strategy, st.lists(st.sampled_from("abc"), min_size=1, max_size=3))
def test_frozen_idf_scores_unchanged_by_nonmatching_doc(spec, words):
    docs = [Document(f"{i:02d}", " ".join(t), None if a is None else " ".join(a))
            for i, (t, a) in enumerate(spec)]
    q = Retriever(build_index(docs)).standard_query(" ".join(words), FieldSet.TITLE)
    before = oracles.brute_scores(docs, q.terms, q.fields)
    # with N and df frozen, the score formula sees only the matched documents' own fields
    extra = docs + [Document("zz", "xyzzy")]
    stats = oracles.field_stats(docs, "title")
    after = {}
    for d in extra:
        toks = oracles.field_tokens(d, "title")
        total = matched = 0
        for t, b in q.terms:
            f = toks.count(t)
            if f:
                matched += 1
                w = oracles.idf(stats[1][t], stats[0])
                total += b * np.sqrt(f) * w * w / np.sqrt(len(toks))
        after[d.doc_id] = total * matched / len(q.terms)
    for did, s in before.items():
        assert after[did] == pytest.approx(s, abs=1e-12)
    assert after["zz"] == 0


def test_rounding_ties_ordered_by_doc_id():
    # "a" scores sqrt(2)/sqrt(4), "b" 1/sqrt(2): equal, but not bitwise
    docs = [Document("b", "x y"), Document("a", "x x y z")]
    r = Retriever(build_index(docs))
    res = r.execute(Query((("x", 1.0),), ("title",)), 5)
    s = dict(res.entries)
    assert abs(s["a"] - s["b"]) < 1e-12
    assert res.doc_ids() == ["a", "b"]
    scores = np.array([1.0, 1.0 + 1e-15, 0.5, 0.0, 2.0])
    assert rank_candidates(scores, 10).tolist() == [4, 0, 1, 2]
