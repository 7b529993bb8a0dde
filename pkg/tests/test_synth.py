from collections import Counter

from metarec.synth import REGIME_BEST, planted_corpus


def test_deterministic():
    a, b = planted_corpus(3), planted_corpus(3)
    assert [d.to_json() for d in a.documents] == [d.to_json() for d in b.documents]
    assert a.judgments == b.judgments


def test_write(tmp_path):
    paths = planted_corpus(0, n_topics=6, n_filler=5).write(tmp_path)
    assert all(p.exists() for p in paths.values())
    assert paths["judgments"].read_text().startswith("researcher_id,doc_id\n")


def test_regimes_drive_labels(planted, planted_dataset):
    # most labels follow the regime's planted best algorithm
    hits = Counter(planted.regime_of_doc[i.doc_id] for i in planted_dataset
                   if i.best is REGIME_BEST[planted.regime_of_doc[i.doc_id]])
    total = Counter(planted.regime_of_doc[i.doc_id] for i in planted_dataset)
    assert hits["title"] / total["title"] > 0.9
    assert hits["abstract"] / total["abstract"] > 0.9
    assert hits["cross"] / total["cross"] > 0.4
