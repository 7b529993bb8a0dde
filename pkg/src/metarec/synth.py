"""Planted-regime synthetic corpus.

Each researcher follows one topic. A topic lives in one of two regimes that
decide where its relevance signal sits:

``title``     long titles built from topic title words; abstracts borrow the
              abstract vocabulary of a random *other* topic, so anything that
              reads the abstract is led astray.
``abstract``  short titles of generic words; abstracts carry the topic
              vocabulary, so only the title+abstract term-vector query finds
              related work.
``cross``     titles hold only a couple of topic title words while the
              abstracts repeat that vocabulary next to a decoy topic's words:
              searching abstracts with the title terms works best.

Regimes are visible through meta-features: collections ``J01``/``J02`` are
title-regime, ``W01``/``W02`` abstract-regime, ``P01``/``P02`` cross-regime,
and the mixed collection ``C00`` holds title and abstract topics, separable
only by title length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from metarec.corpus import CorpusStore, Document
from metarec.retrieval import AlgorithmId

_CONSONANTS = list("bcdfgklmnprstvz")
_VOWELS = list("aeiou")

REGIME_BEST = {
    "title": AlgorithmId.MLT_TITLE,
    "abstract": AlgorithmId.MLT_TITLE_ABSTRACT,
    "cross": AlgorithmId.STD_TITLE_ABSTRACT,
}
COLLECTIONS = {"title": ("J01", "J02"), "abstract": ("W01", "W02"), "cross": ("P01", "P02")}
MIXED = "C00"


@dataclass
class SynthCorpus:
    documents: list[Document]
    judgments: list[tuple[str, str]]
    regime_of_doc: dict[str, str] = field(default_factory=dict)

    def ground_truth(self) -> dict:
        return {
            "regimes": {r: {"best_algorithm": a.value,
                            "collections": list(COLLECTIONS[r]) + ([MIXED] if r != "cross" else [])}
                        for r, a in REGIME_BEST.items()},
            "mixed_collection_rule": "title_words >= 7 -> title regime, <= 4 -> abstract regime",
            "doc_counts": {r: sum(v == r for v in self.regime_of_doc.values()) for r in REGIME_BEST},
        }

    def store(self) -> CorpusStore:
        store = CorpusStore()
        for d in self.documents:
            store.add_document(d)
        for r, d in self.judgments:
            store.add_judgment(r, d)
        return store

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        corpus = out / "corpus.jsonl"
        judgments = out / "judgments.csv"
        truth = out / "ground_truth.json"
        corpus.write_text("".join(d.to_json() + "\n" for d in self.documents), encoding="utf-8")
        judgments.write_text("researcher_id,doc_id\n" + "".join(f"{r},{d}\n" for r, d in self.judgments))
        truth.write_text(json.dumps(self.ground_truth(), indent=2, sort_keys=True) + "\n")
        return {"corpus": corpus, "judgments": judgments, "ground_truth": truth}


def _words(rng: np.random.Generator, n: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        syl = int(rng.integers(2, 4))
        w = "".join(rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(syl))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


def _sentence(rng, pools_weights, length):
    pools, weights = zip(*pools_weights)
    which = rng.choice(len(pools), size=length, p=np.asarray(weights) / sum(weights))
    return " ".join(str(rng.choice(pools[i])) for i in which)


def planted_corpus(seed: int = 0, n_topics: int = 24, docs_per_topic=(10, 16),
                   n_filler: int = 80) -> SynthCorpus:
    rng = np.random.default_rng(seed)
    taken: set[str] = set()
    generic_title = _words(rng, 60, taken)
    generic_abstract = _words(rng, 150, taken)
    title_vocab = [_words(rng, 8, taken) for _ in range(n_topics)]
    abstract_vocab = [_words(rng, 15, taken) for _ in range(n_topics)]

    regimes = [("title", "abstract", "cross")[t % 3] for t in range(n_topics)]
    docs, judgments, regime_of = [], [], {}
    next_id = 1000

    def make_doc(topic, regime, collection):
        nonlocal next_id
        if regime == "title":
            length = int(rng.integers(7, 13))
            n_topic = int(rng.integers(4, 7))
            words = list(rng.choice(title_vocab[topic], size=n_topic)) + \
                list(rng.choice(generic_title, size=length - n_topic))
            rng.shuffle(words)
            title = " ".join(str(w) for w in words).capitalize()
            decoy = int(rng.choice([d for d in range(n_topics) if d != topic]))
            abstract = _sentence(rng, [(abstract_vocab[decoy], 0.6), (generic_abstract, 0.4)],
                                 int(rng.integers(25, 41)))
        elif regime == "cross":
            words = list(rng.choice(title_vocab[topic], size=2)) + \
                list(rng.choice(generic_title, size=int(rng.integers(3, 6))))
            rng.shuffle(words)
            title = " ".join(str(w) for w in words).capitalize()
            decoy = int(rng.choice([d for d in range(n_topics) if d != topic]))
            abstract = _sentence(rng, [(title_vocab[topic], 0.25), (abstract_vocab[decoy], 0.55),
                                       (generic_abstract, 0.2)], int(rng.integers(25, 41)))
        else:
            title = _sentence(rng, [(generic_title, 1.0)], int(rng.integers(2, 5))).capitalize()
            abstract = _sentence(rng, [(abstract_vocab[topic], 0.6), (generic_abstract, 0.4)],
                                 int(rng.integers(25, 41)))
        doc = Document(str(next_id), title, abstract + ".", collection)
        next_id += 1
        return doc

    for t in range(n_topics):
        regime = regimes[t]
        # every fourth title/abstract topic sits in the mixed collection
        if regime != "cross" and t % 4 == 3:
            collection = MIXED
        else:
            collection = COLLECTIONS[regime][(t // 3) % 2]
        n_docs = int(rng.integers(docs_per_topic[0], docs_per_topic[1] + 1))
        for _ in range(n_docs):
            doc = make_doc(t, regime, collection)
            docs.append(doc)
            regime_of[doc.doc_id] = regime
            judgments.append((f"y{t + 1}", doc.doc_id))

    for _ in range(n_filler):
        title = _sentence(rng, [(generic_title, 1.0)], int(rng.integers(3, 10))).capitalize()
        abstract = _sentence(rng, [(generic_abstract, 1.0)], int(rng.integers(20, 41)))
        coll = str(rng.choice(["J01", "J02", "W01", "W02", MIXED]))
        docs.append(Document(str(next_id), title, abstract + ".", coll))
        next_id += 1

    return SynthCorpus(docs, judgments, regime_of)


# collection -> (threshold on title_chars, label below, label at or above)
RULE = {"A": (60, 0, 1), "B": (60, 2, 3), "C": (60, 1, 2)}


def rule_label(collection_id: str, title_chars: int) -> int:
    thr, below, above = RULE[collection_id]
    return below if title_chars < thr else above


def planted_rule_dataset(n: int = 400, seed: int = 0):
    """Meta-dataset whose label is a threshold function of title length per
    collection; no retrieval scores."""
    from metarec.meta_dataset import OFFLINE_SCHEMA, FeatureVector, MetaDataset, MetaInstance
    from metarec.retrieval import ALGORITHMS

    rng = np.random.default_rng(seed)
    collections = sorted(RULE)
    instances = []
    for i in range(n):
        coll = collections[int(rng.integers(len(collections)))]
        chars = int(rng.integers(10, 121))
        words = max(1, int(round(chars / 7 + rng.normal(0, 1))))
        fv = FeatureVector(coll, chars, words)
        instances.append(MetaInstance(f"r{i}", f"{i}", fv, ALGORITHMS[rule_label(coll, chars)]))
    return MetaDataset(instances, OFFLINE_SCHEMA)
