"""Tokenizer and per-field inverted index with TF-IDF statistics."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

SNAPSHOT_VERSION = 1
FIELDS = ("title", "abstract")

_SPLIT = re.compile(r"[\W_]+")

# Short English list, used only when AnalyzerConfig.stopwords is on.
STOPWORDS = frozenset(
    "a an and are as at be but by for from has have in into is it its of on or "
    "that the their then there these this to was were will with".split()
)


@dataclass(frozen=True)
class AnalyzerConfig:
    stem: bool = False
    stopwords: bool = False


def _s_stem(term: str) -> str:
    # plural-only stemmer: ies->y, es->e, s->''
    if len(term) > 3 and term.endswith("ies") and not term.endswith(("eies", "aies")):
        return term[:-3] + "y"
    if len(term) > 3 and term.endswith("es") and not term.endswith(("aes", "ees", "oes")):
        return term[:-1]
    if len(term) > 2 and term.endswith("s") and not term.endswith(("us", "ss")):
        return term[:-1]
    return term


def tokenize(text: str | None, config: AnalyzerConfig | None = None) -> list[str]:
    """Lowercase and split on every non-alphanumeric character.

    >>> tokenize("TF-IDF: re-weighting, 2019!")
    ['tf', 'idf', 're', 'weighting', '2019']
    """
    if not text:
        return []
    tokens = [t for t in _SPLIT.split(text.lower()) if t]
    if config is not None:
        if config.stopwords:
            tokens = [t for t in tokens if t not in STOPWORDS]
        if config.stem:
            tokens = [_s_stem(t) for t in tokens]
    return tokens


def idf(df: int, n_docs: int) -> float:
    """Classic Lucene idf, ``1 + ln(N / (df + 1))``."""
    if n_docs <= 0:
        raise ValueError("idf undefined on an empty index")
    return 1.0 + math.log(n_docs / (df + 1))


def tf_weight(freq: int) -> float:
    return math.sqrt(freq)


class FieldIndex:
    """Inverted index for one field, stored as CSR arrays over term ids.

    Document positions refer to ``CorpusIndex.doc_ids``; ``doc_count`` counts
    only documents that carry the field.
    """

    def __init__(self, field, terms, indptr, post_docs, post_freqs, doc_lengths, doc_count):
        self.field = field
        self.terms = list(terms)
        self.term_ids = {t: i for i, t in enumerate(self.terms)}
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.post_docs = np.asarray(post_docs, dtype=np.int64)
        self.post_freqs = np.asarray(post_freqs, dtype=np.int64)
        self.doc_lengths = np.asarray(doc_lengths, dtype=np.int64)
        self.doc_count = int(doc_count)
        # forward view, used to build term-vector queries
        self._forward: list[dict[str, int]] | None = None
        with np.errstate(divide="ignore"):
            self.inv_norm = np.where(self.doc_lengths > 0,
                                     1.0 / np.sqrt(np.maximum(self.doc_lengths, 1)), 0.0)

    @classmethod
    def build(cls, field, token_lists, present, n_total):
        counts = [Counter(toks) for toks in token_lists]
        vocab = sorted({t for c in counts for t in c})
        term_ids = {t: i for i, t in enumerate(vocab)}
        per_term: list[list[tuple[int, int]]] = [[] for _ in vocab]
        for d, c in enumerate(counts):
            for t in sorted(c):
                per_term[term_ids[t]].append((d, c[t]))
        indptr = np.zeros(len(vocab) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(p) for p in per_term])
        post_docs = np.array([d for p in per_term for d, _ in p], dtype=np.int64)
        post_freqs = np.array([f for p in per_term for _, f in p], dtype=np.int64)
        lengths = np.array([len(t) for t in token_lists], dtype=np.int64)
        if n_total == 0:
            lengths = np.zeros(0, dtype=np.int64)
        return cls(field, vocab, indptr, post_docs, post_freqs, lengths, sum(present))

    def df(self, term: str) -> int:
        i = self.term_ids.get(term)
        return 0 if i is None else int(self.indptr[i + 1] - self.indptr[i])

    def idf(self, term: str) -> float:
        return idf(self.df(term), self.doc_count)

    def postings(self, term: str, doc_ids=None) -> list[tuple]:
        i = self.term_ids.get(term)
        if i is None:
            return []
        lo, hi = self.indptr[i], self.indptr[i + 1]
        docs = self.post_docs[lo:hi].tolist()
        if doc_ids is not None:
            docs = [doc_ids[d] for d in docs]
        return list(zip(docs, self.post_freqs[lo:hi].tolist()))

    def term_vector(self, doc: int) -> dict[str, int]:
        if self._forward is None:
            fwd: list[dict[str, int]] = [{} for _ in range(len(self.doc_lengths))]
            for t, term in enumerate(self.terms):
                for p in range(self.indptr[t], self.indptr[t + 1]):
                    fwd[self.post_docs[p]][term] = int(self.post_freqs[p])
            self._forward = fwd
        return self._forward[doc]

    def to_dict(self) -> dict:
        return {
            "field": self.field,
            "doc_count": self.doc_count,
            "terms": self.terms,
            "indptr": self.indptr.tolist(),
            "post_docs": self.post_docs.tolist(),
            "post_freqs": self.post_freqs.tolist(),
            "doc_lengths": self.doc_lengths.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "FieldIndex":
        return cls(d["field"], d["terms"], d["indptr"], d["post_docs"], d["post_freqs"],
                   d["doc_lengths"], d["doc_count"])

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldIndex) and self.to_dict() == other.to_dict()


class CorpusIndex:
    """Title and abstract field indexes over one corpus.

    Documents are positioned in ascending ``doc_id`` order, so ranking ties
    broken by position are ties broken by doc id.
    """

    def __init__(self, doc_ids, fields: dict[str, FieldIndex], config: AnalyzerConfig):
        self.doc_ids = list(doc_ids)
        self.position = {d: i for i, d in enumerate(self.doc_ids)}
        self.fields = fields
        self.config = config

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def __getitem__(self, field: str) -> FieldIndex:
        return self.fields[field]

    def tokenize(self, text) -> list[str]:
        return tokenize(text, self.config)

    def snapshot(self) -> dict:
        return {
            "version": SNAPSHOT_VERSION,
            "analyzer": asdict(self.config),
            "doc_ids": self.doc_ids,
            "fields": {f: self.fields[f].to_dict() for f in FIELDS},
        }

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.snapshot(), separators=(",", ":")), encoding="utf-8")
        return path

    @classmethod
    def from_snapshot(cls, snap) -> "CorpusIndex":
        if snap.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported index snapshot version {snap.get('version')!r}")
        fields = {f: FieldIndex.from_dict(snap["fields"][f]) for f in FIELDS}
        return cls(snap["doc_ids"], fields, AnalyzerConfig(**snap["analyzer"]))

    @classmethod
    def load(cls, path) -> "CorpusIndex":
        return cls.from_snapshot(json.loads(Path(path).read_text(encoding="utf-8")))


def build_index(corpus, config: AnalyzerConfig | None = None) -> CorpusIndex:
    """Index titles and abstracts of every document in ``corpus``.

    ``corpus`` is a CorpusStore or any iterable of Documents.
    """
    config = config or AnalyzerConfig()
    docs = corpus.documents() if hasattr(corpus, "documents") else list(corpus)
    docs = sorted(docs, key=lambda d: d.doc_id)
    titles = [tokenize(d.title, config) for d in docs]
    abstracts = [tokenize(d.abstract, config) for d in docs]
    fields = {
        "title": FieldIndex.build("title", titles, [True] * len(docs), len(docs)),
        "abstract": FieldIndex.build("abstract", abstracts,
                                     [d.abstract is not None for d in docs], len(docs)),
    }
    return CorpusIndex([d.doc_id for d in docs], fields, config)
