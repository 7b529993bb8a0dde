"""The four base algorithms: standard and term-vector queries over Title or
Title+Abstract, scored with classic TF-IDF practical scoring."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from metarec import kernels
from metarec.text_index import CorpusIndex, idf, tf_weight


class EmptyQueryError(ValueError):
    pass


class NotIndexedError(KeyError):
    pass


class Strategy(str, enum.Enum):
    STANDARD = "std"
    TERM_VECTOR = "mlt"


class FieldSet(str, enum.Enum):
    TITLE = "title"
    TITLE_ABSTRACT = "title_abstract"

    @property
    def fields(self) -> tuple[str, ...]:
        return ("title",) if self is FieldSet.TITLE else ("title", "abstract")


class AlgorithmId(str, enum.Enum):
    """Base algorithms in canonical order; ``index`` is the learner class id."""

    MLT_TITLE = "mlt_title"
    MLT_TITLE_ABSTRACT = "mlt_title_abstract"
    STD_TITLE = "std_title"
    STD_TITLE_ABSTRACT = "std_title_abstract"

    @property
    def strategy(self) -> Strategy:
        return Strategy.TERM_VECTOR if self.value.startswith("mlt") else Strategy.STANDARD

    @property
    def field_set(self) -> FieldSet:
        return FieldSet.TITLE_ABSTRACT if self.value.endswith("abstract") else FieldSet.TITLE

    @property
    def index(self) -> int:
        return ALGORITHMS.index(self)

    @classmethod
    def of(cls, strategy: Strategy, field_set: FieldSet) -> "AlgorithmId":
        return cls(f"{strategy.value}_{field_set.value}")

    def __str__(self) -> str:
        return self.value


ALGORITHMS: tuple[AlgorithmId, ...] = tuple(AlgorithmId)
FALLBACK = AlgorithmId.STD_TITLE

_FIELD_CODE = {"title": 0, "abstract": 1}


@dataclass(frozen=True)
class MltParams:
    max_query_terms: int = 25
    min_term_freq: int = 1
    min_doc_freq: int = 1


@dataclass(frozen=True)
class Query:
    terms: tuple[tuple[str, float], ...]
    fields: tuple[str, ...]

    def __post_init__(self):
        if not self.terms:
            raise EmptyQueryError("query has no terms")


@dataclass
class RankedList:
    entries: list[tuple[str, float]] = field(default_factory=list)

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass
class Recommendation:
    ranked: RankedList
    algorithm: AlgorithmId  # what was asked for
    used: AlgorithmId  # what actually ran
    fallback: bool = False


class Retriever:
    """Query construction and ranked retrieval over an immutable CorpusIndex."""

    def __init__(self, index: CorpusIndex, mlt_params: MltParams | None = None,
                 titles: dict[str, str] | None = None):
        self.index = index
        self.mlt_params = mlt_params or MltParams()
        self.titles = titles or {}
        title, abstract = index["title"], index["abstract"]
        self._offset = {"title": 0, "abstract": int(title.post_docs.shape[0])}
        self._post_docs = np.concatenate([title.post_docs, abstract.post_docs])
        self._post_freqs = np.concatenate([title.post_freqs, abstract.post_freqs])
        n = index.n_docs
        self._inv_norm = np.zeros((2, n), dtype=np.float64)
        if n:
            self._inv_norm[0] = title.inv_norm
            self._inv_norm[1] = abstract.inv_norm
        self._mlt_cached = lru_cache(maxsize=65536)(self._mlt_uncached)

    # -- query construction -----------------------------------------------

    def standard_query(self, title: str, field_set: FieldSet) -> Query:
        tokens = self.index.tokenize(title)
        if not tokens:
            raise EmptyQueryError(f"title {title!r} has no indexable terms")
        distinct = list(dict.fromkeys(tokens))
        return Query(tuple((t, 1.0) for t in distinct), field_set.fields)

    def mlt_query(self, doc_id: str, field_set: FieldSet) -> Query:
        return self._mlt_cached(doc_id, FieldSet(field_set))

    def _mlt_uncached(self, doc_id: str, field_set: FieldSet) -> Query:
        pos = self.index.position.get(doc_id)
        if pos is None:
            raise NotIndexedError(doc_id)
        params = self.mlt_params
        freq: dict[str, int] = {}
        best_df: dict[str, tuple[int, int]] = {}  # term -> (df, n_docs) of its idf field
        for fname in field_set.fields:
            fidx = self.index[fname]
            for term, f in fidx.term_vector(pos).items():
                freq[term] = freq.get(term, 0) + f
                df = fidx.df(term)
                # idf comes from the field (among those holding the term in this
                # doc) with the highest df; title wins ties
                if term not in best_df or df > best_df[term][0]:
                    best_df[term] = (df, fidx.doc_count)
        scored = []
        for term, f in freq.items():
            df, n = best_df[term]
            if f < params.min_term_freq or df < params.min_doc_freq:
                continue
            scored.append((-(tf_weight(f) * idf(df, n)), term))
        if not scored:
            raise EmptyQueryError(f"document {doc_id!r} yields no query terms")
        scored.sort()
        kept = scored[: params.max_query_terms]
        return Query(tuple((t, -s) for s, t in kept), field_set.fields)

    # -- execution ----------------------------------------------------------

    def raw_scores(self, query: Query) -> np.ndarray:
        """Score of every document position (zero for non-matching docs)."""
        n = self.index.n_docs
        st, sf, s0, s1, sw = [], [], [], [], []
        for qi, (term, boost) in enumerate(query.terms):
            for fname in query.fields:
                fidx = self.index[fname]
                tid = fidx.term_ids.get(term)
                if tid is None:
                    continue
                lo, hi = int(fidx.indptr[tid]), int(fidx.indptr[tid + 1])
                w = idf(hi - lo, fidx.doc_count)
                st.append(qi)
                sf.append(_FIELD_CODE[fname])
                s0.append(lo + self._offset[fname])
                s1.append(hi + self._offset[fname])
                sw.append(boost * w * w)
        if not st or n == 0:
            return np.zeros(n, dtype=np.float64)
        scores, matched = kernels.score_slots(
            n,
            np.asarray(st, dtype=np.int64), np.asarray(sf, dtype=np.int64),
            np.asarray(s0, dtype=np.int64), np.asarray(s1, dtype=np.int64),
            np.asarray(sw, dtype=np.float64),
            self._post_docs, self._post_freqs, self._inv_norm,
        )
        return (matched / len(query.terms)) * scores

    def execute(self, query: Query, k: int, exclude: str | None = None) -> RankedList:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scores = self.raw_scores(query)
        if exclude is not None:
            pos = self.index.position.get(exclude)
            if pos is not None:
                scores[pos] = 0.0
        order = rank_candidates(scores, k)
        ids = self.index.doc_ids
        return RankedList([(ids[i], float(scores[i])) for i in order])

    def run(self, algorithm: AlgorithmId, title: str, doc_id: str | None, k: int,
            exclude: str | None = None) -> RankedList:
        """Run one algorithm without any fallback handling."""
        algorithm = AlgorithmId(algorithm)
        if algorithm.strategy is Strategy.TERM_VECTOR:
            q = self.mlt_query(doc_id, algorithm.field_set)
        else:
            q = self.standard_query(title, algorithm.field_set)
        return self.execute(q, k, exclude=exclude)

    def recommend(self, algorithm: AlgorithmId, title: str | None = None,
                  doc_id: str | None = None, k: int = 7) -> Recommendation:
        """Dispatch a request; term-vector requests for unindexed docs fall back
        to the standard title query."""
        algorithm = AlgorithmId(algorithm)
        indexed = doc_id is not None and doc_id in self.index.position
        if not title and doc_id is not None:
            title = self.titles.get(doc_id)
        exclude = doc_id if indexed else None
        if algorithm.strategy is Strategy.TERM_VECTOR and not indexed:
            if not title:
                raise EmptyQueryError("fallback needs a request title")
            ranked = self.run(FALLBACK, title, None, k)
            return Recommendation(ranked, algorithm, FALLBACK, fallback=True)
        if algorithm.strategy is Strategy.STANDARD and not title:
            raise EmptyQueryError("standard query needs a title")
        ranked = self.run(algorithm, title, doc_id, k, exclude=exclude)
        return Recommendation(ranked, algorithm, algorithm, fallback=False)


# scores this close (relative) are one tie; equal real-valued scores such as
# sqrt(2)/sqrt(4) and 1/sqrt(2) can round differently
TIE_RTOL = 1e-12


def rank_candidates(scores: np.ndarray, k: int) -> np.ndarray:
    """Positions of the top-k positive scores, ties broken by position."""
    cand = np.flatnonzero(scores > 0)
    order = cand[np.lexsort((cand, -scores[cand]))]
    if order.shape[0] > 1:
        s = scores[order]
        group = np.concatenate([[0], np.cumsum(s[:-1] - s[1:] > TIE_RTOL * s[:-1])])
        order = order[np.lexsort((order, group))]
    return order[:k]


def build_standard_query(index: CorpusIndex, title: str, field_set: FieldSet) -> Query:
    return Retriever(index).standard_query(title, field_set)


def build_mlt_query(index: CorpusIndex, doc_id: str, field_set: FieldSet,
                    params: MltParams | None = None) -> Query:
    return Retriever(index, params).mlt_query(doc_id, field_set)


def execute_query(index: CorpusIndex, query: Query, k: int, exclude: str | None = None) -> RankedList:
    return Retriever(index).execute(query, k, exclude)
