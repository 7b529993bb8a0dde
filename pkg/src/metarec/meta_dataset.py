"""Per-instance training data: run every base algorithm for each (researcher,
relevant document) pair, score by F1, label the winner, attach meta-features."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

from metarec.corpus import CorpusStore, Document, JudgmentSet
from metarec.metrics import PRF1, prf1
from metarec.retrieval import ALGORITHMS, AlgorithmId, EmptyQueryError, Retriever
from metarec.text_index import CorpusIndex, build_index

log = logging.getLogger(__name__)

OFFLINE_SCHEMA = ("collection_id", "title_chars", "title_words")
ONLINE_SCHEMA = ("title_chars", "title_words", "hour_of_day")
FEATURES = ("collection_id", "title_chars", "title_words", "hour_of_day")

# F1 ties go to the earliest entry
LABEL_PRIORITY = (
    AlgorithmId.MLT_TITLE_ABSTRACT,
    AlgorithmId.MLT_TITLE,
    AlgorithmId.STD_TITLE_ABSTRACT,
    AlgorithmId.STD_TITLE,
)


@dataclass(frozen=True)
class FeatureVector:
    collection_id: str | None = None
    title_chars: int = 0
    title_words: int = 0
    hour_of_day: int | None = None

    def present(self) -> tuple[str, ...]:
        return tuple(f for f in FEATURES if getattr(self, f) is not None)

    def get(self, name: str):
        return getattr(self, name)


def _hour(timestamp, tz) -> int:
    if isinstance(tz, str):
        tz = ZoneInfo(tz)
    if isinstance(timestamp, (int, float)):
        timestamp = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    if timestamp.tzinfo is not None and tz is not None:
        timestamp = timestamp.astimezone(tz)
    return timestamp.hour


def extract_meta_features(doc: Document | str, timestamp=None, tz="UTC",
                          collection_id: str | None = None) -> FeatureVector:
    """Surface features of the raw title; ``hour_of_day`` only with a timestamp.

    ``doc`` may be a bare title, in which case ``collection_id`` is taken from
    the keyword (None leaves it absent).
    """
    if isinstance(doc, Document):
        title, collection = doc.title, doc.collection_id
    else:
        title, collection = doc, collection_id
    hour = None if timestamp is None else _hour(timestamp, tz)
    return FeatureVector(collection, len(title), len(title.split()), hour)


@dataclass
class MetaInstance:
    researcher_id: str
    doc_id: str
    features: FeatureVector
    best: AlgorithmId
    scores: dict[AlgorithmId, PRF1] | None = None

    @property
    def label(self) -> int:
        return self.best.index

    def f1(self, algorithm: AlgorithmId) -> float:
        return self.scores[algorithm].f1


@dataclass
class MetaDataset:
    instances: list[MetaInstance]
    schema: tuple[str, ...] = OFFLINE_SCHEMA
    dropped: int = 0
    k: int | None = None

    def __len__(self) -> int:
        return len(self.instances)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return MetaDataset(self.instances[i], self.schema)
        return self.instances[i]

    def __iter__(self):
        return iter(self.instances)

    def subset(self, indices) -> "MetaDataset":
        return MetaDataset([self.instances[i] for i in indices], self.schema)

    def labels(self) -> list[int]:
        return [inst.label for inst in self.instances]

    @property
    def has_scores(self) -> bool:
        return bool(self.instances) and all(i.scores is not None for i in self.instances)

    # CSV layout: the Table-1 columns, four f1 columns and the label, followed
    # by precision/recall columns so offline evaluation can run from the file.
    def columns(self) -> list[str]:
        id_col = "researcher_id" if "collection_id" in self.schema else "request_id"
        cols = [id_col, "doc_id", *self.schema]
        if self.has_scores:
            cols += [f"f1_{a}" for a in ALGORITHMS]
        cols.append("best")
        if self.has_scores:
            cols += [f"p_{a}" for a in ALGORITHMS] + [f"r_{a}" for a in ALGORITHMS]
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for inst in self.instances:
            row = [inst.researcher_id, inst.doc_id]
            row += ["" if inst.features.get(f) is None else inst.features.get(f) for f in self.schema]
            if self.has_scores:
                row += [repr(inst.scores[a].f1) for a in ALGORITHMS]
            row.append(inst.best.value)
            if self.has_scores:
                row += [repr(inst.scores[a].precision) for a in ALGORITHMS]
                row += [repr(inst.scores[a].recall) for a in ALGORITHMS]
            w.writerow(row)
        return buf.getvalue()

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="utf-8")
        return path

    @classmethod
    def from_csv(cls, text: str) -> "MetaDataset":
        reader = csv.DictReader(io.StringIO(text))
        cols = reader.fieldnames or []
        if "best" not in cols:
            raise ValueError("dataset CSV lacks a 'best' column")
        schema = tuple(f for f in FEATURES if f in cols)
        id_col = "researcher_id" if "researcher_id" in cols else "request_id"
        has_f1 = all(f"f1_{a}" in cols for a in ALGORITHMS)
        has_pr = has_f1 and all(f"p_{a}" in cols and f"r_{a}" in cols for a in ALGORITHMS)
        instances = []
        for row in reader:
            fv = FeatureVector(
                collection_id=row["collection_id"] if "collection_id" in schema else None,
                title_chars=int(row["title_chars"]),
                title_words=int(row["title_words"]),
                hour_of_day=int(row["hour_of_day"]) if "hour_of_day" in schema else None,
            )
            scores = None
            if has_f1:
                scores = {}
                for a in ALGORITHMS:
                    f = float(row[f"f1_{a}"])
                    p = float(row[f"p_{a}"]) if has_pr else float("nan")
                    r = float(row[f"r_{a}"]) if has_pr else float("nan")
                    scores[a] = PRF1(p, r, f)
            instances.append(MetaInstance(row[id_col], row["doc_id"], fv,
                                          AlgorithmId(row["best"]), scores))
        return cls(instances, schema)

    @classmethod
    def load(cls, path) -> "MetaDataset":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


def best_algorithm(scores: dict[AlgorithmId, PRF1]) -> AlgorithmId:
    best = LABEL_PRIORITY[0]
    for a in LABEL_PRIORITY[1:]:
        if scores[a].f1 > scores[best].f1:
            best = a
    return best


def label_instance(retriever: Retriever, doc: Document, judgment: JudgmentSet,
                   k: int = 10) -> MetaInstance | None:
    """Score all four algorithms for one query document; None means dropped."""
    relevant = judgment.relevant_doc_ids - {doc.doc_id}
    if not relevant:
        return None
    scores: dict[AlgorithmId, PRF1] = {}
    any_results = False
    for a in ALGORITHMS:
        try:
            ranked = retriever.run(a, doc.title, doc.doc_id, k, exclude=doc.doc_id)
        except EmptyQueryError:
            ranked = None
        retrieved = ranked.doc_ids() if ranked else []
        any_results = any_results or bool(retrieved)
        scores[a] = prf1(retrieved, relevant)
    if not any_results:
        return None
    return MetaInstance(judgment.researcher_id, doc.doc_id, extract_meta_features(doc),
                        best_algorithm(scores), scores)


def build_meta_dataset(corpus: CorpusStore, k: int = 10, index: CorpusIndex | None = None,
                       retriever: Retriever | None = None) -> MetaDataset:
    if retriever is None:
        retriever = Retriever(index if index is not None else build_index(corpus))
    instances, dropped = [], 0
    for judgment in corpus.judgments():
        for doc_id in sorted(judgment.relevant_doc_ids):
            inst = label_instance(retriever, corpus.get_document(doc_id), judgment, k)
            if inst is None:
                dropped += 1
            else:
                instances.append(inst)
    log.info("meta-dataset: %d instances, %d dropped", len(instances), dropped)
    return MetaDataset(instances, OFFLINE_SCHEMA, dropped, k)
