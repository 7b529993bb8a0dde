"""A/B recommendation service: meta-learner arm vs. uniformly random arm."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from metarec import rng as crng
from metarec.corpus import CorpusStore
from metarec.learners.models import TrainedModel
from metarec.meta_dataset import ONLINE_SCHEMA, FeatureVector, MetaDataset, MetaInstance, extract_meta_features
from metarec.retrieval import ALGORITHMS, AlgorithmId, EmptyQueryError, Retriever
from metarec.serving.events import ClickRejected, EventLog, ImpressionRecord, ctr_report
from metarec.text_index import CorpusIndex, build_index

MAX_ITEMS = 7
INDEX_FILE = "index.json"


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


@dataclass(frozen=True)
class ServiceConfig:
    seed: int = 0
    arm_split: float = 0.5
    timezone: str = "UTC"
    max_items: int = MAX_ITEMS


class RecommendationService:
    """Index and model are shared read-only; the event log is the only
    mutable state."""

    def __init__(self, index: CorpusIndex, corpus: CorpusStore | None, model: TrainedModel | None,
                 log: EventLog | None = None, config: ServiceConfig | None = None, clock=time.time):
        self.index = index
        self.corpus = corpus
        self.model = model
        self.log = log if log is not None else EventLog()
        self.config = config or ServiceConfig()
        self.clock = clock
        titles = {d.doc_id: d.title for d in corpus.documents()} if corpus is not None else {}
        self.retriever = Retriever(index, titles=titles)
        self._titles = titles
        self._lock = threading.Lock()
        self._counter = len(self.log)
        self._predict = lru_cache(maxsize=65536)(self._predict_uncached)

    @classmethod
    def from_store(cls, store_dir, model_path=None, log_path=None,
                   config: ServiceConfig | None = None) -> "RecommendationService":
        store_dir = Path(store_dir)
        corpus = CorpusStore.load(store_dir)
        index_path = store_dir / INDEX_FILE
        index = CorpusIndex.load(index_path) if index_path.exists() else build_index(corpus)
        model = TrainedModel.load(model_path) if model_path else None
        return cls(index, corpus, model, EventLog(log_path), config)

    # -- arm & algorithm choice --------------------------------------------

    def features_for(self, title: str, doc_id: str | None, timestamp) -> FeatureVector:
        schema = self.model.schema
        doc = self.corpus.get_document(doc_id) if (self.corpus is not None and doc_id) else None
        collection = (doc.collection_id if doc is not None else "") if "collection_id" in schema else None
        fv = extract_meta_features(title, timestamp if "hour_of_day" in schema else None,
                                   self.config.timezone, collection_id=collection)
        return fv

    def _predict_uncached(self, fv: FeatureVector) -> AlgorithmId:
        return self.model.predict(fv)[0]

    def choose(self, request_index: int, title: str, doc_id: str | None, timestamp):
        seed = self.config.seed
        if crng.uniform(seed, crng.STREAM_ARM, request_index) < self.config.arm_split:
            return "meta", self._predict(self.features_for(title, doc_id, timestamp))
        return "random", ALGORITHMS[crng.choice(seed, crng.STREAM_RANDOM_ARM, request_index, len(ALGORITHMS))]

    # -- handlers -------------------------------------------------------------

    def handle_recommend(self, title: str | None = None, doc_id: str | None = None,
                         limit: int = MAX_ITEMS, timestamp: float | None = None) -> dict:
        if self.model is None:
            raise ServiceError(503, "no meta-learner model loaded")
        if not 1 <= int(limit) <= self.config.max_items:
            raise ServiceError(422, f"limit must be in 1..{self.config.max_items}")
        doc_id = doc_id or None
        if not title and doc_id is not None:
            title = self._titles.get(doc_id)
        if not title or not self.index.tokenize(title):
            raise ServiceError(422, "request title has no indexable terms")
        ts = self.clock() if timestamp is None else timestamp
        with self._lock:
            i = self._counter
            self._counter += 1
        arm, algorithm = self.choose(i, title, doc_id, ts)
        try:
            rec = self.retriever.recommend(algorithm, title=title, doc_id=doc_id, k=int(limit))
        except EmptyQueryError as exc:
            raise ServiceError(422, str(exc)) from None
        request_id = f"req-{self.config.seed}-{i:09d}"
        items = [{"doc_id": d, "title": self._titles.get(d, ""), "position": p}
                 for p, (d, _) in enumerate(rec.ranked, start=1)]
        self.log.append_impression(ImpressionRecord(
            request_id=request_id, timestamp=float(ts), arm=arm, algorithm=algorithm.value,
            used_algorithm=rec.used.value, fallback=rec.fallback, delivered=len(items),
            title=title, doc_id=doc_id, items=[it["doc_id"] for it in items],
        ))
        return {"request_id": request_id, "arm": arm, "algorithm": algorithm.value,
                "fallback": rec.fallback, "items": items}

    def record_click(self, request_id: str, position: int) -> bool:
        try:
            return self.log.record_click(request_id, position)
        except ClickRejected as exc:
            raise ServiceError(404 if "request_id" in str(exc) else 422, str(exc)) from None

    def ctr_report(self, since=None):
        return ctr_report(self.log, since)

    @property
    def rejects(self) -> int:
        return self.log.rejects


def export_training(records, tz: str = "UTC") -> MetaDataset:
    """Clicked impressions only, labelled with the algorithm that produced them."""
    if isinstance(records, EventLog):
        records = records.snapshot()
    instances = []
    for rec in records:
        if not rec.clicks:
            continue
        fv = extract_meta_features(rec.title, rec.timestamp, tz)
        instances.append(MetaInstance(rec.request_id, rec.doc_id or "", fv,
                                      AlgorithmId(rec.used_algorithm)))
    return MetaDataset(instances, ONLINE_SCHEMA)
