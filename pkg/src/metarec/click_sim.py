"""Simulated users for the online A/B experiment.

Requests are drawn from the judgment pairs: a researcher's document is the
query, the rest of that researcher's documents are what they would click on.
Clicks follow an independent position-biased Bernoulli model, no cascade.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from metarec import rng as crng
from metarec.corpus import CorpusStore
from metarec.learners.models import TrainedModel
from metarec.serving.events import CtrReport, EventLog, ctr_report
from metarec.serving.service import RecommendationService, ServiceConfig
from metarec.text_index import CorpusIndex, build_index

# 2017-07-14 02:40 UTC; request i is issued ``interval`` seconds after request i-1
DEFAULT_START = 1_500_000_000.0
DEFAULT_INTERVAL = 37.0


@dataclass(frozen=True)
class ClickModel:
    base_click_prob: float = 0.2
    position_decay: float = 0.7
    noise_click_prob: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.base_click_prob <= 1.0:
            raise ValueError(f"base_click_prob must be in [0, 1], got {self.base_click_prob}")
        if not 0.0 < self.position_decay <= 1.0:
            raise ValueError(f"position_decay must be in (0, 1], got {self.position_decay}")
        if not 0.0 <= self.noise_click_prob < 1.0:
            raise ValueError(f"noise_click_prob must be in [0, 1), got {self.noise_click_prob}")

    @classmethod
    def relevance_blind(cls, p: float = 0.2, position_decay: float = 0.7, seed: int = 0) -> "ClickModel":
        return cls(p, position_decay, p, seed)

    def probability(self, position: int, relevant: bool) -> float:
        base = self.base_click_prob if relevant else self.noise_click_prob
        return base * self.position_decay ** (position - 1)

    def probabilities(self, relevance) -> np.ndarray:
        rel = np.asarray(relevance, dtype=bool)
        decay = self.position_decay ** np.arange(rel.shape[0], dtype=np.float64)
        return np.where(rel, self.base_click_prob, self.noise_click_prob) * decay


def simulate_session(items, relevant, model: ClickModel, rng: np.random.Generator) -> set[int]:
    """Clicked positions (1-based) for one delivered list."""
    doc_ids = items.doc_ids() if hasattr(items, "doc_ids") else [
        it["doc_id"] if isinstance(it, dict) else it for it in items]
    if len(doc_ids) > 7:
        raise ValueError(f"at most 7 items per session, got {len(doc_ids)}")
    if not doc_ids:
        return set()
    probs = model.probabilities([d in relevant for d in doc_ids])
    draws = rng.random(len(doc_ids))
    return {i + 1 for i in np.flatnonzero(draws < probs).tolist()}


@dataclass
class SimConfig:
    n_requests: int = 100_000
    seed: int = 0
    click_model: ClickModel = field(default_factory=ClickModel)
    arm_split: float = 0.5
    limit: int = 7
    # share of requests sent without a doc id, forcing the fallback for term-vector picks
    drop_doc_id_rate: float = 0.0
    start_ts: float = DEFAULT_START
    interval: float = DEFAULT_INTERVAL
    timezone: str = "UTC"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        cm = d.pop("click_model", None)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown simulation config keys: {sorted(unknown)}")
        cfg = cls(**d)
        if cm is not None:
            cfg.click_model = cm if isinstance(cm, ClickModel) else ClickModel(**cm)
        return cfg

    @classmethod
    def load(cls, path) -> "SimConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SimReport:
    requests: int
    ctr: CtrReport
    config: SimConfig
    clicks_logged: int
    ground_truth: dict | None = None

    @property
    def clicks(self) -> int:
        return self.ctr.total.clicks

    def to_dict(self) -> dict:
        return {
            "requests": self.requests,
            "clicks_logged": self.clicks_logged,
            "config": self.config.to_dict(),
            "ctr": self.ctr.to_dict(),
            "ground_truth": self.ground_truth,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerows(self.ctr.to_csv_rows())
        return buf.getvalue()

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"json": out / "sim_report.json", "csv": out / "sim_ctr.csv"}
        paths["json"].write_text(self.to_json())
        paths["csv"].write_text(self.to_csv())
        return paths


def request_pairs(corpus: CorpusStore) -> list[tuple[str, str]]:
    return [(j.researcher_id, d) for j in corpus.judgments() for d in sorted(j.relevant_doc_ids)]


def run_online_sim(config: SimConfig, corpus: CorpusStore, model: TrainedModel | str | Path | None,
                   index: CorpusIndex | None = None, log_path=None,
                   ground_truth: dict | None = None) -> SimReport:
    """Drive an in-process service with ``config.n_requests`` simulated requests."""
    if model is not None and not isinstance(model, TrainedModel):
        model = TrainedModel.load(model)
    index = index if index is not None else build_index(corpus)
    log = EventLog(log_path)
    service = RecommendationService(
        index, corpus, model, log,
        ServiceConfig(seed=config.seed, arm_split=config.arm_split, timezone=config.timezone),
    )
    # serving draws arms from its own counter; continuing a log would shift them
    first = len(log)
    clicks_before = log.click_events
    pairs = request_pairs(corpus)
    if config.n_requests and not pairs:
        raise ValueError("simulation needs at least one judgment pair")
    relevant = {j.researcher_id: j.relevant_doc_ids for j in corpus.judgments()}
    cm = config.click_model
    try:
        for i in range(first, first + config.n_requests):
            researcher, doc_id = pairs[crng.choice(config.seed, crng.STREAM_REQUEST, i, len(pairs))]
            title = corpus.get_document(doc_id).title
            send_id = doc_id
            if config.drop_doc_id_rate and \
                    crng.uniform(config.seed, crng.STREAM_DROP_DOC, i) < config.drop_doc_id_rate:
                send_id = None
            resp = service.handle_recommend(title=title, doc_id=send_id, limit=config.limit,
                                            timestamp=config.start_ts + i * config.interval)
            truth = relevant[researcher] - {doc_id}
            clicked = simulate_session(resp["items"], truth, cm, crng.generator(cm.seed, crng.STREAM_CLICKS, i))
            for pos in sorted(clicked):
                service.record_click(resp["request_id"], pos)
        report = SimReport(config.n_requests, ctr_report(log.snapshot()[first:]), config,
                           log.click_events - clicks_before, ground_truth)
    finally:
        log.close()
    return report
