"""Offline experiment: stratified k-fold training of meta-learners and a
per-algorithm / overall precision-recall-F1 report with oracle and random
baselines."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from metarec import rng as crng
from metarec.learners.models import canonical_kind, train
from metarec.meta_dataset import MetaDataset
from metarec.metrics import PRF1, ZERO, mean_prf1, paired_t_test, prf1  # noqa: F401
from metarec.retrieval import ALGORITHMS, AlgorithmId

log = logging.getLogger(__name__)

SHORT = {"decision_tree": "tree", "random_forest": "rf", "gbm": "gbm", "glm": "glm"}
SIGNIFICANCE = 0.1


def random_select(seed: int, instance_index: int) -> AlgorithmId:
    return ALGORITHMS[crng.choice(seed, crng.STREAM_RANDOM_BASELINE, instance_index, len(ALGORITHMS))]


def stratified_kfold(labels, k: int = 4, seed: int = 0) -> list[np.ndarray]:
    """Partition indices into ``k`` folds; sizes and per-label counts differ
    by at most one between folds."""
    if isinstance(labels, MetaDataset):
        labels = labels.labels()
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n < k:
        raise ValueError(f"cannot split {n} instances into {k} folds")
    gen = crng.generator(seed)
    ordered = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        ordered.append(members[gen.permutation(members.shape[0])])
    ordered = np.concatenate(ordered)
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[ordered] = np.arange(n) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


@dataclass
class Row:
    section: str  # algorithm value, "oracle", "random" or "overall"
    selection: str  # "arbitrary", a model short name, "oracle" or "random"
    n: int
    metrics: PRF1

    def as_list(self):
        m = self.metrics
        return [self.section, self.selection, self.n, repr(m.precision), repr(m.recall), repr(m.f1)]


@dataclass
class EvalReport:
    rows: list[Row]
    seed: int
    k_folds: int
    folds: list[list[int]]
    models: list[str]
    absent: dict[str, str] = field(default_factory=dict)
    t_tests: dict[str, dict] = field(default_factory=dict)
    random_f1_se: float = 0.0
    instance_count: int = 0
    predictions: dict[str, list[str]] = field(default_factory=dict)

    def get(self, section: str, selection: str) -> Row | None:
        for r in self.rows:
            if r.section == section and r.selection == selection:
                return r
        return None

    def f1(self, section: str, selection: str) -> float:
        return self.get(section, selection).metrics.f1

    @property
    def oracle(self) -> PRF1:
        return self.get("oracle", "oracle").metrics

    @property
    def random(self) -> PRF1:
        return self.get("random", "random").metrics

    def overall(self, model: str) -> PRF1:
        return self.get("overall", model).metrics

    def arbitrary(self, algorithm) -> PRF1:
        return self.get(AlgorithmId(algorithm).value, "arbitrary").metrics

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "selection", "n", "precision", "recall", "f1"])
        for r in self.rows:
            w.writerow(r.as_list())
        return buf.getvalue()

    def plot_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["algorithm", "selection_mode", "metric", "value"])
        for r in self.rows:
            for name, v in zip(("precision", "recall", "f1"), r.metrics.as_tuple()):
                w.writerow([r.section, r.selection, name, repr(v)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "k_folds": self.k_folds,
            "instance_count": self.instance_count,
            "models": self.models,
            "absent": self.absent,
            "rows": [
                {"section": r.section, "selection": r.selection, "n": r.n,
                 "precision": r.metrics.precision, "recall": r.metrics.recall, "f1": r.metrics.f1}
                for r in self.rows
            ],
            "paired_t_tests": self.t_tests,
            "random_f1_standard_error": self.random_f1_se,
            "folds": self.folds,
            "predictions": self.predictions,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"table": out / "table2.csv", "json": out / "eval_report.json",
                 "plot": out / "plot_data.csv"}
        paths["table"].write_text(self.to_csv())
        paths["json"].write_text(self.to_json())
        paths["plot"].write_text(self.plot_csv())
        return paths


def run_offline_eval(dataset: MetaDataset, model_kinds=("random_forest", "gbm", "glm"),
                     k_folds: int = 4, seed: int = 0, params: dict | None = None) -> EvalReport:
    if len(dataset) == 0:
        raise ValueError("offline evaluation needs a non-empty dataset")
    if not dataset.has_scores:
        raise ValueError("dataset carries no per-algorithm scores; offline evaluation needs them")
    params = params or {}
    kinds = [canonical_kind(k) for k in model_kinds]
    names = [SHORT[k] for k in kinds]
    n = len(dataset)
    folds = stratified_kfold(dataset.labels(), k_folds, seed)

    predicted: dict[str, list[AlgorithmId | None]] = {name: [None] * n for name in names}
    absent: dict[str, str] = {}
    for fi, val in enumerate(folds):
        train_ix = np.concatenate([f for j, f in enumerate(folds) if j != fi])
        train_set = dataset.subset(train_ix.tolist())
        val_feats = [dataset[i].features for i in val]
        for kind, name in zip(kinds, names):
            if name in absent:
                continue
            try:
                model = train(kind, train_set, params.get(kind), seed=seed)
                preds = model.predict_many(val_feats)
            except Exception as exc:  # a failing learner is reported, not fatal
                log.warning("model %s failed on fold %d: %s", name, fi, exc)
                absent[name] = f"fold {fi}: {exc}"
                continue
            for i, a in zip(val, preds):
                predicted[name][i] = a
    live = [name for name in names if name not in absent]

    rows: list[Row] = []
    arbitrary_f1 = {}
    selected_f1: dict[str, dict[AlgorithmId, float]] = {name: {} for name in live}
    for a in ALGORITHMS:
        arb = mean_prf1(inst.scores[a] for inst in dataset)
        arbitrary_f1[a] = arb.f1
        rows.append(Row(a.value, "arbitrary", n, arb))
        for name in live:
            chosen = [inst.scores[a] for inst, p in zip(dataset, predicted[name]) if p is a]
            m = mean_prf1(chosen)  # never-selected algorithms report zeros with n = 0
            selected_f1[name][a] = m.f1
            rows.append(Row(a.value, name, len(chosen), m))
    rows.append(Row("oracle", "oracle", n, mean_prf1(inst.scores[inst.best] for inst in dataset)))
    rand = [inst.scores[random_select(seed, i)] for i, inst in enumerate(dataset)]
    rows.append(Row("random", "random", n, mean_prf1(rand)))
    for name in live:
        rows.append(Row("overall", name, n,
                        mean_prf1(inst.scores[p] for inst, p in zip(dataset, predicted[name]))))

    t_tests = {}
    for name in live:
        tt = paired_t_test([selected_f1[name][a] for a in ALGORITHMS],
                           [arbitrary_f1[a] for a in ALGORITHMS])
        t_tests[name] = {
            "n": tt.n,
            "mean_meta_selected_f1": math.fsum(selected_f1[name].values()) / len(ALGORITHMS),
            "mean_arbitrary_f1": math.fsum(arbitrary_f1.values()) / len(ALGORITHMS),
            "t": tt.t if math.isfinite(tt.t) else None,
            "p_value": tt.p_value if math.isfinite(tt.p_value) else None,
            "significant": bool(tt.p_value < SIGNIFICANCE) if not math.isnan(tt.p_value) else False,
        }

    rand_f1 = np.array([m.f1 for m in rand])
    se = float(rand_f1.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EvalReport(
        rows=rows,
        seed=seed,
        k_folds=k_folds,
        folds=[f.tolist() for f in folds],
        models=live,
        absent=absent,
        t_tests=t_tests,
        random_f1_se=se,
        instance_count=n,
        predictions={name: [p.value for p in predicted[name]] for name in live},
    )
