"""Meta-learners: decision tree, random forest, softmax gradient boosting and
multinomial logistic regression, all mapping FeatureVectors to one of the
four base algorithms."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from metarec import kernels
from metarec.learners.encoding import Encoder, check_schema
from metarec.learners.tree import Tree, grow_classification_tree, grow_regression_tree, stack_trees
from metarec.meta_dataset import FeatureVector, MetaDataset
from metarec.retrieval import ALGORITHMS, AlgorithmId
from metarec.rng import generator

MODEL_VERSION = 1
N_CLASSES = len(ALGORITHMS)
KINDS = ("decision_tree", "random_forest", "gbm", "glm")
ALIASES = {"tree": "decision_tree", "dt": "decision_tree", "rf": "random_forest",
           "gbm": "gbm", "glm": "glm"}

DEFAULTS = {
    "decision_tree": {"max_depth": None, "min_leaf": 1},
    "random_forest": {"n_trees": 100, "max_depth": 20, "min_leaf": 1, "features_per_split": None},
    "gbm": {"n_rounds": 100, "learning_rate": 0.1, "max_depth": 3, "min_leaf": 1},
    "glm": {"l2": 1e-3, "epochs": 500, "step": 0.1},
}


class TrainingError(RuntimeError):
    pass


def canonical_kind(kind: str) -> str:
    kind = ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}; choose from {', '.join(KINDS)}")
    return kind


@dataclass
class TrainedModel:
    kind: str
    hyperparameters: dict
    encoder: Encoder
    seed: int
    trees: list[Tree] = field(default_factory=list)
    weights: np.ndarray | None = None  # glm: (classes, 1 + columns)
    loss_trace: list[float] = field(default_factory=list)
    _stacked: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def schema(self) -> tuple[str, ...]:
        return self.encoder.schema

    # -- inference -------------------------------------------------------------

    def _stack(self):
        if self._stacked is None:
            self._stacked = stack_trees(self.trees)
        return self._stacked

    def decision(self, X: np.ndarray) -> np.ndarray:
        """Class scores (rows x 4) before normalisation."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if self.kind == "glm":
            design = np.hstack([np.ones((X.shape[0], 1)), X])
            return design @ self.weights.T
        feature, threshold, left, right, value = self._stack()
        leaves = kernels.tree_leaves(X, feature, threshold, left, right)
        tree_ix = np.arange(len(self.trees))
        if self.kind == "gbm":
            lr = self.hyperparameters["learning_rate"]
            outs = value[tree_ix[None, :], leaves, 0]  # rows x (rounds*classes)
            F = np.zeros((X.shape[0], N_CLASSES))
            for t in range(len(self.trees)):
                F[:, t % N_CLASSES] += lr * outs[:, t]
            return F
        hist = value[tree_ix[None, :], leaves]  # rows x trees x classes
        if self.kind == "decision_tree":
            return hist[:, 0, :]
        votes = np.argmax(hist, axis=2)
        return np.stack([np.bincount(v, minlength=N_CLASSES) for v in votes]).astype(np.float64)

    def predict_proba_matrix(self, X: np.ndarray) -> np.ndarray:
        scores = self.decision(X)
        if self.kind in ("gbm", "glm"):
            return softmax(scores)
        totals = scores.sum(axis=1, keepdims=True)
        return scores / np.where(totals > 0, totals, 1.0)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.decision(X), axis=1)

    def encode(self, features: list[FeatureVector]) -> np.ndarray:
        for fv in features:
            check_schema(fv, self.schema)
        return self.encoder.transform(features)

    def predict(self, features: FeatureVector) -> tuple[AlgorithmId, np.ndarray]:
        X = self.encode([features])
        probs = self.predict_proba_matrix(X)[0]
        return ALGORITHMS[int(np.argmax(self.decision(X)[0]))], probs

    def predict_many(self, features: list[FeatureVector]) -> list[AlgorithmId]:
        if not features:
            return []
        return [ALGORITHMS[i] for i in self.predict_matrix(self.encode(features))]

    # -- serialisation -----------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "version": MODEL_VERSION,
            "kind": self.kind,
            "hyperparameters": self.hyperparameters,
            "schema": list(self.schema),
            "seed": self.seed,
            "classes": [a.value for a in ALGORITHMS],
            "encoder": self.encoder.to_dict(),
        }
        if self.kind == "glm":
            d["weights"] = self.weights.tolist()
        else:
            d["trees"] = [t.to_dict() for t in self.trees]
        if self.loss_trace:
            d["loss_trace"] = self.loss_trace
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def from_dict(cls, d) -> "TrainedModel":
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model file version {d.get('version')!r}")
        if d.get("classes", [a.value for a in ALGORITHMS]) != [a.value for a in ALGORITHMS]:
            raise ValueError("model class order does not match the algorithm order")
        enc = Encoder.from_dict(d["encoder"])
        weights = np.asarray(d["weights"], dtype=np.float64) if "weights" in d else None
        trees = [Tree.from_dict(t) for t in d.get("trees", [])]
        return cls(d["kind"], d["hyperparameters"], enc, d["seed"], trees, weights,
                   d.get("loss_trace", []))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def softmax(F: np.ndarray) -> np.ndarray:
    z = F - F.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(F: np.ndarray, y: np.ndarray) -> float:
    z = F - F.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y)), y]))


# -- training ------------------------------------------------------------------


@dataclass
class EncodedMatrix:
    X: np.ndarray
    y: np.ndarray
    encoder: Encoder


def encode_dataset(data: MetaDataset, standardize: bool = False) -> EncodedMatrix:
    feats = [inst.features for inst in data]
    if not feats:
        raise TrainingError("cannot train on an empty dataset")
    enc = Encoder.fit(feats, data.schema, standardize=standardize)
    for fv in feats:
        check_schema(fv, enc.schema)
    return EncodedMatrix(enc.transform(feats), np.asarray(data.labels(), dtype=np.int64), enc)


def _params(kind, overrides):
    params = dict(DEFAULTS[kind])
    for k, v in (overrides or {}).items():
        if k not in params:
            raise ValueError(f"unknown hyperparameter {k!r} for {kind}")
        params[k] = v
    return params


def train_decision_tree(data: MetaDataset, params: dict | None = None, seed: int = 0) -> TrainedModel:
    params = _params("decision_tree", params)
    m = encode_dataset(data)
    tree = grow_classification_tree(m.X, m.y, np.arange(len(m.y)), N_CLASSES,
                                    max_depth=params["max_depth"], min_leaf=params["min_leaf"])
    return TrainedModel("decision_tree", params, m.encoder, seed, [tree])


def train_random_forest(data: MetaDataset, params: dict | None = None, seed: int = 0) -> TrainedModel:
    params = _params("random_forest", params)
    m = encode_dataset(data)
    n, p = m.X.shape
    mtry = params["features_per_split"] or max(1, math.ceil(math.sqrt(p)))
    trees = []
    for t in range(params["n_trees"]):
        rng = generator(seed, t)  # per-tree stream, independent of build order
        boot = rng.integers(0, n, size=n)
        trees.append(grow_classification_tree(m.X, m.y, boot, N_CLASSES,
                                              max_depth=params["max_depth"],
                                              min_leaf=params["min_leaf"],
                                              max_features=mtry, rng=rng))
    params = dict(params, features_per_split=mtry)
    return TrainedModel("random_forest", params, m.encoder, seed, trees)


def train_gbm(data: MetaDataset, params: dict | None = None, seed: int = 0) -> TrainedModel:
    """Multiclass softmax boosting with one Newton-step regression tree per
    class per round."""
    params = _params("gbm", params)
    m = encode_dataset(data)
    n = len(m.y)
    K = N_CLASSES
    Y = np.zeros((n, K))
    Y[np.arange(n), m.y] = 1.0
    F = np.zeros((n, K))
    rows = np.arange(n)
    lr = params["learning_rate"]
    trees, trace = [], []
    for _ in range(params["n_rounds"]):
        P = softmax(F)
        updates = np.zeros_like(F)
        for c in range(K):
            resid = Y[:, c] - P[:, c]

            def newton(ix, resid=resid):
                num = float(np.sum(resid[ix]))
                a = np.abs(resid[ix])
                den = float(np.sum(a * (1.0 - a)))
                return (K - 1) / K * num / max(den, 1e-12)

            tree = grow_regression_tree(m.X, resid, rows, newton,
                                        max_depth=params["max_depth"], min_leaf=params["min_leaf"])
            updates[:, c] = lr * tree.value[tree.apply(m.X), 0]
            trees.append(tree)
        F += updates
        trace.append(log_loss(F, m.y))
    return TrainedModel("gbm", params, m.encoder, seed, trees, loss_trace=trace)


def glm_loss_grad(W: np.ndarray, design: np.ndarray, Y: np.ndarray, l2: float):
    """L2-regularised softmax cross-entropy and its gradient. Column 0 of
    ``design`` is the intercept and is not penalised."""
    n = design.shape[0]
    F = design @ W.T
    z = F - F.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    P = np.exp(z - lse[:, None])
    pen = W.copy()
    pen[:, 0] = 0.0
    loss = float(np.mean(lse - np.sum(z * Y, axis=1)) + 0.5 * l2 * np.sum(pen * pen))
    grad = (P - Y).T @ design / n + l2 * pen
    return loss, grad


def train_glm(data: MetaDataset, params: dict | None = None, seed: int = 0) -> TrainedModel:
    params = _params("glm", params)
    m = encode_dataset(data, standardize=True)
    n = len(m.y)
    design = np.hstack([np.ones((n, 1)), m.X])
    Y = np.zeros((n, N_CLASSES))
    Y[np.arange(n), m.y] = 1.0
    W = np.zeros((N_CLASSES, design.shape[1]))
    trace = []
    for epoch in range(params["epochs"]):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, grad = glm_loss_grad(W, design, Y, params["l2"])
        if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingError(f"glm loss became non-finite at epoch {epoch}")
        trace.append(loss)
        W = W - params["step"] * grad
    return TrainedModel("glm", params, m.encoder, seed, weights=W, loss_trace=trace[-1:])


TRAINERS = {
    "decision_tree": train_decision_tree,
    "random_forest": train_random_forest,
    "gbm": train_gbm,
    "glm": train_glm,
}


def train(kind: str, data: MetaDataset, params: dict | None = None, seed: int = 0) -> TrainedModel:
    return TRAINERS[canonical_kind(kind)](data, params, seed)


def predict(model: TrainedModel, features: FeatureVector):
    return model.predict(features)
