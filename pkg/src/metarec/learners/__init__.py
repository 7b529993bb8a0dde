from metarec.learners.encoding import Encoder, SchemaError
from metarec.learners.models import (
    DEFAULTS,
    KINDS,
    TrainedModel,
    TrainingError,
    canonical_kind,
    predict,
    train,
    train_decision_tree,
    train_gbm,
    train_glm,
    train_random_forest,
)

__all__ = [
    "DEFAULTS", "KINDS", "Encoder", "SchemaError", "TrainedModel", "TrainingError",
    "canonical_kind", "predict", "train", "train_decision_tree", "train_gbm",
    "train_glm", "train_random_forest",
]
