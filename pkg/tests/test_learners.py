import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metarec.learners import SchemaError, TrainedModel, TrainingError, train
from metarec.learners.models import N_CLASSES, encode_dataset, glm_loss_grad, softmax
from metarec.learners.tree import gini, grow_classification_tree
from metarec.meta_dataset import OFFLINE_SCHEMA, FeatureVector, MetaDataset, MetaInstance
from metarec.retrieval import ALGORITHMS, AlgorithmId
from metarec.synth import planted_rule_dataset, rule_label

KINDS = ("tree", "rf", "gbm", "glm")


def dataset(rows, schema=OFFLINE_SCHEMA):
    return MetaDataset([MetaInstance(f"r{i}", str(i), FeatureVector(c, ch, w), ALGORITHMS[y])
                        for i, (c, ch, w, y) in enumerate(rows)], schema)


def accuracy(model, data):
    preds = model.predict_many([i.features for i in data])
    return float(np.mean([p.index == i.label for p, i in zip(preds, data)]))


def test_gini_values():
    assert gini([2, 2]) == 0.5
    assert gini([1, 0]) == 0.0
    assert gini([0, 0]) == 0.0


def test_pure_node_is_single_leaf():
    X = np.array([[1.0], [2.0], [3.0]])
    tree = grow_classification_tree(X, np.array([3, 3, 3]), np.arange(3), 4)
    assert tree.n_nodes == 1 and tree.value[0].tolist() == [0, 0, 0, 3]


def test_xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    tree = grow_classification_tree(X, y, np.arange(4), 2, max_depth=2)
    pred = np.argmax(tree.value[tree.apply(X)], axis=1)
    assert pred.tolist() == y.tolist()


rows = st.lists(st.tuples(st.sampled_from(["A", "B", "C"]), st.integers(1, 40), st.integers(1, 8),
                          st.integers(0, 3)), min_size=1, max_size=60)


@settings(max_examples=40, deadline=None)
@given(rows)
def test_tree_fits_consistent_data(data_rows):
    seen = {}
    consistent = []
    for c, ch, w, y in data_rows:
        key = (c, ch, w)
        if seen.setdefault(key, y) == y:
            consistent.append((c, ch, w, y))
    data = dataset(consistent)
    assert accuracy(train("tree", data), data) == 1.0


@settings(max_examples=15, deadline=None)
@given(rows, st.sampled_from(KINDS))
def test_probabilities_normalised(data_rows, kind):
    data = dataset(data_rows)
    params = {"rf": {"n_trees": 5}, "gbm": {"n_rounds": 5}, "glm": {"epochs": 20}}.get(kind)
    model = train(kind, data, params, seed=1)
    X = model.encode([i.features for i in data])
    P = model.predict_proba_matrix(X)
    assert np.all(P >= 0)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9)


@pytest.fixture(scope="module")
def rule_split():
    data = planted_rule_dataset(400, seed=0)
    return data[:200], data[200:]


def test_rule_dataset_labels(rule_split):
    for inst in rule_split[0]:
        assert inst.label == rule_label(inst.features.collection_id, inst.features.title_chars)


@pytest.mark.parametrize("kind,floor", [("rf", 0.95), ("gbm", 0.95), ("glm", 0.90)])
def test_heldout_accuracy(rule_split, kind, floor):
    tr, te = rule_split
    assert accuracy(train(kind, tr, seed=0), te) >= floor


def test_unanimous_forest():
    data = dataset([("A", i, 1, 2) for i in range(1, 10)])
    model = train("rf", data, {"n_trees": 7}, seed=0)
    alg, probs = model.predict(FeatureVector("A", 3, 1))
    assert alg is AlgorithmId.STD_TITLE
    assert probs.tolist() == [0.0, 0.0, 1.0, 0.0]


def test_forest_peak_probability():
    data = dataset([("A", i, 1, 1) for i in range(1, 10)])
    alg, probs = train("rf", data, {"n_trees": 9}, seed=3).predict(FeatureVector("A", 5, 1))
    assert alg is AlgorithmId.MLT_TITLE_ABSTRACT and probs[1] == probs.max() == 1.0


@pytest.mark.parametrize("kind", KINDS)
def test_deterministic_and_round_trip(tmp_path, rule_split, kind):
    tr, te = rule_split
    a = train(kind, tr, seed=7)
    b = train(kind, tr, seed=7)
    assert a.to_json() == b.to_json()
    loaded = TrainedModel.load(a.save(tmp_path / "m.json"))
    X = a.encode([i.features for i in te])
    assert np.array_equal(loaded.decision(X), a.decision(X))
    assert loaded.to_json() == a.to_json()


def test_rf_seed_matters(rule_split):
    tr, _ = rule_split
    assert train("rf", tr, {"n_trees": 5}, seed=1).to_json() != train("rf", tr, {"n_trees": 5}, seed=2).to_json()


def test_gbm_one_class():
    data = dataset([("A", i, 1, 3) for i in range(1, 12)])
    model = train("gbm", data, {"n_rounds": 1})
    assert set(model.predict_many([i.features for i in data])) == {AlgorithmId.STD_TITLE_ABSTRACT}


def test_gbm_loss_trace_monotone(planted_dataset):
    model = train("gbm", planted_dataset, seed=0)
    trace = model.loss_trace
    assert len(trace) == 100
    for prev, cur in zip(trace, trace[1:]):
        assert cur <= prev + 1e-9


def test_glm_zero_weights():
    data = dataset([("A", 5, 1, 0), ("B", 9, 2, 3)])
    model = train("glm", data, {"epochs": 0})
    alg, probs = model.predict(FeatureVector("B", 40, 7))
    assert np.allclose(probs, 0.25)
    assert alg is AlgorithmId.MLT_TITLE


def test_glm_gradient_finite_differences(rule_split):
    m = encode_dataset(rule_split[0][:10], standardize=True)
    design = np.hstack([np.ones((10, 1)), m.X])
    Y = np.eye(N_CLASSES)[m.y]
    rng = np.random.default_rng(0)
    W = rng.normal(0, 0.5, size=(N_CLASSES, design.shape[1]))
    _, grad = glm_loss_grad(W, design, Y, 1e-3)
    h = 1e-5
    num = np.zeros_like(W)
    for idx in np.ndindex(*W.shape):
        Wp, Wm = W.copy(), W.copy()
        Wp[idx] += h
        Wm[idx] -= h
        num[idx] = (glm_loss_grad(Wp, design, Y, 1e-3)[0] - glm_loss_grad(Wm, design, Y, 1e-3)[0]) / (2 * h)
    assert np.max(np.abs(num - grad)) <= 1e-6


def test_glm_non_finite_reports_epoch(rule_split):
    with pytest.raises(TrainingError, match="epoch"):
        train("glm", rule_split[0], {"step": 1e308, "epochs": 5})


def test_unseen_collection(rule_split):
    for kind in KINDS:
        model = train(kind, rule_split[0], seed=0)
        alg, probs = model.predict(FeatureVector("never-seen", 50, 6))
        assert alg in ALGORITHMS and probs.sum() == pytest.approx(1.0)


def test_schema_checked(rule_split):
    model = train("tree", rule_split[0])
    with pytest.raises(SchemaError):
        model.predict(FeatureVector(None, 10, 2))
    with pytest.raises(SchemaError):
        model.predict(FeatureVector("A", 10, 2, hour_of_day=3))


def test_unknown_kind_and_param(rule_split):
    with pytest.raises(ValueError):
        train("svm", rule_split[0])
    with pytest.raises(ValueError):
        train("rf", rule_split[0], {"n_estimators": 3})
    with pytest.raises(TrainingError):
        train("rf", MetaDataset([]))


def test_softmax_stable():
    P = softmax(np.array([[1000.0, 0.0, -1000.0, 0.0]]))
    assert np.isfinite(P).all() and P[0, 0] == pytest.approx(1.0)
