import collections
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metarec.evaluation import random_select, run_offline_eval, stratified_kfold
from metarec.meta_dataset import FeatureVector, MetaDataset, MetaInstance, best_algorithm
from metarec.metrics import PRF1
from metarec.retrieval import ALGORITHMS


def scored_dataset(rows):
    """rows: (collection, chars, words, [f1 per algorithm])."""
    instances = []
    for i, (c, ch, w, f1s) in enumerate(rows):
        scores = {a: PRF1(f, f, f) for a, f in zip(ALGORITHMS, f1s)}
        instances.append(MetaInstance(f"r{i % 7}", str(i), FeatureVector(c, ch, w),
                                      best_algorithm(scores), scores))
    return MetaDataset(instances)


def fuzzed(seed, n=80):
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(n):
        f1s = np.round(rng.random(4) * (rng.random(4) < 0.6), 3).tolist()
        rows.append((str(rng.choice(["A", "B", "C"])), int(rng.integers(5, 100)),
                     int(rng.integers(1, 15)), f1s))
    return scored_dataset(rows)


def test_fold_sizes_750():
    labels = np.arange(750) % 4
    sizes = sorted(len(f) for f in stratified_kfold(labels, 4, seed=0))
    assert sizes == [187, 187, 188, 188]


def test_four_distinct_labels():
    assert [len(f) for f in stratified_kfold([0, 1, 2, 3], 4)] == [1, 1, 1, 1]


def test_folds_deterministic():
    labels = np.random.default_rng(1).integers(0, 4, 100)
    a = stratified_kfold(labels, 4, seed=5)
    b = stratified_kfold(labels, 4, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        stratified_kfold([0, 1], 4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=4, max_size=120), st.integers(2, 6), st.integers(0, 99))
def test_folds_partition_and_balance(labels, k, seed):
    if len(labels) < k:
        return
    folds = stratified_kfold(labels, k, seed)
    allix = np.sort(np.concatenate(folds))
    assert allix.tolist() == list(range(len(labels)))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    labels = np.asarray(labels)
    for lab in set(labels.tolist()):
        counts = [int(np.sum(labels[f] == lab)) for f in folds]
        assert max(counts) - min(counts) <= 1


def test_random_select_uniform():
    counts = collections.Counter(random_select(11, i) for i in range(100_000))
    for a in ALGORITHMS:
        assert abs(counts[a] / 100_000 - 0.25) <= 0.01
    assert random_select(11, 42) is random_select(11, 42)
    assert len({random_select(0, i) for i in range(100)}) > 1


def test_report_structure_and_purity(planted_dataset):
    a = run_offline_eval(planted_dataset, ["rf", "gbm", "glm"], 4, seed=7)
    b = run_offline_eval(planted_dataset, ["rf", "gbm", "glm"], 4, seed=7)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()
    csv = a.to_csv()
    assert "\noracle,oracle," in csv and "\nrandom,random," in csv
    assert a.models == ["rf", "gbm", "glm"]
    data = json.loads(a.to_json())
    assert set(data["paired_t_tests"]) == {"rf", "gbm", "glm"}


def test_write(tmp_path, planted_dataset):
    rep = run_offline_eval(planted_dataset[:60], ["tree"], 3, seed=0)
    paths = rep.write(tmp_path)
    assert paths["table"].read_text().startswith("section,selection,n,precision,recall,f1\n")
    assert "algorithm,selection_mode,metric,value" in paths["plot"].read_text()


@pytest.mark.parametrize("seed", range(6))
def test_oracle_dominance_fuzzed(seed):
    data = fuzzed(seed)
    rep = run_offline_eval(data, ["tree", "rf", "gbm", "glm"], 4, seed=seed,
                           params={"random_forest": {"n_trees": 20}, "gbm": {"n_rounds": 20}})
    for m in rep.models:
        assert rep.oracle.f1 >= rep.overall(m).f1
    for a in ALGORITHMS:
        assert rep.oracle.f1 >= rep.arbitrary(a).f1


def test_meta_within_bounds_on_planted(planted_dataset):
    rep = run_offline_eval(planted_dataset, ["rf", "gbm", "glm"], 4, seed=0)
    floor = min(rep.arbitrary(a).f1 for a in ALGORITHMS)
    for m in rep.models:
        assert floor <= rep.overall(m).f1 <= rep.oracle.f1


def test_constant_winner_learned():
    rows = [("A" if i % 2 else "B", 10 + i, 1 + i % 5, [0.0, 1.0, 0.0, 0.0]) for i in range(40)]
    rep = run_offline_eval(scored_dataset(rows), ["tree", "rf", "gbm", "glm"], 4, seed=0)
    for m in rep.models:
        assert rep.overall(m).f1 == 1.0


def test_failing_model_marked_absent(planted_dataset):
    rep = run_offline_eval(planted_dataset[:40], ["tree", "glm"], 4, seed=0,
                           params={"glm": {"step": 1e308}})
    assert rep.models == ["tree"]
    assert "glm" in rep.absent
    assert rep.get("overall", "glm") is None


def test_eval_needs_scores(planted_dataset):
    bare = MetaDataset([MetaInstance("r", "d", i.features, i.best) for i in planted_dataset[:10]])
    with pytest.raises(ValueError):
        run_offline_eval(bare)
    with pytest.raises(ValueError):
        run_offline_eval(MetaDataset([]))
