import os
import subprocess
import sys
import textwrap

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from metarec import kernels


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


@st.composite
def slot_inputs(draw):
    n_docs = draw(st.integers(1, 30))
    n_slots = draw(st.integers(1, 10))
    lengths = [draw(st.integers(0, n_docs)) for _ in range(n_slots)]
    docs, starts = [], []
    for n in lengths:
        starts.append(len(docs))
        docs.extend(sorted(draw(st.permutations(range(n_docs)))[:n]))
    start = np.array(starts, dtype=np.int64)
    end = start + np.array(lengths, dtype=np.int64)
    terms = np.sort(np.array([draw(st.integers(0, 4)) for _ in range(n_slots)], dtype=np.int64))
    fields = np.array([draw(st.integers(0, 1)) for _ in range(n_slots)], dtype=np.int64)
    weights = np.array([draw(st.floats(0.01, 10)) for _ in range(n_slots)])
    freqs = np.array([draw(st.integers(1, 6)) for _ in docs], dtype=np.int64)
    seed = draw(st.integers(0, 1000))
    inv_norm = np.random.default_rng(seed).random((2, n_docs))
    return (n_docs, terms, fields, start, end, weights, np.array(docs, dtype=np.int64), freqs, inv_norm)


@settings(max_examples=60, deadline=None)
@given(slot_inputs())
def test_score_slots_variants_identical(args):
    assert same(kernels.score_slots_nb(*args), kernels.score_slots_np(*args))


@st.composite
def split_inputs(draw):
    n = draw(st.integers(2, 40))
    p = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 10_000))
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(n, p)).astype(np.float64)
    idx = rng.integers(0, n, size=draw(st.integers(2, n)))
    feats = rng.permutation(p)[: draw(st.integers(1, p))].astype(np.int64)
    return X, rng, idx.astype(np.int64), feats, draw(st.integers(1, 3))


@settings(max_examples=80, deadline=None)
@given(split_inputs())
def test_gini_split_variants_identical(args):
    X, rng, idx, feats, min_leaf = args
    y = rng.integers(0, 4, size=X.shape[0]).astype(np.int64)
    assert same(kernels.gini_split_nb(X, y, idx, feats, 4, min_leaf),
                kernels.gini_split_np(X, y, idx, feats, 4, min_leaf))


@settings(max_examples=80, deadline=None)
@given(split_inputs())
def test_variance_split_variants_identical(args):
    X, rng, idx, feats, min_leaf = args
    r = rng.standard_normal(X.shape[0])
    assert same(kernels.variance_split_nb(X, r, idx, feats, min_leaf),
                kernels.variance_split_np(X, r, idx, feats, min_leaf))


def test_gini_split_finds_obvious_cut():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    f, thr, _ = kernels.gini_split_np(X, y, np.arange(4), np.array([0]), 2, 1)
    assert (f, thr) == (0, 1.5)


def test_tree_leaves_variants_identical():
    rng = np.random.default_rng(0)
    T, depth = 6, 3
    n_nodes = 2 ** (depth + 1) - 1
    internal = 2 ** depth - 1
    feature = np.full((T, n_nodes), -1, dtype=np.int64)
    feature[:, :internal] = rng.integers(0, 3, size=(T, internal))
    nodes = np.arange(n_nodes)
    left = np.tile(np.where(nodes < internal, 2 * nodes + 1, -1), (T, 1)).astype(np.int64)
    right = np.tile(np.where(nodes < internal, 2 * nodes + 2, -1), (T, 1)).astype(np.int64)
    threshold = rng.random((T, n_nodes))
    X = rng.random((50, 3))
    a = kernels.tree_leaves_nb(X, feature, threshold, left, right)
    b = kernels.tree_leaves_np(X, feature, threshold, left, right)
    assert same(a, b)
    assert np.all(a >= internal)


PIPELINE = textwrap.dedent("""
    import hashlib
    from metarec import kernels
    from metarec.synth import planted_corpus
    from metarec.meta_dataset import build_meta_dataset
    from metarec.learners import train
    store = planted_corpus(0, n_topics=9, n_filler=20).store()
    ds = build_meta_dataset(store, k=10)
    h = hashlib.sha256(ds.to_csv().encode())
    for kind in ("tree", "rf", "gbm"):
        h.update(train(kind, ds, {"rf": {"n_trees": 10}, "gbm": {"n_rounds": 10}}.get(kind), seed=3).to_json().encode())
    print(kernels.BACKEND, h.hexdigest())
""")


def run_pipeline(disable: bool):
    env = dict(os.environ)
    env.pop("METAREC_DISABLE_NUMBA", None)
    if disable:
        env["METAREC_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", PIPELINE], env=env, capture_output=True,
                         text=True, check=True)
    return out.stdout.split()


def test_env_flag_selects_backend_with_identical_results():
    nb_backend, nb_hash = run_pipeline(False)
    np_backend, np_hash = run_pipeline(True)
    assert (nb_backend, np_backend) == ("numba", "numpy")
    assert nb_hash == np_hash
