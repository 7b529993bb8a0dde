"""Time the numba and pure-numpy variants of every hot kernel.

    python benchmarks/bench_kernels.py [--repeat 20] [--scale 1.0]

Inputs are random but seeded; both variants get identical arrays and the
script checks their outputs agree before timing them. The first numba call
(compilation or cache load) is excluded.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from metarec import kernels
from metarec._accel import HAVE_NUMBA


def score_inputs(rng, n_docs, n_slots, postings_per_slot):
    lengths = np.minimum(rng.integers(1, postings_per_slot * 2, size=n_slots), n_docs)
    start = np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64)
    end = (start + lengths).astype(np.int64)
    post_docs = np.concatenate([np.sort(rng.choice(n_docs, size=n, replace=False))
                                for n in lengths]).astype(np.int64)
    post_freqs = rng.integers(1, 5, size=post_docs.shape[0]).astype(np.int64)
    slot_term = np.sort(rng.integers(0, n_slots // 2 + 1, size=n_slots)).astype(np.int64)
    slot_field = rng.integers(0, 2, size=n_slots).astype(np.int64)
    return (n_docs, slot_term, slot_field, start, end, rng.random(n_slots),
            post_docs, post_freqs, rng.random((2, n_docs)))


def gini_inputs(rng, n_rows, n_feats, n_classes=4):
    X = np.round(rng.random((n_rows, n_feats)) * 50)
    y = rng.integers(0, n_classes, size=n_rows).astype(np.int64)
    return (X, y, np.arange(n_rows, dtype=np.int64), np.arange(n_feats, dtype=np.int64), n_classes, 1)


def variance_inputs(rng, n_rows, n_feats):
    X = np.round(rng.random((n_rows, n_feats)) * 50)
    return (X, rng.standard_normal(n_rows), np.arange(n_rows, dtype=np.int64),
            np.arange(n_feats, dtype=np.int64), 1)


def leaves_inputs(rng, n_rows, n_feats, n_trees, depth):
    n_nodes = 2 ** (depth + 1) - 1
    internal = 2 ** depth - 1
    feature = np.full((n_trees, n_nodes), -1, dtype=np.int64)
    feature[:, :internal] = rng.integers(0, n_feats, size=(n_trees, internal))
    threshold = rng.random((n_trees, n_nodes))
    nodes = np.arange(n_nodes)
    left = np.where(nodes < internal, 2 * nodes + 1, -1)[None, :].repeat(n_trees, 0).astype(np.int64)
    right = np.where(nodes < internal, 2 * nodes + 2, -1)[None, :].repeat(n_trees, 0).astype(np.int64)
    return (rng.random((n_rows, n_feats)), feature, threshold, left, right)


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--scale", type=float, default=1.0, help="multiply input sizes")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not importable; only the numpy variants exist")
        return 1

    s = args.scale
    rng = np.random.default_rng(args.seed)
    cases = [
        ("score_slots", score_inputs(rng, int(20000 * s), 50, int(800 * s))),
        ("gini_split", gini_inputs(rng, int(2000 * s), 8)),
        ("variance_split", variance_inputs(rng, int(2000 * s), 8)),
        ("tree_leaves", leaves_inputs(rng, int(5000 * s), 8, 100, 8)),
    ]
    print(f"{'kernel':<16}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}  agree")
    for name, inputs in cases:
        nb, np_ = getattr(kernels, name + "_nb"), getattr(kernels, name + "_np")
        agree = _same(nb(*inputs), np_(*inputs))  # also warms the jit
        t_np = _best(np_, inputs, args.repeat)
        t_nb = _best(nb, inputs, args.repeat)
        print(f"{name:<16}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>9.1f}x  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
