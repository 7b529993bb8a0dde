"""CART trees stored as flat node arrays.

Nodes are numbered in depth-first, left-first growth order; ``feature == -1``
marks a leaf. ``value`` holds class histograms for classification trees and a
single leaf output for regression trees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from metarec import kernels

UNLIMITED = 1 << 30


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def apply(self, X: np.ndarray) -> np.ndarray:
        return kernels.tree_leaves(np.ascontiguousarray(X, dtype=np.float64),
                                   self.feature[None, :], self.threshold[None, :],
                                   self.left[None, :], self.right[None, :])[:, 0]

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max()) if self.n_nodes else 0

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


class _Builder:
    def __init__(self, n_out):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        self.n_out = n_out

    def add(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def finish(self) -> Tree:
        return Tree(
            np.asarray(self.feature, dtype=np.int64),
            np.asarray(self.threshold, dtype=np.float64),
            np.asarray(self.left, dtype=np.int64),
            np.asarray(self.right, dtype=np.int64),
            np.asarray(self.value, dtype=np.float64).reshape(len(self.feature), self.n_out),
        )


def _candidate_batches(p, max_features, rng):
    if max_features is None or max_features >= p:
        return [np.arange(p, dtype=np.int64)]
    perm = rng.permutation(p)
    return [np.sort(perm[:max_features]).astype(np.int64),
            np.sort(perm[max_features:]).astype(np.int64)]


def grow_classification_tree(X, y, idx, n_classes, max_depth=None, min_leaf=1,
                             max_features=None, rng=None) -> Tree:
    """Greedy Gini CART. With ``max_features`` each split scans a random
    feature subset first and only falls through to the rest when the subset
    cannot split the node."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    max_depth = UNLIMITED if max_depth is None else max_depth
    builder = _Builder(n_classes)
    root = builder.add(np.bincount(y[idx], minlength=n_classes))
    stack = [(root, np.asarray(idx, dtype=np.int64), 0)]
    p = X.shape[1]
    while stack:
        node, rows, depth = stack.pop()
        counts = np.bincount(y[rows], minlength=n_classes)
        if depth >= max_depth or rows.shape[0] < 2 * min_leaf or np.count_nonzero(counts) <= 1:
            continue
        f = -1
        for batch in _candidate_batches(p, max_features, rng):
            f, t, _ = kernels.gini_split(X, y, rows, batch, n_classes, min_leaf)
            if f >= 0:
                break
        if f < 0:
            continue
        go_left = X[rows, f] <= t
        lrows, rrows = rows[go_left], rows[~go_left]
        li = builder.add(np.bincount(y[lrows], minlength=n_classes))
        ri = builder.add(np.bincount(y[rrows], minlength=n_classes))
        builder.feature[node], builder.threshold[node] = int(f), float(t)
        builder.left[node], builder.right[node] = li, ri
        # right pushed first so the left subtree is grown (and numbered) first
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))
    return builder.finish()


def grow_regression_tree(X, r, idx, leaf_value, max_depth=3, min_leaf=1) -> Tree:
    """Variance-reduction CART; ``leaf_value(rows)`` computes each leaf output."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    builder = _Builder(1)
    feats = np.arange(X.shape[1], dtype=np.int64)
    root = builder.add([0.0])
    stack = [(root, np.asarray(idx, dtype=np.int64), 0)]
    while stack:
        node, rows, depth = stack.pop()
        split = depth < max_depth and rows.shape[0] >= 2 * min_leaf
        f = -1
        if split:
            f, t, gain = kernels.variance_split(X, r, rows, feats, min_leaf)
            if f >= 0:
                total = float(np.sum(r[rows]))
                parent = total * total / rows.shape[0]
                if not gain > parent + 1e-12 * (1.0 + abs(parent)):
                    f = -1
        if f < 0:
            builder.value[node] = [leaf_value(rows)]
            continue
        go_left = X[rows, f] <= t
        lrows, rrows = rows[go_left], rows[~go_left]
        li, ri = builder.add([0.0]), builder.add([0.0])
        builder.feature[node], builder.threshold[node] = int(f), float(t)
        builder.left[node], builder.right[node] = li, ri
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))
    return builder.finish()


def stack_trees(trees: list[Tree]):
    """Pad trees into (n_trees, max_nodes) arrays for batched traversal."""
    m = max(t.n_nodes for t in trees)
    T = len(trees)
    feature = np.full((T, m), -1, dtype=np.int64)
    threshold = np.zeros((T, m), dtype=np.float64)
    left = np.zeros((T, m), dtype=np.int64)
    right = np.zeros((T, m), dtype=np.int64)
    n_out = trees[0].value.shape[1]
    value = np.zeros((T, m, n_out), dtype=np.float64)
    for i, t in enumerate(trees):
        k = t.n_nodes
        feature[i, :k], threshold[i, :k] = t.feature, t.threshold
        left[i, :k], right[i, :k] = t.left, t.right
        value[i, :k] = t.value
    return feature, threshold, left, right, value
