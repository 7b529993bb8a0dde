"""Hot numeric kernels.

Every kernel exists twice: a numba ``@njit`` loop (``*_nb``) and a pure-numpy
version (``*_np``). The public names at the bottom dispatch on
``metarec._accel.USE_NUMBA``. The two variants perform the same floating-point
operations in the same order so their outputs are bit-identical; the test
suite checks that.
"""

from __future__ import annotations

import math

import numpy as np

from metarec._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# TF-IDF accumulation
#
# A query is flattened into "slots", one per (query term, field) pair that has
# postings, sorted by query term. Slot j covers postings [start[j], end[j]) of
# the concatenated postings arrays and contributes
#     weight[j] * sqrt(freq) * inv_norm[field[j], doc]
# to every posting's document. ``matched`` counts distinct query terms per doc.
# ---------------------------------------------------------------------------


@njit
def score_slots_nb(n_docs, slot_term, slot_field, slot_start, slot_end, slot_weight,
                   post_docs, post_freqs, inv_norm):
    scores = np.zeros(n_docs, dtype=np.float64)
    matched = np.zeros(n_docs, dtype=np.int64)
    mark = np.full(n_docs, -1, dtype=np.int64)
    for j in range(slot_term.shape[0]):
        q = slot_term[j]
        f = slot_field[j]
        w = slot_weight[j]
        for p in range(slot_start[j], slot_end[j]):
            d = post_docs[p]
            scores[d] += w * math.sqrt(post_freqs[p]) * inv_norm[f, d]
            if mark[d] != q:
                mark[d] = q
                matched[d] += 1
    return scores, matched


def score_slots_np(n_docs, slot_term, slot_field, slot_start, slot_end, slot_weight,
                   post_docs, post_freqs, inv_norm):
    lengths = slot_end - slot_start
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(n_docs, dtype=np.float64), np.zeros(n_docs, dtype=np.int64)
    slot_of = np.repeat(np.arange(slot_term.shape[0]), lengths)
    offsets = np.arange(total) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    pos = slot_start[slot_of] + offsets
    docs = post_docs[pos]
    contrib = slot_weight[slot_of] * np.sqrt(post_freqs[pos].astype(np.float64)) \
        * inv_norm[slot_field[slot_of], docs]
    scores = np.bincount(docs, weights=contrib, minlength=n_docs)
    keys = np.unique(slot_term[slot_of].astype(np.int64) * n_docs + docs)
    matched = np.bincount(keys % n_docs, minlength=n_docs).astype(np.int64)
    return scores, matched


# ---------------------------------------------------------------------------
# Classification split search (weighted Gini)
#
# For each candidate feature the rows are stably sorted by value; a split
# between two distinct consecutive values is scored by the weighted child
# impurity  nL - sum(cL^2)/nL + nR - sum(cR^2)/nR  (lower is better). Sums of
# squared counts are exact integers so both variants agree bit for bit.
# Returns (feature, threshold, score); feature == -1 when nothing is splittable.
# ---------------------------------------------------------------------------


@njit
def gini_split_nb(X, y, idx, feats, n_classes, min_leaf):
    n = idx.shape[0]
    best_f = -1
    best_t = 0.0
    best_s = np.inf
    total = np.zeros(n_classes, dtype=np.int64)
    for i in range(n):
        total[y[idx[i]]] += 1
    sq_total = 0
    for c in range(n_classes):
        sq_total += total[c] * total[c]
    xs = np.empty(n, dtype=np.float64)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        for i in range(n):
            xs[i] = X[idx[i], f]
        order = np.argsort(xs, kind="mergesort")
        left = np.zeros(n_classes, dtype=np.int64)
        sq_l = 0
        sq_r = sq_total
        for i in range(n - 1):
            c = y[idx[order[i]]]
            sq_l += 2 * left[c] + 1
            sq_r -= 2 * (total[c] - left[c]) - 1
            left[c] += 1
            n_l = i + 1
            n_r = n - n_l
            a = xs[order[i]]
            b = xs[order[i + 1]]
            if a < b and n_l >= min_leaf and n_r >= min_leaf:
                s = (n_l - sq_l / n_l) + (n_r - sq_r / n_r)
                if s < best_s:
                    best_s = s
                    best_f = f
                    best_t = (a + b) / 2.0
    return best_f, best_t, best_s


def gini_split_np(X, y, idx, feats, n_classes, min_leaf):
    n = idx.shape[0]
    best_f, best_t, best_s = -1, 0.0, np.inf
    if n < 2:
        return best_f, best_t, best_s
    yy = y[idx]
    total = np.bincount(yy, minlength=n_classes).astype(np.int64)
    n_l = np.arange(1, n, dtype=np.int64)
    n_r = n - n_l
    size_ok = (n_l >= min_leaf) & (n_r >= min_leaf)
    for f in feats:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xo = xs[order]
        onehot = np.zeros((n, n_classes), dtype=np.int64)
        onehot[np.arange(n), yy[order]] = 1
        left = np.cumsum(onehot, axis=0)[:-1]
        right = total - left
        sq_l = (left * left).sum(axis=1)
        sq_r = (right * right).sum(axis=1)
        valid = (xo[:-1] < xo[1:]) & size_ok
        if not valid.any():
            continue
        s = (n_l - sq_l / n_l) + (n_r - sq_r / n_r)
        s = np.where(valid, s, np.inf)
        i = int(np.argmin(s))
        if s[i] < best_s:
            best_s = float(s[i])
            best_f = int(f)
            best_t = float((xo[i] + xo[i + 1]) / 2.0)
    return best_f, best_t, best_s


# ---------------------------------------------------------------------------
# Regression split search (variance reduction)
#
# Maximises  sL^2/nL + sR^2/nR  where s are residual sums; sR is the running
# total minus sL, and the running total is accumulated in the sorted order.
# ---------------------------------------------------------------------------


@njit
def variance_split_nb(X, r, idx, feats, min_leaf):
    n = idx.shape[0]
    best_f = -1
    best_t = 0.0
    best_g = -np.inf
    xs = np.empty(n, dtype=np.float64)
    rs = np.empty(n, dtype=np.float64)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        for i in range(n):
            xs[i] = X[idx[i], f]
        order = np.argsort(xs, kind="mergesort")
        for i in range(n):
            rs[i] = r[idx[order[i]]]
        total = 0.0
        for i in range(n):
            total += rs[i]
        s_l = 0.0
        for i in range(n - 1):
            s_l += rs[i]
            n_l = i + 1
            n_r = n - n_l
            a = xs[order[i]]
            b = xs[order[i + 1]]
            if a < b and n_l >= min_leaf and n_r >= min_leaf:
                s_r = total - s_l
                g = s_l * s_l / n_l + s_r * s_r / n_r
                if g > best_g:
                    best_g = g
                    best_f = f
                    best_t = (a + b) / 2.0
    return best_f, best_t, best_g


def variance_split_np(X, r, idx, feats, min_leaf):
    n = idx.shape[0]
    best_f, best_t, best_g = -1, 0.0, -np.inf
    if n < 2:
        return best_f, best_t, best_g
    n_l = np.arange(1, n, dtype=np.int64)
    n_r = n - n_l
    size_ok = (n_l >= min_leaf) & (n_r >= min_leaf)
    for f in feats:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xo = xs[order]
        cs = np.cumsum(r[idx[order]])
        valid = (xo[:-1] < xo[1:]) & size_ok
        if not valid.any():
            continue
        s_l = cs[:-1]
        s_r = cs[-1] - s_l
        g = s_l * s_l / n_l + s_r * s_r / n_r
        g = np.where(valid, g, -np.inf)
        i = int(np.argmax(g))
        if g[i] > best_g:
            best_g = float(g[i])
            best_f = int(f)
            best_t = float((xo[i] + xo[i + 1]) / 2.0)
    return best_f, best_t, best_g


# ---------------------------------------------------------------------------
# Tree-ensemble traversal
#
# Trees are padded into (n_trees, max_nodes) arrays; feature == -1 marks a
# leaf. Rows go left when x[feature] <= threshold. Returns leaf node ids with
# shape (n_rows, n_trees).
# ---------------------------------------------------------------------------


@njit
def tree_leaves_nb(X, feature, threshold, left, right):
    n_rows = X.shape[0]
    n_trees = feature.shape[0]
    out = np.empty((n_rows, n_trees), dtype=np.int64)
    for i in range(n_rows):
        for t in range(n_trees):
            node = 0
            while feature[t, node] >= 0:
                if X[i, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            out[i, t] = node
    return out


def tree_leaves_np(X, feature, threshold, left, right):
    n_rows = X.shape[0]
    n_trees = feature.shape[0]
    nodes = np.zeros((n_rows, n_trees), dtype=np.int64)
    trees = np.broadcast_to(np.arange(n_trees), (n_rows, n_trees))
    rows = np.broadcast_to(np.arange(n_rows)[:, None], (n_rows, n_trees))
    while True:
        f = feature[trees, nodes]
        active = f >= 0
        if not active.any():
            return nodes
        x = X[rows[active], f[active]]
        go_left = x <= threshold[trees[active], nodes[active]]
        nodes[active] = np.where(go_left, left[trees[active], nodes[active]],
                                 right[trees[active], nodes[active]])


if USE_NUMBA:
    score_slots = score_slots_nb
    gini_split = gini_split_nb
    variance_split = variance_split_nb
    tree_leaves = tree_leaves_nb
else:
    score_slots = score_slots_np
    gini_split = gini_split_np
    variance_split = variance_split_np
    tree_leaves = tree_leaves_np

BACKEND = "numba" if USE_NUMBA else "numpy"
