"""Random forest of Gini-split CART trees."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError
from .base import Standardizer, TrainedModel, as_matrix, encode_labels, fit_standardizer, vote_winner

LEAF = -1


def _best_split(x: np.ndarray, onehot: np.ndarray, min_leaf: int):
    """Best threshold on one feature as ``(weighted_gini_sum, threshold)``.

    Minimizes ``n_l * gini_l + n_r * gini_r``; returns ``None`` when the
    feature admits no split leaving ``min_leaf`` samples on each side.
    """
    n = len(x)
    if n < 2:
        return None
    order = np.argsort(x, kind="stable")
    xs = x[order]
    left = np.cumsum(onehot[order], axis=0)[:-1]  # counts with i+1 samples on the left
    right = onehot.sum(axis=0) - left
    n_left = np.arange(1, n, dtype=float)
    n_right = n - n_left
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    # n * gini = n - sum(c^2) / n
    cost = (n_left - np.sum(left**2, axis=1) / n_left) + (n_right - np.sum(right**2, axis=1) / n_right)
    cost = np.where(valid, cost, np.inf)
    i = int(np.argmin(cost))
    thr = 0.5 * (xs[i] + xs[i + 1])
    if not thr < xs[i + 1]:  # midpoint rounded up onto the right value
        thr = xs[i]
    return float(cost[i]), float(thr)


def build_tree(X: np.ndarray, codes: np.ndarray, n_classes: int, rng: np.random.Generator,
               max_depth: Optional[int] = 16, min_leaf: int = 1,
               max_features: Optional[int] = None) -> dict:
    """Grow one tree depth-first and return it as flat node arrays.

    At each node features are visited in random order until ``max_features``
    of them have produced a valid split; constant features do not count, so
    an impure node with any varying feature always splits.
    """
    n, d = X.shape
    m = d if max_features is None else max(1, min(max_features, d))
    onehot = np.eye(n_classes)[codes]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = onehot[idx].sum(axis=0)
        value[node] = int(np.argmax(counts))  # ties -> command order
        if (counts > 0).sum() <= 1 or (max_depth is not None and depth >= max_depth) \
                or len(idx) < 2 * min_leaf:
            continue
        best = None
        tried = 0
        for f in rng.permutation(d):
            res = _best_split(X[idx, f], onehot[idx], min_leaf)
            if res is None:
                continue
            tried += 1
            if best is None or res[0] < best[0]:
                best = (res[0], res[1], int(f))
            if tried >= m:
                break
        if best is None:
            continue
        _, thr, f = best
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        lch, rch = new_node(), new_node()
        left[node], right[node] = lch, rch
        stack.append((rch, idx[~go_left], depth + 1))
        stack.append((lch, idx[go_left], depth + 1))
    return {
        "feature": np.array(feature, dtype=int),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=int),
        "right": np.array(right, dtype=int),
        "value": np.array(value, dtype=int),
    }


def tree_predict(tree: dict, X: np.ndarray) -> np.ndarray:
    feature = np.asarray(tree["feature"], dtype=int)
    threshold = np.asarray(tree["threshold"], dtype=float)
    left = np.asarray(tree["left"], dtype=int)
    right = np.asarray(tree["right"], dtype=int)
    node = np.zeros(len(X), dtype=int)
    rows = np.arange(len(X))
    while True:
        f = feature[node]
        active = f != LEAF
        if not active.any():
            break
        fa = np.where(active, f, 0)
        go_left = X[rows, fa] <= threshold[node]
        node = np.where(active, np.where(go_left, left[node], right[node]), node)
    return np.asarray(tree["value"], dtype=int)[node]


def train_random_forest(X, y, n_trees: int = 100, max_depth: Optional[int] = 16,
                        min_leaf: int = 1, seed: int = 0, bootstrap: bool = True,
                        max_features: Optional[int] = None, standardize: bool = True,
                        selected_channels: Sequence[str] = (), schema_id: str = "") -> TrainedModel:
    """Bagged trees with ``sqrt(d)`` candidate features per node.

    Every tree draws from its own child of ``SeedSequence(seed)``, so the
    forest does not depend on the order trees are built in.
    """
    if n_trees < 1:
        raise ValidationError("n_trees must be >= 1")
    if min_leaf < 1:
        raise ValidationError("min_leaf must be >= 1")
    X = as_matrix(X)
    if len(X) == 0:
        raise ValidationError("empty training set")
    labels, codes = encode_labels(y)
    std = fit_standardizer(X) if standardize else Standardizer.identity(X.shape[1])
    Xs = std.apply(X)
    n, d = Xs.shape
    mf = max_features if max_features is not None else max(1, int(math.sqrt(d)))
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(build_tree(Xs[idx], codes[idx], len(labels), rng, max_depth, min_leaf, mf))
    params = {"n_trees": n_trees, "max_depth": max_depth, "min_leaf": min_leaf,
              "bootstrap": bootstrap, "max_features": mf, "trees": trees}
    return TrainedModel("rf", std, labels, params, tuple(selected_channels), schema_id,
                        {"seed": seed})


def predict_forest(model: TrainedModel, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    trees = model.params["trees"]
    votes = np.zeros((len(Xs), len(model.labels)))
    rows = np.arange(len(Xs))
    for tree in trees:
        votes[rows, tree_predict(tree, Xs)] += 1
    win = vote_winner(votes)
    return win, votes[rows, win] / len(trees)
