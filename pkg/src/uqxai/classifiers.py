"""Probabilistic classifiers: K-NN class frequencies and a bootstrap tree ensemble."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


class ModelError(ValueError):
    pass


def _check_query(x, n_features: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n_features:
        raise ModelError(f"expected {n_features} features, got {x.shape[-1]}")
    return x


def squared_distances(Z: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, exact per-coordinate accumulation."""
    out = np.zeros((Z.shape[0], T.shape[0]))
    for q in range(Z.shape[1]):
        diff = Z[:, q, None] - T[None, :, q]
        out += diff * diff
    return out


def nearest_indices(d2: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest entries per row; ties go to the lower index."""
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


# --------------------------------------------------------------------------- K-NN


@dataclass(frozen=True)
class KnnModel:
    train_features: np.ndarray
    train_labels: np.ndarray
    k: int
    n_classes: int

    @property
    def n_features(self) -> int:
        return self.train_features.shape[1]

    def predict_proba(self, Z) -> np.ndarray:
        return knn_predict_proba_batch(self, Z)


def knn_fit(train: Dataset, k: int = 7) -> KnnModel:
    if not 1 <= k <= train.n_rows:
        raise ModelError(f"k must lie in [1, {train.n_rows}], got {k}")
    return KnnModel(train.features, train.labels, int(k), train.n_classes)


def knn_predict_proba_batch(model: KnnModel, Z) -> np.ndarray:
    Z = np.atleast_2d(_check_query(Z, model.n_features))
    out = np.empty((Z.shape[0], model.n_classes))
    # chunked to bound the distance matrix size
    step = max(1, 2_000_000 // max(1, model.train_features.shape[0]))
    for s in range(0, Z.shape[0], step):
        d2 = squared_distances(Z[s : s + step], model.train_features)
        nn = model.train_labels[nearest_indices(d2, model.k)]
        for c in range(model.n_classes):
            out[s : s + step, c] = np.count_nonzero(nn == c, axis=1)
    return out / model.k


def knn_predict_proba(model: KnnModel, x) -> np.ndarray:
    """Class frequencies among the ``k`` nearest training rows of one query."""
    x = _check_query(x, model.n_features)
    if x.ndim != 1:
        raise ModelError("knn_predict_proba expects a single feature vector")
    return knn_predict_proba_batch(model, x[None, :])[0]


def knn_predict(model: KnnModel, Z) -> np.ndarray:
    return np.argmax(knn_predict_proba_batch(model, Z), axis=1)


# ------------------------------------------------------------------------ trees


@dataclass(frozen=True)
class DecisionTree:
    """Array-encoded binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, C) leaf class distributions
    max_depth: int

    def apply(self, Z: np.ndarray) -> np.ndarray:
        node = np.zeros(Z.shape[0], dtype=np.int64)
        for _ in range(self.max_depth + 1):
            f = self.feature[node]
            internal = f >= 0
            if not internal.any():
                break
            rows = np.flatnonzero(internal)
            go_left = Z[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return node

    def predict_proba(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return self.value[self.apply(Z)]

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}


def _gini_best_split(X, y, w_counts_total, C, candidates):
    """Best (gain, feature, threshold) over candidate features.

    Ties in gain resolve to the smallest feature index, then the smallest
    threshold.
    """
    n = y.size
    parent = 1.0 - np.sum((w_counts_total / n) ** 2)
    best = (0.0, -1, 0.0)
    for f in sorted(candidates):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        onehot = np.zeros((n, C))
        onehot[np.arange(n), y[order]] = 1.0
        left_counts = np.cumsum(onehot, axis=0)[:-1]
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        right_counts = w_counts_total[None, :] - left_counts
        gini_l = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
        gain = parent - (n_left * gini_l + n_right * gini_r) / n
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        # argmax already returns the first (smallest-threshold) maximiser
        if gain[i] > best[0] + 1e-12:
            best = (float(gain[i]), f, 0.5 * (xs[i] + xs[i + 1]))
    return best


def fit_tree(X, y, n_classes: int, max_depth: int, max_features: int | None, rng) -> DecisionTree:
    feature, threshold, left, right, value = [], [], [], [], []
    Q = X.shape[1]

    def grow(idx, depth):
        node = len(feature)
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        if depth >= max_depth or idx.size < 2 or np.count_nonzero(counts) <= 1:
            return node
        if max_features is None or max_features >= Q:
            cand = range(Q)
        else:
            cand = rng.choice(Q, size=max_features, replace=False)
        gain, f, thr = _gini_best_split(X[idx], y[idx], counts, n_classes, cand)
        if f < 0:
            return node
        mask = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=float).reshape(len(value), n_classes),
        max_depth=max_depth,
    )


@dataclass(frozen=True)
class TreeEnsemble:
    trees: tuple[DecisionTree, ...]
    max_depth: int
    bootstrap_seeds: tuple[int, ...]
    n_classes: int
    n_features: int

    def member_probas(self, Z) -> np.ndarray:
        """(K, n, C) leaf distributions of every member."""
        Z = np.atleast_2d(_check_query(Z, self.n_features))
        return np.stack([t.predict_proba(Z) for t in self.trees])

    def predict_proba(self, Z) -> np.ndarray:
        return self.member_probas(Z).mean(axis=0)


def ensemble_fit(train: Dataset, n_trees: int = 100, max_depth: int = 4, seed: int = 0) -> TreeEnsemble:
    """Bootstrap forest of Gini trees with ``ceil(sqrt(Q))`` candidate features per split.

    Each tree draws its own seed from ``seed`` up front, so the ensemble does
    not depend on the order in which trees are grown.
    """
    if train.n_rows == 0:
        raise ModelError("empty training set")
    seeds = tuple(int(s) for s in np.random.SeedSequence(seed).generate_state(n_trees))
    max_features = math.ceil(math.sqrt(train.n_features))
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        boot = rng.integers(0, train.n_rows, size=train.n_rows)
        trees.append(
            fit_tree(train.features[boot], train.labels[boot], train.n_classes, max_depth, max_features, rng)
        )
    return TreeEnsemble(tuple(trees), max_depth, seeds, train.n_classes, train.n_features)


def ensemble_member_probas(model: TreeEnsemble, x) -> np.ndarray:
    x = _check_query(x, model.n_features)
    if x.ndim != 1:
        raise ModelError("ensemble_member_probas expects a single feature vector")
    return model.member_probas(x[None, :])[:, 0, :]
