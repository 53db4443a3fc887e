"""Feature-importance (Shapley) and nearest-neighbour counterfactual explanations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .classifiers import KnnModel, ModelError, squared_distances
from .dataset import Dataset

MAX_EXACT_FEATURES = 12


class ExplainError(ValueError):
    pass


@dataclass(frozen=True)
class ImportanceVector:
    values: np.ndarray
    target_class: int
    estimator: str  # "exact" or "permutation-sampled"
    n_samples: int = 0
    std_error: np.ndarray | None = None

    def top_features(self, n: int = 2) -> list[int]:
        order = np.argsort(-np.abs(self.values), kind="stable")
        return [int(i) for i in order[:n]]


@dataclass(frozen=True)
class Counterfactual:
    instance: np.ndarray
    source_index: int
    counter_label: int
    distance: float


def _scores(model, Z: np.ndarray) -> np.ndarray:
    if hasattr(model, "predict_proba"):
        return np.asarray(model.predict_proba(Z), dtype=float)
    return np.asarray(model(Z), dtype=float)


def _background_matrix(background) -> np.ndarray:
    B = background.features if isinstance(background, Dataset) else np.asarray(background, dtype=float)
    B = np.atleast_2d(B)
    if B.shape[0] == 0:
        raise ExplainError("empty background")
    return B


def select_background(train: Dataset, max_rows: int = 100, seed: int = 0) -> Dataset:
    """Uniform subsample of the training rows (all of them when few enough)."""
    if train.n_rows <= max_rows:
        return train
    idx = np.sort(np.random.default_rng(seed).choice(train.n_rows, size=max_rows, replace=False))
    return train.subset(idx)


def _hybrids(x: np.ndarray, B: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Rows z = (x on S, b elsewhere) for every mask row and background row."""
    Z = np.where(masks[:, None, :], x[None, None, :], B[None, :, :])
    return Z.reshape(-1, x.size)


def coalition_value(model, background, x, S, target_class: int) -> float:
    """Mean target score over background rows with the features in ``S`` set to ``x``."""
    B = _background_matrix(background)
    x = np.asarray(x, dtype=float)
    mask = np.zeros(x.size, dtype=bool)
    S = list(S)
    if S and (min(S) < 0 or max(S) >= x.size):
        raise ExplainError("coalition indices outside the feature range")
    mask[S] = True
    return float(_scores(model, _hybrids(x, B, mask[None, :]))[:, target_class].mean())


def _all_masks(Q: int) -> np.ndarray:
    ids = np.arange(1 << Q)
    return (ids[:, None] >> np.arange(Q)[None, :]) & 1 == 1


def _exact_from_values(v: np.ndarray, Q: int) -> np.ndarray:
    ids = np.arange(1 << Q)
    sizes = np.array([bin(i).count("1") for i in ids])
    w = np.array([math.factorial(s) * math.factorial(Q - s - 1) / math.factorial(Q) for s in range(Q)])
    phi = np.zeros(Q)
    for q in range(Q):
        without = ids[(ids >> q) & 1 == 0]
        phi[q] = np.sum(w[sizes[without]] * (v[without | (1 << q)] - v[without]))
    return phi


def coalition_values(model, background, x, target_class: int) -> np.ndarray:
    """v(S) for all 2^Q coalitions indexed by bitmask."""
    B = _background_matrix(background)
    x = np.asarray(x, dtype=float)
    Q = x.size
    if isinstance(model, KnnModel):
        return _kernels.knn_coalition_values_gray(
            x, np.ascontiguousarray(B), model.train_features, model.train_labels, model.k, int(target_class)
        )
    masks = _all_masks(Q)
    out = np.empty(masks.shape[0])
    step = max(1, 200_000 // B.shape[0])
    for s in range(0, masks.shape[0], step):
        sc = _scores(model, _hybrids(x, B, masks[s : s + step]))[:, target_class]
        out[s : s + step] = sc.reshape(-1, B.shape[0]).mean(axis=1)
    return out


def _resolve_target(model, x, target_class):
    if target_class is None:
        return int(np.argmax(_scores(model, x[None, :])[0]))
    return int(target_class)


def shapley_exact(model, background, x, target_class: int | None = None, fast: bool = True) -> ImportanceVector:
    """Exact Shapley values over all coalitions (``Q <= 12``).

    ``model`` is a :class:`KnnModel` or any object/callable returning class
    scores. K-NN models use the compiled incremental path unless ``fast`` is
    off. ``target_class`` defaults to the class predicted for ``x``.
    """
    x = np.asarray(x, dtype=float)
    Q = x.size
    if Q > MAX_EXACT_FEATURES:
        raise ExplainError(f"exact Shapley values need Q <= {MAX_EXACT_FEATURES}, got {Q}")
    target = _resolve_target(model, x, target_class)
    scorer = model if fast else _generic(model)
    v = coalition_values(scorer, background, x, target)
    return ImportanceVector(_exact_from_values(v, Q), target, "exact", 1 << Q)


def _generic(model):
    if isinstance(model, KnnModel):
        return model.predict_proba
    return model


def permutations(Q: int, n_permutations: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.stack([rng.permutation(Q) for _ in range(n_permutations)]).astype(np.int64)


def shapley_sampled(
    model,
    background,
    x,
    target_class: int | None = None,
    n_permutations: int = 200,
    seed: int = 0,
    fast: bool = True,
) -> ImportanceVector:
    """Monte Carlo Shapley values averaged over random feature orderings.

    The orderings depend only on ``seed`` and ``Q``, so two calls sharing a
    seed see the same orderings (useful for comparing nearby inputs).
    """
    if n_permutations < 1:
        raise ExplainError("n_permutations must be >= 1")
    x = np.asarray(x, dtype=float)
    B = _background_matrix(background)
    Q = x.size
    target = _resolve_target(model, x, target_class)
    perms = permutations(Q, n_permutations, seed)
    if fast and isinstance(model, KnnModel):
        contrib = _kernels.knn_permutation_contribs(
            x, np.ascontiguousarray(B), model.train_features, model.train_labels, model.k, target, perms
        )
    else:
        # prefix coalitions of every ordering; each distinct one is scored once
        rank = np.argsort(perms, axis=1)
        masks = rank[:, None, :] < np.arange(Q + 1)[None, :, None]
        uniq, inverse = np.unique(np.packbits(masks.reshape(-1, Q), axis=1), axis=0, return_inverse=True)
        umasks = np.unpackbits(uniq, axis=1, count=Q).astype(bool)
        scorer = _generic(model)
        vals = np.empty(len(umasks))
        step = max(1, 200_000 // B.shape[0])
        for s in range(0, len(umasks), step):
            sc = _scores(scorer, _hybrids(x, B, umasks[s : s + step]))[:, target]
            vals[s : s + step] = sc.reshape(-1, B.shape[0]).mean(axis=1)
        v = vals[inverse.ravel()].reshape(n_permutations, Q + 1)
        contrib = np.empty((n_permutations, Q))
        np.put_along_axis(contrib, perms, np.diff(v, axis=1), axis=1)
    phi = contrib.mean(axis=0)
    se = contrib.std(axis=0, ddof=1) / math.sqrt(n_permutations) if n_permutations > 1 else np.zeros(Q)
    return ImportanceVector(phi, target, "permutation-sampled", n_permutations, se)


def shapley(model, background, x, target_class=None, n_permutations=200, seed=0, max_exact=MAX_EXACT_FEATURES):
    """Exact when ``Q <= max_exact``, sampled otherwise."""
    x = np.asarray(x, dtype=float)
    if x.size <= max_exact:
        return shapley_exact(model, background, x, target_class)
    return shapley_sampled(model, background, x, target_class, n_permutations, seed)


def counterfactual_nn(train: Dataset, x, predicted_label: int) -> Counterfactual:
    """Closest training row carrying a label other than ``predicted_label``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (train.n_features,):
        raise ModelError(f"expected {train.n_features} features, got shape {x.shape}")
    cand = np.flatnonzero(train.labels != predicted_label)
    if cand.size == 0:
        raise ExplainError("no training row with a different label")
    d2 = squared_distances(x[None, :], train.features[cand])[0]
    j = int(cand[int(np.argmin(d2))])  # argmin keeps the first, i.e. lowest index
    return Counterfactual(
        train.features[j].copy(), j, int(train.labels[j]), float(np.linalg.norm(x - train.features[j]))
    )


def counterfactuals_batch(train: Dataset, Z, predicted) -> tuple[np.ndarray, np.ndarray]:
    """(source indices, distances) of the counterfactual for each row of Z."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    d2 = squared_distances(Z, train.features)
    d2[train.labels[None, :] == np.asarray(predicted)[:, None]] = np.inf
    if np.any(~np.isfinite(d2).any(axis=1)):
        raise ExplainError("no training row with a different label")
    idx = np.argmin(d2, axis=1)
    dist = np.linalg.norm(Z - train.features[idx], axis=1)
    return idx, dist
