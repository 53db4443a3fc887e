from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from oracles import marginal_value, shapley_by_orderings
from uqxai.classifiers import ensemble_fit, knn_fit
from uqxai.dataset import Dataset, SplitSpec, load_csv, normalize_minmax, split
from uqxai.explain import (
    ExplainError,
    coalition_value,
    counterfactual_nn,
    counterfactuals_batch,
    select_background,
    shapley_exact,
    shapley_sampled,
)

DATA = Path(__file__).resolve().parents[1] / "data"


def linear(Z):
    Z = np.atleast_2d(Z)
    s = Z[:, 0] + Z[:, 1]
    return np.column_stack([s, -s])


def test_coalition_value_examples():
    bg = np.array([[1.0, -1.0], [-1.0, 1.0]])  # mean (0, 0)
    x = np.array([1.0, 2.0])
    assert coalition_value(linear, bg, x, [0, 1], 0) == pytest.approx(3.0)
    assert coalition_value(linear, bg, x, [], 0) == pytest.approx(0.0)
    assert coalition_value(linear, bg, x, [0], 0) == pytest.approx(1.0)
    with pytest.raises(ExplainError):
        coalition_value(linear, np.empty((0, 2)), x, [0], 0)


def test_exact_linear_and_constant():
    bg = np.array([[1.0, -1.0], [-1.0, 1.0]])
    phi = shapley_exact(linear, bg, np.array([1.0, 2.0]), 0)
    np.testing.assert_allclose(phi.values, [1.0, 2.0], atol=1e-12)
    const = shapley_exact(lambda Z: np.ones((len(Z), 2)) * 0.5, bg, np.array([1.0, 2.0]), 0)
    assert np.all(const.values == 0)
    one = shapley_exact(lambda Z: np.column_stack([Z[:, 0] ** 2, Z[:, 0]]), np.array([[1.0], [3.0]]), np.array([2.0]), 0)
    assert one.values[0] == pytest.approx(4.0 - 5.0)


def test_exact_rejects_large_q():
    with pytest.raises(ExplainError):
        shapley_exact(linear, np.zeros((2, 13)), np.zeros(13), 0)


def _random_tree_model(seed, Q):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(60, Q))
    y = (X[:, 0] + X[:, min(1, Q - 1)] * rng.uniform() > 0.7).astype(int)
    d = Dataset(X, y, tuple(f"f{i}" for i in range(Q)), ("a", "b"))
    return ensemble_fit(d, n_trees=3, max_depth=3, seed=seed), X


def test_exact_matches_ordering_enumeration():
    model, X = _random_tree_model(0, 4)
    bg, x = X[:5], X[10]
    phi = shapley_exact(model, bg, x, 1)

    def v(S):
        return marginal_value(lambda z: model.predict_proba(z[None, :])[0], bg, x, S, 1)

    np.testing.assert_allclose(phi.values, shapley_by_orderings(v, 4), atol=1e-12)


def test_efficiency_dummy_symmetry():
    rng = np.random.default_rng(1)
    for seed in range(5):
        Q = int(rng.integers(2, 8))
        model, X = _random_tree_model(seed, Q)
        bg, x = X[:8], X[20]
        phi = shapley_exact(model, bg, x, 1)
        full = coalition_value(model, bg, x, range(Q), 1)
        empty = coalition_value(model, bg, x, [], 1)
        assert phi.values.sum() == pytest.approx(full - empty, abs=1e-9)
        for q in set(range(Q)) - {f for t in model.trees for f in t.used_features()}:
            assert phi.values[q] == 0.0

    # twins: the model reads columns 0 and 1 symmetrically
    sym = lambda Z: np.column_stack([np.tanh(Z[:, 0] + Z[:, 1]), Z[:, 2]])  # noqa: E731
    bg = rng.normal(size=(6, 3))
    bg[:, 1] = bg[:, 0]
    x = np.array([0.3, 0.3, -1.0])
    phi = shapley_exact(sym, bg, x, 0)
    assert phi.values[0] == pytest.approx(phi.values[1], abs=1e-12)


def test_sampled_is_deterministic_and_converges():
    model, X = _random_tree_model(3, 6)
    bg, x = X[:10], X[30]
    exact = shapley_exact(model, bg, x, 1).values
    a = shapley_sampled(model, bg, x, 1, n_permutations=100, seed=5)
    b = shapley_sampled(model, bg, x, 1, n_permutations=100, seed=5)
    assert np.array_equal(a.values, b.values)
    big = shapley_sampled(model, bg, x, 1, n_permutations=5000, seed=5)
    assert np.abs(big.values - exact).mean() <= np.abs(a.values - exact).mean() + 1e-12
    assert np.abs(big.values - exact).mean() < 0.01
    const = shapley_sampled(lambda Z: np.full((len(Z), 2), 0.3), bg, x, 0, n_permutations=20)
    assert np.all(const.values == 0)
    with pytest.raises(ExplainError):
        shapley_sampled(model, bg, x, 1, n_permutations=0)


@pytest.fixture(scope="module")
def glass():
    d = load_csv(DATA / "glass.csv", "label")
    tr, te = split(d, SplitSpec(0.7, 11))
    tr, p = normalize_minmax(tr)
    te, _ = normalize_minmax(te, p)
    return tr, te


def test_knn_fast_paths_match_generic(glass):
    tr, te = glass
    knn = knn_fit(tr, 7)
    bg = select_background(tr, 40, 0)
    for x in te.features[:5]:
        fast = shapley_exact(knn, bg, x)
        slow = shapley_exact(knn, bg, x, fast=False)
        np.testing.assert_allclose(fast.values, slow.values, atol=1e-12)
        assert fast.target_class == int(np.argmax(knn.predict_proba(x[None])[0]))
        sf = shapley_sampled(knn, bg, x, n_permutations=15, seed=2)
        ss = shapley_sampled(knn, bg, x, n_permutations=15, seed=2, fast=False)
        np.testing.assert_allclose(sf.values, ss.values, atol=1e-12)


def test_background_selection(glass):
    tr, _ = glass
    a = select_background(tr, 30, 4)
    assert a.n_rows == 30 and np.array_equal(a.features, select_background(tr, 30, 4).features)
    assert select_background(tr, 10_000, 0) is tr


def _ds(X, y):
    X = np.asarray(X, dtype=float)
    return Dataset(X, np.asarray(y), tuple(f"f{i}" for i in range(X.shape[1])), ("A", "B"))


def test_counterfactual_examples():
    train = _ds([[0, 0], [1, 0], [0, 2]], [0, 1, 1])
    cf = counterfactual_nn(train, np.array([0.0, 0.0]), 0)
    assert cf.source_index == 1 and cf.distance == 1.0 and cf.counter_label == 1
    np.testing.assert_array_equal(cf.instance, train.features[1])
    dup = _ds([[0, 0], [0, 0]], [0, 1])
    assert counterfactual_nn(dup, np.array([0.0, 0.0]), 0).distance == 0.0
    with pytest.raises(ExplainError):
        counterfactual_nn(_ds([[0, 0], [1, 1]], [0, 0]), np.zeros(2), 0)


def test_counterfactual_full_scan_and_ties():
    rng = np.random.default_rng(0)
    X = rng.integers(0, 3, size=(40, 2)).astype(float)
    y = rng.integers(0, 2, 40)
    train = _ds(X, y)
    Z = rng.integers(0, 3, size=(30, 2)).astype(float)
    pred = rng.integers(0, 2, 30)
    idx, dist = counterfactuals_batch(train, Z, pred)
    for z, p, i, dd in zip(Z, pred, idx, dist):
        cand = [j for j in range(40) if y[j] != p]
        best = min(np.linalg.norm(z - X[j]) for j in cand)
        first = min(j for j in cand if np.linalg.norm(z - X[j]) == best)
        assert dd == pytest.approx(best) and i == first
        assert counterfactual_nn(train, z, p).source_index == first
