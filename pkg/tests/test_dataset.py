from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqxai.dataset import (
    Dataset,
    DatasetError,
    SplitSpec,
    load_csv,
    make_toy_moons,
    normalize_minmax,
    split,
    split_indices,
    write_csv,
)

DATA = Path(__file__).resolve().parents[1] / "data"


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_small_csv(tmp_path):
    p = _write(tmp_path, "f1,f2,label\n1,2,a\n3,4,a\n5,6,b\n7,8,b\n")
    d = load_csv(p, "label")
    assert (d.n_rows, d.n_features, d.n_classes) == (4, 2, 2)
    assert d.labels.tolist() == [0, 0, 1, 1]
    assert d.feature_names == ("f1", "f2")


def test_label_by_index_and_first_appearance_order(tmp_path):
    p = _write(tmp_path, "lab,x\nz,1\ny,2\nz,3\n")
    d = load_csv(p, 0)
    assert d.class_names == ("z", "y")
    assert d.labels.tolist() == [0, 1, 0]


def test_nan_cell_is_reported(tmp_path):
    p = _write(tmp_path, "f1,f2,label\n1,2,a\n3,NaN,b\n")
    with pytest.raises(DatasetError, match=r"row 2.*'f2'"):
        load_csv(p, "label")


def test_load_errors(tmp_path):
    with pytest.raises(DatasetError, match="no such file"):
        load_csv(tmp_path / "missing.csv")
    p = _write(tmp_path, "f1,label\n1,a\n2,a\n")
    with pytest.raises(DatasetError, match="2 classes"):
        load_csv(p, "label")
    with pytest.raises(DatasetError, match="not in header"):
        load_csv(p, "target")
    q = _write(tmp_path, "f1,label\nabc,a\n2,b\n", "q.csv")
    with pytest.raises(DatasetError, match="non-numeric"):
        load_csv(q, "label")


def test_iris_shape():
    d = load_csv(DATA / "iris.csv", "label")
    assert (d.n_rows, d.n_classes, d.n_features) == (150, 3, 4)


def _ds(X, y=None):
    X = np.asarray(X, dtype=float)
    y = np.zeros(len(X), dtype=int) if y is None else np.asarray(y)
    C = int(y.max()) + 1
    return Dataset(X, y, tuple(f"f{i}" for i in range(X.shape[1])), tuple(f"c{i}" for i in range(C)))


def test_normalize_examples():
    d, params = normalize_minmax(_ds([[2, 3], [4, 3], [6, 3]]))
    assert d.features[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert d.features[:, 1].tolist() == [0.5, 0.5, 0.5]
    train, params = normalize_minmax(_ds([[0.0], [10.0]]))
    test, _ = normalize_minmax(_ds([[12.0]]), params)
    assert test.features[0, 0] == pytest.approx(1.2)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_normalize_roundtrip(n, q, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(scale=rng.uniform(0.1, 100), size=(n, q)) + rng.uniform(-50, 50)
    d, params = normalize_minmax(_ds(X))
    assert d.features.min() >= 0 and d.features.max() <= 1
    back = params.inverse(d.features)
    ok = params.span > 0
    np.testing.assert_allclose(back[:, ok], X[:, ok], rtol=1e-12, atol=1e-12 * np.abs(X).max())


def test_split_sizes_and_determinism():
    d = _ds(np.arange(200).reshape(100, 2), np.arange(100) % 2)
    tr, te = split(d, SplitSpec(0.7, seed=3))
    assert (tr.n_rows, te.n_rows) == (70, 30)
    a = split_indices(d, SplitSpec(0.7, seed=3))
    b = split_indices(d, SplitSpec(0.7, seed=3))
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    assert sorted(np.concatenate(a).tolist()) == list(range(100))


def test_many_seeds_give_distinct_splits():
    d = _ds(np.arange(200).reshape(100, 2), np.arange(100) % 2)
    parts = {tuple(split_indices(d, SplitSpec(0.7, seed=s))[0]) for s in range(100)}
    assert len(parts) == 100


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(2, 40), min_size=2, max_size=5), st.floats(0.1, 0.9), st.integers(0, 10_000))
def test_stratified_counts(counts, frac, seed):
    y = np.repeat(np.arange(len(counts)), counts)
    d = _ds(np.arange(y.size, dtype=float)[:, None], y)
    tr_idx, te_idx = split_indices(d, SplitSpec(frac, seed, stratified=True))
    assert set(tr_idx).isdisjoint(te_idx) and len(tr_idx) + len(te_idx) == y.size
    tr_counts = np.bincount(y[tr_idx], minlength=len(counts))
    for c, n in enumerate(counts):
        assert tr_counts[c] in (math.floor(frac * n), math.ceil(frac * n)) or tr_counts[c] in (1, n - 1)


def test_stratified_rejects_singleton_class():
    d = _ds(np.arange(5, dtype=float)[:, None], [0, 0, 0, 0, 1])
    with pytest.raises(DatasetError, match="fewer than 2"):
        split(d, SplitSpec(0.7, 0, stratified=True))


def test_toy_moons():
    d = make_toy_moons(200, noise=0.1, seed=1)
    assert (d.n_rows, d.n_classes, d.n_features) == (400, 2, 2)
    assert np.array_equal(d.features, make_toy_moons(200, 0.1, 1).features)
    clean = make_toy_moons(50, noise=0.0)
    up = clean.features[clean.labels == 0]
    lo = clean.features[clean.labels == 1]
    np.testing.assert_allclose(np.hypot(up[:, 0], up[:, 1]), 1.0)
    np.testing.assert_allclose(np.hypot(lo[:, 0] - 1.0, lo[:, 1] - 0.5), 1.0)


def test_write_csv_roundtrip(tmp_path):
    d = make_toy_moons(5, 0.1, 0)
    write_csv(d, tmp_path / "m.csv")
    back = load_csv(tmp_path / "m.csv", "label")
    np.testing.assert_array_equal(back.features, d.features)
    assert back.labels.tolist() == d.labels.tolist()


def test_dataset_is_read_only():
    d = make_toy_moons(3)
    with pytest.raises(ValueError):
        d.features[0, 0] = 1.0
