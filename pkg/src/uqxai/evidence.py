"""Belief functions over a finite label set and the evidential K-NN classifier.

Subsets of the ``C`` labels are encoded as integer bitmasks: bit ``c`` set
means label ``c`` belongs to the subset, so ``(1 << C) - 1`` is the whole
frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifiers import ModelError, nearest_indices, squared_distances
from .dataset import Dataset

MAX_CLASSES = 20
MASS_TOL = 1e-9


class ConflictError(ValueError):
    """Dempster's rule is undefined when the two sources fully contradict."""


def full_mask(num_classes: int) -> int:
    return (1 << num_classes) - 1


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def members(mask: int) -> list[int]:
    return [c for c in range(mask.bit_length()) if mask >> c & 1]


@dataclass(frozen=True)
class MassFunction:
    masses: dict
    num_classes: int

    def __post_init__(self):
        C = self.num_classes
        if not 1 <= C <= MAX_CLASSES:
            raise ValueError(f"num_classes must lie in [1, {MAX_CLASSES}]")
        clean = {}
        top = full_mask(C)
        for A, v in self.masses.items():
            A = int(A)
            v = float(v)
            if not 0 <= A <= top:
                raise ValueError(f"subset mask {A} outside the frame of {C} labels")
            if v < -MASS_TOL:
                raise ValueError(f"negative mass {v} on subset {A}")
            if v > 0:
                clean[A] = clean.get(A, 0.0) + v
        total = sum(clean.values())
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total}, not 1")
        if clean.get(0, 0.0) > MASS_TOL:
            raise ValueError("normalized mass functions carry no mass on the empty set")
        clean.pop(0, None)
        object.__setattr__(self, "masses", clean)

    @classmethod
    def vacuous(cls, num_classes: int) -> "MassFunction":
        return cls({full_mask(num_classes): 1.0}, num_classes)

    @classmethod
    def categorical(cls, label: int, num_classes: int) -> "MassFunction":
        return cls({1 << label: 1.0}, num_classes)

    @classmethod
    def from_dense(cls, dense, num_classes: int) -> "MassFunction":
        dense = np.asarray(dense, dtype=float)
        return cls({i: v for i, v in enumerate(dense) if v > 0}, num_classes)

    @classmethod
    def from_sets(cls, masses: dict, num_classes: int) -> "MassFunction":
        """Build from ``{iterable of labels: mass}``."""
        out = {}
        for A, v in masses.items():
            mask = 0
            for c in A:
                mask |= 1 << int(c)
            out[mask] = out.get(mask, 0.0) + v
        return cls(out, num_classes)

    def __getitem__(self, mask: int) -> float:
        return self.masses.get(int(mask), 0.0)

    def focal_sets(self) -> list[int]:
        return sorted(self.masses)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(1 << self.num_classes)
        for A, v in self.masses.items():
            out[A] = v
        return out


def _zeta_superset(v: np.ndarray, C: int) -> np.ndarray:
    """q(A) = sum of v(B) over supersets B of A."""
    q = v.copy().reshape((2,) * C)
    for axis in range(C):
        sl_lo = [slice(None)] * C
        sl_hi = [slice(None)] * C
        sl_lo[axis] = 0
        sl_hi[axis] = 1
        q[tuple(sl_lo)] += q[tuple(sl_hi)]
    return q.reshape(-1)


def _mobius_superset(q: np.ndarray, C: int) -> np.ndarray:
    m = q.copy().reshape((2,) * C)
    for axis in range(C):
        sl_lo = [slice(None)] * C
        sl_hi = [slice(None)] * C
        sl_lo[axis] = 0
        sl_hi[axis] = 1
        m[tuple(sl_lo)] -= m[tuple(sl_hi)]
    return m.reshape(-1)


def _dense_index_order(C: int) -> np.ndarray:
    # reshape((2,)*C) puts bit C-1 on axis 0; map back to little-endian masks
    masks = np.arange(1 << C)
    rev = np.zeros_like(masks)
    for c in range(C):
        rev |= ((masks >> c) & 1) << (C - 1 - c)
    return rev


def dempster_combine(m1: MassFunction, m2: MassFunction) -> MassFunction:
    """Normalized conjunctive combination.

    Works through commonality functions, which multiply under the
    unnormalized conjunctive rule, so the cost is ``O(C 2^C)`` regardless of
    how many focal sets either input has.
    """
    if m1.num_classes != m2.num_classes:
        raise ValueError("mass functions live on different frames")
    C = m1.num_classes
    perm = _dense_index_order(C)
    d1 = m1.to_dense()[perm]
    d2 = m2.to_dense()[perm]
    q = _zeta_superset(d1, C) * _zeta_superset(d2, C)
    m = _mobius_superset(q, C)[perm]
    m[np.abs(m) < 1e-15] = 0.0
    conflict = m[0]
    norm = 1.0 - conflict
    if norm <= 1e-12:
        raise ConflictError("total conflict between the combined mass functions")
    m[0] = 0.0
    m = np.clip(m, 0.0, None) / norm
    return MassFunction.from_dense(m / m.sum(), C)


def betp(m: MassFunction) -> np.ndarray:
    """Pignistic probabilities: each focal set's mass is split evenly over its labels."""
    p = np.zeros(m.num_classes)
    for A, v in m.masses.items():
        mem = members(A)
        p[mem] += v / len(mem)
    return p


def nonspecificity(m: MassFunction) -> float:
    """sum_A m(A) log2|A|, in bits."""
    return float(sum(v * math.log2(popcount(A)) for A, v in m.masses.items()))


def discord(m: MassFunction) -> float:
    """-sum_A m(A) log2 BetP(A), in bits, where BetP(A) sums BetP over A."""
    p = betp(m)
    total = 0.0
    for A, v in m.masses.items():
        pa = float(p[members(A)].sum())
        if v > 0 and pa < 1.0:
            total -= v * math.log2(pa)
    return max(total, 0.0)


# ------------------------------------------------------------------ evidential K-NN


@dataclass(frozen=True)
class EknnModel:
    train_features: np.ndarray
    train_labels: np.ndarray
    k: int
    alpha: np.floating | float
    gamma: np.ndarray
    n_classes: int
    gamma_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ModelError("alpha must lie in (0, 1)")
        if np.any(np.asarray(self.gamma) <= 0):
            raise ModelError("gamma entries must be positive")

    @property
    def n_features(self) -> int:
        return self.train_features.shape[1]


def mean_pairwise_sqdist(X: np.ndarray) -> float:
    """Mean of ||x_i - x_j||^2 over ordered pairs i != j."""
    n = X.shape[0]
    if n < 2:
        return math.nan
    centred = X - X.mean(axis=0)
    return float(2.0 * np.sum(centred * centred) / (n - 1))


def eknn_fit(train: Dataset, k: int = 7, alpha: float = 0.95, gamma_scale: float = 1.0) -> EknnModel:
    """Fit the evidential K-NN.

    ``gamma_c = gamma_scale / (mean squared distance within class c)``;
    classes with fewer than two rows fall back to the statistic over the
    whole training set.
    """
    if train.n_rows == 0:
        raise ModelError("empty training set")
    if not 1 <= k <= train.n_rows:
        raise ModelError(f"k must lie in [1, {train.n_rows}], got {k}")
    if train.n_classes > MAX_CLASSES:
        raise ModelError(f"at most {MAX_CLASSES} classes are supported")
    X, y = train.features, train.labels
    fallback = mean_pairwise_sqdist(X)
    if not fallback > 0:
        fallback = 1.0
    gamma = np.empty(train.n_classes)
    for c in range(train.n_classes):
        spread = mean_pairwise_sqdist(X[y == c])
        gamma[c] = gamma_scale / (spread if spread > 0 else fallback)
    return EknnModel(X, y, int(k), float(alpha), gamma, train.n_classes, float(gamma_scale))


def neighbour_evidence(model: EknnModel, Z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Labels, squared distances and support ``alpha * exp(-gamma d^2)`` of the K neighbours."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != model.n_features:
        raise ModelError(f"expected {model.n_features} features, got {Z.shape[1]}")
    d2 = squared_distances(Z, model.train_features)
    idx = nearest_indices(d2, model.k)
    lab = model.train_labels[idx]
    dk = np.take_along_axis(d2, idx, axis=1)
    support = model.alpha * np.exp(-model.gamma[lab] * dk)
    return lab, dk, support


def combined_simple_masses(lab: np.ndarray, support: np.ndarray, C: int) -> tuple[np.ndarray, np.ndarray]:
    """Dempster combination of simple support functions focused on singletons.

    Returns the normalized singleton masses ``(n, C)`` and the mass on the
    whole frame ``(n,)``. Closed form: the combined unnormalized mass of
    ``{c}`` is ``(1 - P_c) * prod_{d != c} P_d`` with
    ``P_c = prod_{i: y_i = c} (1 - s_i)``.
    """
    log_keep = np.zeros((lab.shape[0], C))
    for c in range(C):
        log_keep[:, c] = np.sum(np.where(lab == c, np.log1p(-support), 0.0), axis=1)
    keep = np.exp(log_keep)
    frame = np.exp(log_keep.sum(axis=1))
    single = (1.0 - keep) * np.exp(log_keep.sum(axis=1, keepdims=True) - log_keep)
    norm = single.sum(axis=1) + frame
    return single / norm[:, None], frame / norm


def eknn_predict_mass(model: EknnModel, x) -> MassFunction:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ModelError("eknn_predict_mass expects a single feature vector")
    lab, _, support = neighbour_evidence(model, x)
    single, frame = combined_simple_masses(lab, support, model.n_classes)
    C = model.n_classes
    masses = {1 << c: float(single[0, c]) for c in range(C) if single[0, c] > 0}
    top = full_mask(C)
    masses[top] = masses.get(top, 0.0) + float(frame[0])
    return MassFunction(masses, C)


def eknn_uncertainty_batch(model: EknnModel, Z) -> tuple[np.ndarray, np.ndarray]:
    """(discord, non-specificity) for many queries at once, in bits."""
    lab, _, support = neighbour_evidence(model, Z)
    single, frame = combined_simple_masses(lab, support, model.n_classes)
    C = model.n_classes
    if C == 1:
        return np.zeros(len(frame)), np.zeros(len(frame))
    p = single + frame[:, None] / C
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(single > 0, single * np.log2(p), 0.0)
    au = np.clip(-terms.sum(axis=1), 0.0, None)
    eu = frame * math.log2(C)
    return au, eu


def eknn_predict_betp(model: EknnModel, Z) -> np.ndarray:
    lab, _, support = neighbour_evidence(model, Z)
    single, frame = combined_simple_masses(lab, support, model.n_classes)
    return single + frame[:, None] / model.n_classes
