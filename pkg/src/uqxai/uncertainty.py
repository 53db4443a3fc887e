"""Aleatoric / epistemic / total uncertainty from three families of models.

* ``ensemble-entropy``: Shannon entropy decomposition over ensemble members.
* ``centroid-rbf``: RBF kernel distance to class centroids.
* ``belief``: discord and non-specificity of an evidential K-NN mass function.

All entropies are in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import evidence
from .classifiers import ModelError, TreeEnsemble, _check_query
from .dataset import Dataset

STRATEGIES = ("ensemble-entropy", "centroid-rbf", "belief")
CENTROID_VARIANTS = ("softmax-entropy", "subtraction")


class StrategyUnavailable(NotImplementedError):
    pass


@dataclass(frozen=True)
class UncertaintyEstimate:
    aleatoric: float
    epistemic: float
    total: float
    strategy: str

    def as_row(self) -> dict:
        return {"AU": self.aleatoric, "EU": self.epistemic, "TU": self.total, "strategy": self.strategy}


def entropy_bits(p, axis=-1) -> np.ndarray:
    """Shannon entropy with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return np.clip(-terms.sum(axis=axis), 0.0, None)


def _check_distributions(P: np.ndarray) -> None:
    if P.ndim < 2 or P.shape[-2] < 1:
        raise ValueError("need at least one member distribution")
    if np.any(P < -1e-12) or not np.all(np.isfinite(P)):
        raise ValueError("member probabilities must be finite and nonnegative")
    if np.any(np.abs(P.sum(axis=-1) - 1.0) > 1e-9):
        raise ValueError("each member distribution must sum to 1")


def entropy_decompose(member_probas) -> UncertaintyEstimate:
    """``member_probas`` is (K, C). AU is the mean member entropy, TU the
    entropy of the mean, EU the difference."""
    P = np.asarray(member_probas, dtype=float)
    if P.ndim != 2:
        raise ValueError("expected a (K, C) array of member distributions")
    au, eu, tu = entropy_decompose_batch(P[:, None, :])
    return UncertaintyEstimate(float(au[0]), float(eu[0]), float(tu[0]), "ensemble-entropy")


def entropy_decompose_batch(member_probas) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised form over (K, n, C); returns (AU, EU, TU) arrays of length n."""
    P = np.asarray(member_probas, dtype=float)
    _check_distributions(np.moveaxis(P, 0, 1))
    au = entropy_bits(P, axis=-1).mean(axis=0)
    tu = entropy_bits(P.mean(axis=0), axis=-1)
    eu = np.clip(tu - au, 0.0, None)
    # keep TU = AU + EU exact after clipping round-off
    return au, eu, au + eu


# ---------------------------------------------------------------------- centroids


@dataclass(frozen=True)
class CentroidModel:
    centroids: np.ndarray  # (C, Q)
    sigma: float = 1.0
    variant: str = "softmax-entropy"
    temperature: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ModelError("sigma must be positive")
        if not self.temperature > 0:
            raise ModelError("temperature must be positive")
        if self.variant not in CENTROID_VARIANTS:
            raise ModelError(f"unknown centroid variant {self.variant!r}")

    @property
    def n_features(self) -> int:
        return self.centroids.shape[1]


def centroid_fit(
    train: Dataset,
    sigma: float = 1.0,
    variant: str = "softmax-entropy",
    temperature: float = 1.0,
    allow_missing: bool = False,
) -> CentroidModel:
    """Class means as centroids.

    With ``allow_missing`` a class absent from ``train`` simply gets no
    centroid (random splits of small classes can drop one); otherwise it is
    an error.
    """
    counts = train.class_counts()
    if train.n_rows == 0:
        raise ModelError("empty training set")
    if np.any(counts == 0) and not allow_missing:
        missing = train.class_names[int(np.flatnonzero(counts == 0)[0])]
        raise ModelError(f"class {missing!r} has no training rows")
    C = np.stack([train.features[train.labels == c].mean(axis=0) for c in np.flatnonzero(counts)])
    return CentroidModel(C, float(sigma), variant, float(temperature))


def centroid_kernel(model: CentroidModel, Z) -> np.ndarray:
    """U_y = exp(-(||x - e_y||^2 / Q) / (2 sigma^2)), shape (n, C)."""
    Z = np.atleast_2d(_check_query(Z, model.n_features))
    diff = Z[:, None, :] - model.centroids[None, :, :]
    scaled = np.sum(diff * diff, axis=2) / model.n_features
    return np.exp(-scaled / (2.0 * model.sigma**2))


def centroid_uncertainty_batch(model: CentroidModel, Z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    U = centroid_kernel(model, Z)
    eu = 1.0 / U.max(axis=1)  # inf once every kernel underflows
    logits = U / model.temperature
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    h = entropy_bits(e / e.sum(axis=1, keepdims=True), axis=1)
    if model.variant == "softmax-entropy":
        return h, eu, h + eu
    # alternative reading: the softmax entropy is the total and AU is what remains
    return h - eu, eu, h


def centroid_uncertainty(model: CentroidModel, x) -> UncertaintyEstimate:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ModelError("centroid_uncertainty expects a single feature vector")
    au, eu, tu = centroid_uncertainty_batch(model, x)
    return UncertaintyEstimate(float(au[0]), float(eu[0]), float(tu[0]), "centroid-rbf")


# ------------------------------------------------------------------------- belief


def belief_uncertainty(m: evidence.MassFunction) -> UncertaintyEstimate:
    au = evidence.discord(m)
    eu = evidence.nonspecificity(m)
    return UncertaintyEstimate(au, eu, au + eu, "belief")


# ---------------------------------------------------------- strategy interface


class Strategy:
    """Fits an uncertainty model on a training split and scores queries."""

    name = ""

    def fit(self, train: Dataset) -> "Strategy":
        raise NotImplementedError

    def batch(self, Z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(AU, EU, TU) arrays for the rows of ``Z``."""
        raise NotImplementedError

    def estimate(self, x) -> UncertaintyEstimate:
        au, eu, tu = self.batch(np.asarray(x, dtype=float)[None, :])
        return UncertaintyEstimate(float(au[0]), float(eu[0]), float(tu[0]), self.name)

    def estimates(self, Z) -> list[UncertaintyEstimate]:
        au, eu, tu = self.batch(Z)
        return [UncertaintyEstimate(float(a), float(e), float(t), self.name) for a, e, t in zip(au, eu, tu)]


class EnsembleEntropyStrategy(Strategy):
    name = "ensemble-entropy"

    def __init__(self, n_trees: int = 100, max_depth: int = 4, seed: int = 0):
        self.n_trees, self.max_depth, self.seed = n_trees, max_depth, seed
        self.model: TreeEnsemble | None = None

    def fit(self, train):
        from .classifiers import ensemble_fit

        self.model = ensemble_fit(train, self.n_trees, self.max_depth, self.seed)
        return self

    def batch(self, Z):
        return entropy_decompose_batch(self.model.member_probas(Z))


class CentroidStrategy(Strategy):
    name = "centroid-rbf"

    def __init__(self, sigma: float = 1.0, variant: str = "softmax-entropy", temperature: float = 1.0):
        self.sigma, self.variant, self.temperature = sigma, variant, temperature
        self.model: CentroidModel | None = None

    def fit(self, train):
        self.model = centroid_fit(train, self.sigma, self.variant, self.temperature, allow_missing=True)
        return self

    def batch(self, Z):
        return centroid_uncertainty_batch(self.model, Z)


class BeliefStrategy(Strategy):
    name = "belief"

    def __init__(self, k: int = 7, alpha: float = 0.95, gamma_scale: float = 1.0):
        self.k, self.alpha, self.gamma_scale = k, alpha, gamma_scale
        self.model: evidence.EknnModel | None = None

    def fit(self, train):
        self.model = evidence.eknn_fit(train, self.k, self.alpha, self.gamma_scale)
        return self

    def batch(self, Z):
        au, eu = evidence.eknn_uncertainty_batch(self.model, Z)
        return au, eu, au + eu


class LikelihoodStrategy(Strategy):
    """Extension slot for plausibility-based decomposition; not implemented."""

    name = "likelihood"

    def fit(self, train):
        raise StrategyUnavailable("strategy unavailable: likelihood-based decomposition is not implemented")

    def batch(self, Z):
        raise StrategyUnavailable("strategy unavailable: likelihood-based decomposition is not implemented")


def make_strategy(name: str, **params) -> Strategy:
    table = {
        "ensemble-entropy": EnsembleEntropyStrategy,
        "centroid-rbf": CentroidStrategy,
        "belief": BeliefStrategy,
        "likelihood": LikelihoodStrategy,
    }
    if name not in table:
        raise ValueError(f"unknown uncertainty strategy {name!r}; choose from {sorted(table)}")
    return table[name](**params)


def log2_classes(C: int) -> float:
    return math.log2(C) if C > 1 else 0.0
