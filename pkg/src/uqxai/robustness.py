"""Robustness of explanations: local Lipschitz instability and counterfactual distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .explain import Counterfactual


class ExplainerFailure(RuntimeError):
    def __init__(self, message, perturbation):
        super().__init__(message)
        self.perturbation = perturbation


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    n_samples: int
    epsilon: float
    argmax_perturbation: np.ndarray
    ratios: np.ndarray | None = None


def sample_ball(center, epsilon: float, n: int, rng) -> np.ndarray:
    """``n`` points uniform in the L2 ball of radius ``epsilon`` around ``center``.

    Gaussian direction times a radius ``epsilon * U^(1/Q)``. Draws equal to
    the centre are redrawn. Points are drawn one at a time, so the first ``n``
    draws of a longer run from the same generator state are the same points.
    """
    center = np.asarray(center, dtype=float)
    Q = center.size
    out = np.empty((n, Q))
    i = 0
    while i < n:
        g = rng.standard_normal(Q)
        norm = np.linalg.norm(g)
        r = epsilon * rng.random() ** (1.0 / Q)
        if norm == 0 or r == 0:
            continue
        z = center + g * (r / norm)
        if np.array_equal(z, center):
            continue
        out[i] = z
        i += 1
    return out


def lipschitz_estimate(explainer, x, epsilon: float = 0.1, n_samples: int = 30, seed=0) -> LipschitzEstimate:
    """max over sampled x' of ||phi(x) - phi(x')|| / ||x - x'||.

    ``explainer`` maps a feature vector to an importance vector (an array or
    anything with a ``values`` attribute).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pts = sample_ball(x, epsilon, n_samples, rng)

    def call(z):
        try:
            out = explainer(z)
        except Exception as exc:
            raise ExplainerFailure(f"explainer failed at perturbation {z.tolist()}: {exc}", z) from exc
        return np.asarray(getattr(out, "values", out), dtype=float)

    phi0 = call(x)
    ratios = np.empty(n_samples)
    for i, z in enumerate(pts):
        ratios[i] = np.linalg.norm(phi0 - call(z)) / np.linalg.norm(x - z)
    j = int(np.argmax(ratios))
    return LipschitzEstimate(float(ratios[j]), n_samples, float(epsilon), pts[j], ratios)


def cf_dissimilarity(x, cf) -> float:
    """Euclidean distance between an instance and its counterfactual."""
    x = np.asarray(x, dtype=float)
    other = cf.instance if isinstance(cf, Counterfactual) else np.asarray(cf, dtype=float)
    if x.shape != other.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {other.shape}")
    return float(np.linalg.norm(x - other))
