"""Uncertainty-driven routing: reject on high EU, counterfactual on high AU,
feature importance otherwise. Also rejection curves."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .uncertainty import UncertaintyEstimate

REJECTED = "rejected-insufficient-training"
COUNTERFACTUAL = "counterfactual"
FEATURE_IMPORTANCE = "feature-importance"


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class RoutingPolicy:
    eu_threshold: float | None = None
    eu_quantile: float | None = 0.7
    au_threshold: float | None = None
    au_quantile: float | None = 0.5
    strategy: str | None = None  # set by calibrate
    n_calibration: int = 0

    def __post_init__(self):
        for name in ("eu", "au"):
            t, q = getattr(self, f"{name}_threshold"), getattr(self, f"{name}_quantile")
            if (t is None) == (q is None):
                raise RoutingError(f"give exactly one of {name}_threshold and {name}_quantile")
            if q is not None and not 0.0 <= q <= 1.0:
                raise RoutingError(f"{name}_quantile must lie in [0, 1]")

    @property
    def calibrated(self) -> bool:
        return self.eu_quantile is None and self.au_quantile is None

    def to_dict(self) -> dict:
        return {
            "eu_threshold": self.eu_threshold,
            "au_threshold": self.au_threshold,
            "strategy": self.strategy,
            "n_calibration": self.n_calibration,
        }


@dataclass(frozen=True)
class RejectionRecord:
    epistemic: float
    message: str = "the model lacks training data around this instance; its epistemic uncertainty is the explanation"


@dataclass(frozen=True)
class RoutedExplanation:
    verdict: str
    payload: object
    uncertainty: UncertaintyEstimate


def _components(uncertainties) -> tuple[np.ndarray, np.ndarray, str]:
    if len(uncertainties) == 0:
        raise RoutingError("empty uncertainty list")
    names = {u.strategy for u in uncertainties}
    if len(names) > 1:
        raise RoutingError(f"mixed strategies in calibration set: {sorted(names)}")
    au = np.array([u.aleatoric for u in uncertainties], dtype=float)
    eu = np.array([u.epistemic for u in uncertainties], dtype=float)
    return au, eu, names.pop()


def calibrate(policy: RoutingPolicy, uncertainties) -> RoutingPolicy:
    """Resolve quantile thresholds to absolute ones (linear-interpolation quantiles)."""
    au, eu, strategy = _components(uncertainties)
    t_eu = policy.eu_threshold
    t_au = policy.au_threshold
    if policy.eu_quantile is not None:
        t_eu = float(np.quantile(eu, policy.eu_quantile)) if policy.eu_quantile < 1 else np.inf
    if policy.au_quantile is not None:
        t_au = float(np.quantile(au, policy.au_quantile))
    return replace(
        policy,
        eu_threshold=t_eu,
        eu_quantile=None,
        au_threshold=t_au,
        au_quantile=None,
        strategy=strategy,
        n_calibration=len(uncertainties),
    )


def verdict(policy: RoutingPolicy, u: UncertaintyEstimate) -> str:
    if not policy.calibrated:
        raise RoutingError("policy has unresolved quantile thresholds; calibrate it first")
    if policy.strategy is not None and u.strategy != policy.strategy:
        raise RoutingError(f"policy calibrated on {policy.strategy!r}, instance scored with {u.strategy!r}")
    if u.epistemic >= policy.eu_threshold:
        return REJECTED
    if u.aleatoric >= policy.au_threshold:
        return COUNTERFACTUAL
    return FEATURE_IMPORTANCE


def route(policy: RoutingPolicy, x, uncertainty, explainers: dict) -> RoutedExplanation:
    """Route one instance.

    ``uncertainty`` is either an :class:`UncertaintyEstimate` already computed
    for ``x`` or a fitted strategy exposing ``estimate(x)``. ``explainers``
    maps ``"counterfactual"`` and ``"feature-importance"`` to callables of
    ``x``; neither is called when the instance is rejected.
    """
    u = uncertainty if isinstance(uncertainty, UncertaintyEstimate) else uncertainty.estimate(x)
    v = verdict(policy, u)
    if v == REJECTED:
        return RoutedExplanation(v, RejectionRecord(u.epistemic), u)
    try:
        payload = explainers[v](x)
    except Exception as exc:
        raise RoutingError(f"{v} explainer failed (AU={u.aleatoric:.6g}, EU={u.epistemic:.6g}): {exc}") from exc
    return RoutedExplanation(v, payload, u)


def rejection_curve(uncertainties, n_thresholds: int = 50) -> list[tuple[float, float]]:
    """(threshold, share of instances with EU >= threshold) over [min EU, max EU]."""
    if len(uncertainties) == 0:
        raise RoutingError("empty uncertainty list")
    eu = np.array([getattr(u, "epistemic", u) for u in uncertainties], dtype=float)
    if n_thresholds < 1:
        raise RoutingError("n_thresholds must be >= 1")
    grid = np.linspace(eu.min(), eu.max(), n_thresholds)
    srt = np.sort(eu)
    # count of values >= t is n minus the count strictly below t
    frac = 1.0 - np.searchsorted(srt, grid, side="left") / eu.size
    return [(float(t), float(f)) for t, f in zip(grid, frac)]


def rejected_fraction(uncertainties, threshold: float) -> float:
    eu = np.array([getattr(u, "epistemic", u) for u in uncertainties], dtype=float)
    return float(np.mean(eu >= threshold))


def most_uncertain(uncertainties, kind: str = "epistemic") -> int:
    """Index of the largest AU or EU; the first one wins ties."""
    if kind not in ("aleatoric", "epistemic"):
        raise RoutingError("kind must be 'aleatoric' or 'epistemic'")
    if len(uncertainties) == 0:
        raise RoutingError("empty uncertainty list")
    vals = np.array([getattr(u, kind) for u in uncertainties], dtype=float)
    return int(np.argmax(vals))
