from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import quantile_linear
from uqxai.protocol import (
    COUNTERFACTUAL,
    FEATURE_IMPORTANCE,
    REJECTED,
    RejectionRecord,
    RoutingError,
    RoutingPolicy,
    calibrate,
    most_uncertain,
    rejected_fraction,
    rejection_curve,
    route,
    verdict,
)
from uqxai.uncertainty import UncertaintyEstimate


def U(au, eu, strategy="belief"):
    return UncertaintyEstimate(au, eu, au + eu, strategy)


def fixed(eu_t, au_t):
    return RoutingPolicy(eu_threshold=eu_t, eu_quantile=None, au_threshold=au_t, au_quantile=None)


def test_policy_needs_exactly_one_form():
    with pytest.raises(RoutingError):
        RoutingPolicy(eu_threshold=0.5)  # quantile default still set
    with pytest.raises(RoutingError):
        RoutingPolicy(eu_quantile=None)
    with pytest.raises(RoutingError):
        RoutingPolicy(eu_quantile=1.5)
    assert not RoutingPolicy().calibrated


def test_calibration_quantile_example():
    us = [U(0.0, float(v)) for v in range(1, 11)]
    p = calibrate(RoutingPolicy(eu_quantile=0.7), us)
    assert p.eu_threshold == pytest.approx(7.3, abs=1e-12)
    assert p.eu_threshold == pytest.approx(quantile_linear(list(range(1, 11)), 0.7), abs=1e-12)
    assert p.calibrated and p.strategy == "belief" and p.n_calibration == 10


@settings(max_examples=100, deadline=None)
@given(st.integers(10, 400), st.integers(0, 2**32 - 1))
def test_calibrated_rejection_share(n, seed):
    eu = np.random.default_rng(seed).random(n)
    p = calibrate(RoutingPolicy(eu_quantile=0.7), [U(0.0, float(e)) for e in eu])
    assert p.eu_threshold == pytest.approx(quantile_linear(eu, 0.7), abs=1e-12)
    share = rejected_fraction(eu, p.eu_threshold)
    assert abs(share - 0.3) <= 1.0 / n + 1e-12


def test_quantile_one_rejects_nothing():
    p = calibrate(RoutingPolicy(eu_quantile=1.0), [U(0.1, 0.5), U(0.2, 0.7)])
    assert verdict(p, U(0.0, 1e9)) != REJECTED


def test_mixed_strategies_rejected():
    with pytest.raises(RoutingError, match="mixed"):
        calibrate(RoutingPolicy(), [U(0, 1), U(0, 2, "centroid-rbf")])
    p = calibrate(RoutingPolicy(), [U(0, 1), U(0, 2)])
    with pytest.raises(RoutingError):
        verdict(p, U(0, 1, "centroid-rbf"))
    with pytest.raises(RoutingError, match="calibrate"):
        verdict(RoutingPolicy(), U(0, 1))


def test_verdicts_and_tie_rule():
    p = fixed(1.0, 0.5)
    assert verdict(p, U(0.9, 1.0)) == REJECTED  # EU equal to threshold is rejected
    assert verdict(p, U(0.5, 0.2)) == COUNTERFACTUAL
    assert verdict(p, U(0.1, 0.2)) == FEATURE_IMPORTANCE


def test_rejected_instances_skip_explainers():
    called = []
    explainers = {COUNTERFACTUAL: lambda x: called.append("cf"), FEATURE_IMPORTANCE: lambda x: called.append("fi")}
    out = route(fixed(1.0, 0.5), np.zeros(2), U(0.0, 3.0), explainers)
    assert out.verdict == REJECTED and isinstance(out.payload, RejectionRecord) and called == []
    assert out.payload.epistemic == 3.0
    out = route(fixed(1.0, 0.5), np.zeros(2), U(0.1, 0.0), {FEATURE_IMPORTANCE: lambda x: "phi"})
    assert out.payload == "phi"


def test_explainer_failure_reports_uncertainty():
    def boom(x):
        raise RuntimeError("nope")

    with pytest.raises(RoutingError, match="AU=0.9"):
        route(fixed(1.0, 0.5), np.zeros(2), U(0.9, 0.0), {COUNTERFACTUAL: boom})


def test_route_accepts_a_strategy():
    class Fake:
        def estimate(self, x):
            return U(0.0, float(x[0]))

    assert route(fixed(1.0, 0.5), np.array([2.0]), Fake(), {}).verdict == REJECTED


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2), st.floats(0, 2), st.floats(0, 2), st.floats(0, 2))
def test_raising_eu_never_unrejects(au, eu, extra, t):
    p = fixed(t, 0.5)
    if verdict(p, U(au, eu)) == REJECTED:
        assert verdict(p, U(au, eu + extra)) == REJECTED


def test_rejection_curve_example():
    curve = rejection_curve([0.1, 0.5, 0.9], n_thresholds=5)
    ts = [t for t, _ in curve]
    assert ts[0] == 0.1 and ts[-1] == 0.9
    d = dict(curve)
    assert d[0.5] == pytest.approx(2 / 3)
    assert curve[0][1] == 1.0 and curve[-1][1] == pytest.approx(1 / 3)
    assert rejected_fraction([0.1, 0.5, 0.9], 0.9 + 1e-9) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=60), st.integers(1, 80))
def test_rejection_curve_properties(eu, n):
    curve = rejection_curve(eu, n)
    fr = [f for _, f in curve]
    assert fr[0] == 1.0
    assert all(b <= a for a, b in zip(fr, fr[1:]))
    assert all(f > 0 for f in fr)  # the max value is always rejected at t <= max
    assert rejected_fraction(eu, max(eu) + 1.0) == 0.0


def test_rejection_curve_errors():
    with pytest.raises(RoutingError):
        rejection_curve([])
    with pytest.raises(RoutingError):
        rejection_curve([1.0], 0)


def test_most_uncertain_takes_first_tie():
    us = [U(0.1, 0.4), U(0.9, 0.8), U(0.2, 0.8)]
    assert most_uncertain(us) == 1
    assert most_uncertain(us, "aleatoric") == 1
    with pytest.raises(RoutingError):
        most_uncertain(us, "total")
