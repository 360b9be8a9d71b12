import math

import numpy as np
import pytest

from errors import DataMissingError, InvalidInputError
from model_catalog import ModelKind, make_model, model_slice
from simulator import (
    StopReason,
    StopRule,
    detect_first_singular_time,
    k_convexity_history,
    k_convexity_margin,
    singular_summary,
)
from varifold import FlowTrack, VarifoldSlice


def test_stop_rule_order_and_validation():
    rule = StopRule(t_end=1.0, max_curvature=10.0, min_area=0.1)
    assert rule.check(1.0, 20.0, 0.0, 0) is StopReason.T_END
    assert rule.check(0.5, 10.0, 0.0, 0) is StopReason.MAX_CURVATURE
    assert rule.check(0.5, 1.0, 0.05, 0) is StopReason.MIN_AREA
    assert rule.check(0.5, 1.0, 1.0, 0) is None
    with pytest.raises(InvalidInputError):
        StopRule()


def test_stop_rule_from_config_ignores_nulls():
    rule = StopRule.from_dict({"t_end": None, "max_curvature": None, "min_area": 1e-3})
    assert math.isinf(rule.t_end) and math.isinf(rule.max_curvature)
    assert rule.min_area == 1e-3


def test_k_convexity_of_a_cylinder():
    s = model_slice(make_model(ModelKind.SHRINKER_CYLINDER, 2, j=1, resolution=16), -0.5)
    # lambda_1 = 0 on the axis direction: 2-convex but not 1-convex in the strict sense
    assert k_convexity_margin(s, 1) == pytest.approx(0.0)
    assert k_convexity_margin(s, 2) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        k_convexity_margin(s, 3)


def test_k_convexity_reports_nonpositive_mean_curvature():
    s = VarifoldSlice(t=0.0, n=2, positions=np.zeros((1, 3)), weights=[1.0], principal_curvatures=[[-2.0, 1.0]])
    assert k_convexity_margin(s, 1) == -math.inf


def test_k_convexity_history_skips_empty_slices(sphere_track):
    times, margins = k_convexity_history(sphere_track, 1)
    assert np.all(times < 0)
    np.testing.assert_allclose(margins, 0.5)


def test_singular_time_of_exact_shrinking_circle(circle_track):
    assert detect_first_singular_time(circle_track) == pytest.approx(0.0, abs=1e-3)


def test_singular_time_needs_curvature():
    s = VarifoldSlice(t=0.0, n=1, positions=np.zeros((1, 2)), weights=[1.0])
    flow = FlowTrack(slices=(s,), n=1, N=2, mass_bound=1.0)
    with pytest.raises(DataMissingError):
        detect_first_singular_time(flow)


def test_singular_summary_of_simulation(simulated_circle):
    summary = singular_summary(simulated_circle)
    assert summary["detected_singular_time"] == pytest.approx(0.5, abs=1e-2)
    assert summary["mass_monotone_violations"] == 0
    assert summary["recorded_singular_times"] == list(simulated_circle.singular_times)


def test_circle_stays_convex(simulated_circle):
    _, margins = k_convexity_history(simulated_circle, 1)
    np.testing.assert_allclose(margins, 1.0)


@pytest.mark.slow
def test_dumbbell_two_convexity_is_preserved_until_the_pinch(simulated_dumbbell):
    times, margins = k_convexity_history(simulated_dumbbell, 2)
    margins = margins[times < simulated_dumbbell.singular_times[0]]
    assert np.all(margins > 0)
    assert np.all(np.diff(margins) >= -1e-3)
