import math

import numpy as np
import pytest

from curve_flow import circle_curve, curve_slice
from errors import DataMissingError, InvalidInputError, OutOfRangeError, PrecisionError
from pipelines import sample_points
from regularity import (
    bad_set,
    bad_set_volume_exponent,
    calibrate_epsilon,
    critical_exponent,
    derivative_bounds_check,
    derivative_norm,
    epsilon_regularity_check,
    lp_curvature_norm,
    lp_inverse_regscale,
    regularity_field,
    regularity_scale,
    sharpness_oracle,
    sharpness_study,
)
from rotsym_flow import neck_radius_history
from spacetime import SpacetimePoint
from varifold import FlowTrack, VarifoldSlice

ORIGIN = SpacetimePoint((0.0, 0.0), 0.0)
EARLY = SpacetimePoint((1.0, 0.0), -0.5)
LATE = SpacetimePoint((math.sqrt(0.125), 0.0), -0.0625)


@pytest.fixture(scope="module")
def polygon_track():
    s = curve_slice(circle_curve(1.0, vertices=256).vertices, 0.0)
    return FlowTrack(slices=(s,), n=1, N=2, mass_bound=10.0)


def test_flat_line_is_regular_at_unit_scale(plane_track):
    assert regularity_scale(plane_track, SpacetimePoint((0.3, 0.0), 0.0)) == 1.0


def test_regularity_scale_shrinks_toward_the_singularity(circle_track):
    field = regularity_field(circle_track, [EARLY, LATE])
    early, late = field.scales
    assert 0 < late < early < 1
    assert field.domination_violations() == []
    assert bad_set(circle_track, 0.3, [EARLY, LATE], field) == [LATE]
    row = field.to_rows()[1]
    assert row["A"] == pytest.approx(1 / math.sqrt(0.125))
    assert row["max_rA"] <= 1.0


def test_regularity_needs_a_support_point(circle_track, plane_track):
    with pytest.raises(InvalidInputError):
        regularity_scale(circle_track, SpacetimePoint((0.0, 0.0), -0.5))
    with pytest.raises(InvalidInputError):
        regularity_scale(plane_track, SpacetimePoint((0.0, 0.0), 3.0))


def test_regularity_needs_curvature():
    s = VarifoldSlice(t=0.0, n=1, positions=np.zeros((1, 2)), weights=[1.0])
    with pytest.raises(DataMissingError):
        regularity_scale(FlowTrack(slices=(s,), n=1, N=2, mass_bound=1.0), ORIGIN)


def test_curvature_norms_of_the_shrinking_circle(circle_track, plane_track):
    assert lp_curvature_norm(circle_track, 1.0, t=-0.5) == pytest.approx(2 * math.pi)
    # radius 1/2: length pi times |A|^2 = 4
    assert lp_curvature_norm(circle_track, 2.0, t=-0.125) == pytest.approx(4 * math.pi)
    assert lp_curvature_norm(plane_track, 2.0, mode="spacetime") == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [{"p": 0.0, "t": 0.0}, {"p": 1.0}, {"p": 1.0, "t": 0.0, "mode": "volume"}],
)
def test_lp_norm_arguments_are_validated(plane_track, kwargs):
    with pytest.raises(InvalidInputError):
        lp_curvature_norm(plane_track, **kwargs)
    with pytest.raises(InvalidInputError):
        lp_inverse_regscale(plane_track, **kwargs)


def test_inverse_regularity_scale_of_a_line_is_its_length(plane_track):
    assert lp_inverse_regscale(plane_track, 1.0, t=0.0, stride=16) == pytest.approx(4.0)


def test_epsilon_regularity_on_the_line(plane_track):
    assert epsilon_regularity_check(plane_track, ORIGIN, 0.1, 3, 0.2)
    with pytest.raises(OutOfRangeError):
        epsilon_regularity_check(plane_track, ORIGIN, 0.5, 3, 0.1)


@pytest.mark.slow
def test_calibrated_epsilon_on_the_line(plane_track):
    points = [ORIGIN, SpacetimePoint((0.5, 0.0), 0.0), SpacetimePoint((-0.5, 0.0), 0.5)]
    best, table = calibrate_epsilon(plane_track, points, 0.05, 3, candidates=(0.1, 0.2))
    assert best == 0.2
    assert table[0.2]["points"] == 3
    assert table[0.2]["held"] == 3


def test_critical_exponent():
    assert critical_exponent(2, 1) == 2
    assert critical_exponent(2, 2) == 1
    with pytest.raises(InvalidInputError):
        critical_exponent(2, 3)
    with pytest.raises(InvalidInputError):
        sharpness_study(2, 2, 1.0)


def test_sharpness_oracle_logarithmic_case():
    # p = n + 1 - k integrates 1/tau in time
    ratio = sharpness_oracle(2, 1, 2.0, 1e-4) / sharpness_oracle(2, 1, 2.0, 1e-2)
    assert ratio == pytest.approx(2.0)
    assert sharpness_oracle(2, 2, 0.5, 1e-8) > sharpness_oracle(2, 2, 0.5, 1e-2)


@pytest.mark.parametrize(
    "k, p, verdict",
    [(2, 0.5, "converges"), (2, 1.5, "diverges"), (1, 1.5, "converges"), (1, 2.5, "diverges")],
)
def test_shrinking_cylinder_sharpness(k, p, verdict):
    result = sharpness_study(2, k, p)
    assert result.verdict == verdict
    np.testing.assert_allclose(result.values, result.oracle, rtol=1e-2)
    assert result.as_dict()["taus"] == [1e-2, 1e-4, 1e-6, 1e-8]


def test_derivative_bounds_on_a_round_circle(polygon_track):
    s = polygon_track.slices[0]
    X = SpacetimePoint(tuple(s.positions[0]), 0.0)
    for ell in (1, 2):
        value, ratio = derivative_bounds_check(polygon_track, X, ell)
        assert value == pytest.approx(0.0, abs=1e-6)
        assert ratio < 1


def test_derivative_norm_validation(polygon_track):
    s = polygon_track.slices[0]
    with pytest.raises(InvalidInputError):
        derivative_norm(s, s.positions[0], 0.5, s.normals[0], 3)
    with pytest.raises(PrecisionError):
        derivative_norm(s, s.positions[0], 0.01, s.normals[0], 1)


@pytest.fixture(scope="module")
def dumbbell_samples(simulated_dumbbell):
    """100 seeded support samples, and the neck samples of the thinnest slice before the pinch"""
    flow = simulated_dumbbell
    support = [X for X in sample_points(flow, 110, seed=0) if X not in flow.singular_points][:100]
    pinch = flow.singular_points[0]
    times, radii = neck_radius_history(flow)
    before = times < pinch.t
    s = flow.slice_nearest(times[before][np.argmin(radii[before])])
    neck = [SpacetimePoint(tuple(x), s.t) for x in s.positions if abs(x[0] - pinch.x[0]) < 0.25]
    return support, neck


@pytest.mark.slow
def test_dumbbell_bad_set_exponent(simulated_dumbbell, dumbbell_samples):
    support, neck = dumbbell_samples
    assert neck
    field = regularity_field(simulated_dumbbell, support + neck)
    assert field.domination_violations() == []
    radii = [2.0 ** -k for k in range(7, 2, -1)]
    fit = bad_set_volume_exponent(simulated_dumbbell, field.points, radii, field)
    # n = 2, two-convex
    assert fit.slope >= 2 + 4 - 2 - 0.5


@pytest.mark.slow
def test_dumbbell_epsilon_regularity_calibrates(simulated_dumbbell, dumbbell_samples):
    support, _ = dumbbell_samples
    assert len(support) == 100
    k = simulated_dumbbell.n + 2
    best, table = calibrate_epsilon(simulated_dumbbell, support, 2.0 ** -5, k, candidates=(0.5, 0.25, 0.125))
    assert best is not None
    assert table[best]["points"] == table[best]["held"] == 100
