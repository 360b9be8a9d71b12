import math

import pytest

from density import (
    cutoff_weight,
    density_profile,
    density_ratio_check,
    gaussian_density_at_scale,
    gaussian_density_limit,
    gaussian_density_oracle,
    heat_kernel_weight,
    huisken_energy,
    monotonicity_violations,
)
from errors import InvalidInputError, OutOfRangeError
from model_catalog import ModelKind, make_model
from pipelines import catalog_times
from spacetime import SpacetimePoint

ORIGIN = SpacetimePoint((0.0, 0.0), 0.0)


def test_oracles():
    assert gaussian_density_oracle(1) == pytest.approx(math.sqrt(2 * math.pi / math.e))
    assert gaussian_density_oracle(2) == pytest.approx(4 / math.e)


def test_kernel_and_cutoff():
    assert heat_kernel_weight(ORIGIN, (0.0, 0.0), -1.0, 1) == pytest.approx(1 / math.sqrt(4 * math.pi))
    assert cutoff_weight(ORIGIN, (0.5, 0.0), 0.0, 1) == pytest.approx(0.75 ** 3)
    assert cutoff_weight(ORIGIN, (2.0, 0.0), 0.0, 1) == 0.0
    with pytest.raises(InvalidInputError):
        heat_kernel_weight(ORIGIN, (0.0, 0.0), 0.0, 1)


def test_shrinking_circle_density_is_scale_invariant(circle_track):
    for tau in (0.25, 0.0625, 2 ** -10):
        assert gaussian_density_at_scale(circle_track, ORIGIN, tau) == pytest.approx(
            gaussian_density_oracle(1), rel=1e-9
        )


def test_shrinking_circle_density_limit(circle_track):
    limit = gaussian_density_limit(circle_track, ORIGIN)
    assert limit.converged
    assert limit.value == pytest.approx(math.sqrt(2 * math.pi / math.e), abs=1e-3)
    assert limit.profile.monotone()


def test_shrinking_sphere_density_limit(sphere_track):
    limit = gaussian_density_limit(sphere_track, SpacetimePoint.origin(3))
    assert limit.value == pytest.approx(4 / math.e, abs=1e-3)


def test_regular_point_of_a_line_has_unit_density(plane_track):
    limit = gaussian_density_limit(plane_track, SpacetimePoint((0.3, 0.0), 0.5))
    assert limit.value == pytest.approx(1.0, abs=1e-2)


def test_density_limit_outside_the_track(plane_track):
    with pytest.raises(OutOfRangeError):
        gaussian_density_limit(plane_track, SpacetimePoint((0.0, 0.0), -2.0))


def test_huisken_energy_vanishes_on_shrinkers_and_is_ordered(circle_track):
    assert huisken_energy(circle_track, ORIGIN, 0.25, 0.125) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(InvalidInputError):
        huisken_energy(circle_track, ORIGIN, 0.5, 0.25)
    with pytest.raises(InvalidInputError):
        huisken_energy(circle_track, ORIGIN, 0.1, 0.2)


def test_off_center_energy_is_positive(circle_track):
    X = SpacetimePoint((0.3, 0.0), -0.02)
    assert huisken_energy(circle_track, X, 0.4, 0.05) > 0


def test_density_ratio_bound(circle_track):
    ratio, bound = density_ratio_check(circle_track, SpacetimePoint((1.0, 0.0), -0.5), 0.5)
    assert 0 < ratio <= bound


def test_monotone_profiles_have_no_violations(circle_track):
    points = [ORIGIN, SpacetimePoint((0.3, 0.0), -0.02)]
    assert monotonicity_violations(circle_track, points, [0.25, 0.0625, 0.015625]) == []


def test_profile_skips_uncovered_scales(circle_track):
    profile = density_profile(circle_track, SpacetimePoint((0.0, 0.0), -1.5), [0.25, 1.0])
    assert profile.taus == [0.25]


def test_huisken_energy_telescopes(simulated_circle):
    X = SpacetimePoint((0.2, 0.1), 0.3)
    r1, r2, r3 = 0.45, 0.2, 0.05
    total = huisken_energy(simulated_circle, X, r1, r3)
    parts = huisken_energy(simulated_circle, X, r1, r2) + huisken_energy(simulated_circle, X, r2, r3)
    assert parts == pytest.approx(total, abs=1e-12)


def test_cylinder_density_matches_its_circle_factor():
    model = make_model(ModelKind.SHRINKER_CYLINDER, 2, j=1, scale=2.0, resolution=64)
    limit = gaussian_density_limit(model.as_track(catalog_times()), SpacetimePoint.origin(3))
    assert limit.value == pytest.approx(gaussian_density_oracle(1), abs=1e-3)


@pytest.mark.slow
def test_simulated_flows_have_monotone_localized_density(simulated_circle, simulated_dumbbell):
    taus = [0.25 * 2.0 ** -k for k in range(6)]
    centers = [SpacetimePoint((0.0, 0.0), t) for t in (0.1, 0.2, 0.3, 0.4, 0.45)]
    assert monotonicity_violations(simulated_circle, centers, taus) == []
    t_pinch = simulated_dumbbell.singular_times[0]
    axis = [SpacetimePoint((0.0, 0.0, 0.0), f * t_pinch) for f in (0.5, 0.75, 0.9)]
    assert monotonicity_violations(simulated_dumbbell, axis, taus) == []
