import math

import numpy as np
import pytest

from errors import InvalidInputError
from model_catalog import ModelKind, make_model
from selfsimilar_fit import (
    KindFit,
    best_symmetry,
    direction,
    fit_kinds,
    fit_selfsimilar,
    orientation_grid,
    select_fit,
)
from spacetime import SpacetimePoint, SpineKind
from varifold import recenter_rescale

ORIGIN = SpacetimePoint((0.0, 0.0), 0.0)


def test_orientation_grids():
    assert len(orientation_grid(2)) == 17
    assert len(orientation_grid(3)) == 17 * 17
    np.testing.assert_allclose(direction((0.0,), 2), [1.0, 0.0])
    np.testing.assert_allclose(direction((math.pi / 2, 0.0), 3), [0.0, 1.0, 0.0], atol=1e-12)
    with pytest.raises(InvalidInputError):
        orientation_grid(4)


def test_select_fit_prefers_the_more_symmetric_model_on_ties():
    sphere = KindFit(make_model(ModelKind.SHRINKER_SPHERE, 1), 0.1, 0)
    plane = KindFit(make_model(ModelKind.STATIC_PLANE, 1), 0.1, 3)
    assert select_fit({0: sphere, 3: plane}, 0) is plane
    assert select_fit({0: sphere, 3: plane}, 3) is plane
    with pytest.raises(InvalidInputError):
        select_fit({0: sphere}, 1)


def test_fit_distance_is_monotone_in_j(circle_track):
    fits = fit_kinds(recenter_rescale(circle_track, ORIGIN, 1.0))
    dists = [select_fit(fits, j).dist for j in range(4)]
    assert all(a <= b for a, b in zip(dists, dists[1:]))


def test_line_is_fitted_by_the_static_plane(plane_track):
    result = fit_selfsimilar(plane_track, ORIGIN, 1.0, 3)
    assert result.kind is ModelKind.STATIC_PLANE
    assert result.dist < 1e-2
    assert result.spine.kind is SpineKind.FULL_CYLINDER
    assert result.spine.spans([1.0, 0.0], tol=1e-2)
    assert best_symmetry(result) == 3


def test_shrinking_circle_at_its_singular_point(circle_track):
    result = fit_selfsimilar(circle_track, ORIGIN, 0.5, 0)
    assert result.kind is ModelKind.SHRINKER_SPHERE
    assert result.dist < 1e-2
    assert result.spine.kind is SpineKind.TIME_SLICE
    assert result.spine.time == pytest.approx(0.0)
    # no line resembles a shrinking circle
    assert fit_selfsimilar(circle_track, ORIGIN, 0.5, 1).dist > 0.05


def test_quasistatic_line_keeps_its_disappearance_time(quasistatic_track):
    X = SpacetimePoint((0.0, 0.0), 0.4)
    result = fit_selfsimilar(quasistatic_track, X, 0.5, 1)
    assert result.kind is ModelKind.QUASISTATIC_PLANE
    assert result.dist < 1e-2
    # T = 0.5 is 0.4 after rescaling; test times only resolve it to the gap (0.375, 0.5]
    assert 0.375 < result.model.T <= 0.5
    assert result.spine.kind is SpineKind.HALF_CYLINDER
    assert result.spine.time == pytest.approx(0.5, abs=0.05)


def test_empty_rescale_gives_the_empty_marker(plane_track):
    result = fit_selfsimilar(plane_track, SpacetimePoint((0.0, 5.0), 0.0), 0.5, 0)
    assert result.empty
    assert math.isinf(result.dist)
    assert result.label == "empty"
    assert best_symmetry(result) == -1


def test_fit_rejects_out_of_range_j(plane_track):
    with pytest.raises(InvalidInputError):
        fit_selfsimilar(plane_track, ORIGIN, 1.0, 4)


@pytest.mark.slow
@pytest.mark.parametrize("r", [0.1, 0.05, 0.025])
def test_dumbbell_pinch_fits_the_shrinking_cylinder(simulated_dumbbell, r):
    X = simulated_dumbbell.singular_points[0]
    result = fit_selfsimilar(simulated_dumbbell, X, r, 0)
    assert result.kind is ModelKind.SHRINKER_CYLINDER
    assert best_symmetry(result) == 1
