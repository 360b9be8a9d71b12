import math

import numpy as np
import pytest

from errors import InvalidInputError
from spacetime import (
    SpacetimePoint,
    Spine,
    SpineKind,
    ball_volume,
    orthonormal_basis,
    parabolic_distance,
    parabolic_distances,
    unit_ball_volume,
    unit_sphere_area,
)


def test_parabolic_distance_takes_the_larger_of_space_and_root_time():
    X = SpacetimePoint((0.0, 0.0), 0.0)
    assert parabolic_distance(X, SpacetimePoint((0.3, 0.4), 0.01)) == pytest.approx(0.5)
    assert parabolic_distance(X, SpacetimePoint((0.1, 0.0), -0.25)) == pytest.approx(0.5)


def test_parabolic_distance_scales_with_parabolic_dilation():
    X = SpacetimePoint((0.2, -0.1), 0.3)
    Y = SpacetimePoint((0.5, 0.7), -0.4)
    lam = 3.0
    Xs = SpacetimePoint(tuple(lam * c for c in X.x), lam ** 2 * X.t)
    Ys = SpacetimePoint(tuple(lam * c for c in Y.x), lam ** 2 * Y.t)
    assert parabolic_distance(Xs, Ys) == pytest.approx(lam * parabolic_distance(X, Y))


def test_vectorized_distances_match_pointwise():
    rows = np.array([[0.3, 0.4, 0.01], [0.0, 0.0, -1.0], [1.0, 1.0, 1.0]])
    center = np.array([0.0, 0.0, 0.0])
    expected = [parabolic_distance(SpacetimePoint.from_array(row), SpacetimePoint.origin(2)) for row in rows]
    np.testing.assert_allclose(parabolic_distances(rows, center), expected)


def test_point_validation():
    with pytest.raises(InvalidInputError):
        SpacetimePoint((1.0,), 0.0)
    with pytest.raises(InvalidInputError):
        SpacetimePoint((0.0, math.nan), 0.0)
    with pytest.raises(InvalidInputError):
        parabolic_distance(SpacetimePoint.origin(2), SpacetimePoint.origin(3))


def test_ball_volumes():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_sphere_area(1) == pytest.approx(2 * math.pi)
    assert unit_sphere_area(2) == pytest.approx(4 * math.pi)
    assert ball_volume(0.5, 2) == pytest.approx(2 * math.pi * 0.5 ** 4)
    with pytest.raises(InvalidInputError):
        ball_volume(0.0, 2)


def test_orthonormal_basis_skips_dependent_vectors():
    basis = orthonormal_basis([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 1.0, 0.0]], 3)
    assert basis.shape == (3, 2)
    np.testing.assert_allclose(basis.T @ basis, np.eye(2), atol=1e-12)


def test_spine_distances():
    axis = np.array([[1.0], [0.0], [0.0]])
    Y = SpacetimePoint((5.0, 0.3, 0.4), 1.0)
    time_slice = Spine(SpineKind.TIME_SLICE, (0.0, 0.0, 0.0), axis, time=0.0)
    half = Spine(SpineKind.HALF_CYLINDER, (0.0, 0.0, 0.0), axis, time=2.0)
    full = Spine(SpineKind.FULL_CYLINDER, (0.0, 0.0, 0.0), axis)
    assert time_slice.distance(Y) == pytest.approx(1.0)
    # before the half-cylinder's top only the spatial offset counts
    assert half.distance(Y) == pytest.approx(0.5)
    assert full.distance(Y) == pytest.approx(0.5)
    assert full.spans([3.0, 0.0, 0.0])
    assert not full.spans([0.0, 1.0, 0.0])


def test_spine_needs_time_unless_full_cylinder():
    with pytest.raises(InvalidInputError):
        Spine(SpineKind.HALF_CYLINDER, (0.0, 0.0), np.zeros((2, 0)))
