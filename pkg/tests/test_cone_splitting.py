import numpy as np
import pytest
from scipy.linalg import null_space

from cone_splitting import cone_splitting_case, quasistatic_promotion_check
from errors import CaseViolationError, InvalidInputError
from rotsym_flow import ProfileState, evolve_rotsym, resample_profile
from simulator import StopRule
from spacetime import SpacetimePoint, Spine, SpineKind
from varifold import recenter_rescale

BASE = (0.0, 0.0, 0.0)
E1 = np.array([[1.0], [0.0], [0.0]])
POINT_SPINE = Spine(SpineKind.TIME_SLICE, BASE, np.zeros((3, 0)), time=0.0)
HALF = Spine(SpineKind.HALF_CYLINDER, BASE, E1, time=0.0)
FULL = Spine(SpineKind.FULL_CYLINDER, BASE, E1)


def test_time_slice_point_at_the_same_time_adds_a_direction():
    W = cone_splitting_case(POINT_SPINE, SpacetimePoint((1.0, 0.0, 0.0), 0.1), 0.5)
    assert W.kind is SpineKind.TIME_SLICE
    assert W.time == 0.0
    assert W.dim == 1 and W.spans([1.0, 0.0, 0.0])


def test_time_slice_point_later_in_time_gives_a_half_cylinder():
    W = cone_splitting_case(POINT_SPINE, SpacetimePoint((0.1, 0.0, 0.0), -0.5), 0.5)
    assert W.kind is SpineKind.HALF_CYLINDER
    assert W.dim == 0
    assert W.time == 0.0


def test_time_slice_point_away_in_space_and_time():
    W = cone_splitting_case(POINT_SPINE, SpacetimePoint((1.0, 0.0, 0.0), 0.5), 0.5)
    assert W.kind is SpineKind.HALF_CYLINDER
    assert W.spans([1.0, 0.0, 0.0])
    assert W.time == 0.5


def test_half_cylinder_point_after_vanishing_moves_the_time():
    W = cone_splitting_case(HALF, SpacetimePoint((0.0, 0.1, 0.0), 0.5), 0.5)
    assert W.kind is SpineKind.HALF_CYLINDER
    assert W.same_plane(HALF)
    assert W.time == 0.5


def test_half_cylinder_point_off_the_plane_enlarges_it():
    W = cone_splitting_case(HALF, SpacetimePoint((0.0, 1.0, 0.0), -0.3), 0.5)
    assert W.kind is SpineKind.HALF_CYLINDER
    assert W.dim == 2
    assert W.spans([0.0, 1.0, 0.0]) and W.spans([1.0, 0.0, 0.0])
    assert W.time == 0.0


def test_full_cylinder_enlarges_its_plane():
    W = cone_splitting_case(FULL, SpacetimePoint((0.0, 1.0, 0.0), 0.7), 0.5)
    assert W.kind is SpineKind.FULL_CYLINDER
    assert W.dim == 2
    assert W.time is None


@pytest.mark.parametrize(
    "W, Y, inequality",
    [
        (POINT_SPINE, SpacetimePoint((0.2, 0.0, 0.0), 0.1), "d(y, V) >= rho"),
        (HALF, SpacetimePoint((0.0, 0.1, 0.0), 0.1), "s >= T + rho^2"),
        (FULL, SpacetimePoint((0.0, 0.1, 0.0), 0.0), "d(y, V) >= rho"),
    ],
)
def test_case_preconditions_name_the_failed_inequality(W, Y, inequality):
    with pytest.raises(CaseViolationError) as excinfo:
        cone_splitting_case(W, Y, 0.5)
    assert excinfo.value.inequality == inequality
    assert inequality in str(excinfo.value)


def test_invalid_case_inputs():
    with pytest.raises(InvalidInputError):
        cone_splitting_case(FULL, SpacetimePoint((0.0, 1.0, 0.0), 0.0), 0.0)
    with pytest.raises(InvalidInputError):
        cone_splitting_case(FULL, SpacetimePoint((0.0, 1.0), 0.0), 0.5)


def test_quasistatic_line_is_static_well_before_it_vanishes(quasistatic_track):
    W = Spine(SpineKind.HALF_CYLINDER, (0.0, 0.0), [[1.0], [0.0]], time=0.5)
    assert quasistatic_promotion_check(quasistatic_track, W, SpacetimePoint((0.0, 0.0), -0.5), 0.25, 0.1)


def test_promotion_preconditions(quasistatic_track):
    W = Spine(SpineKind.HALF_CYLINDER, (0.0, 0.0), [[1.0], [0.0]], time=0.5)
    with pytest.raises(CaseViolationError) as excinfo:
        quasistatic_promotion_check(quasistatic_track, W, SpacetimePoint((0.0, 0.0), 0.4), 0.25, 0.1)
    assert excinfo.value.inequality == "s <= T - (2 gamma)^2"
    with pytest.raises(CaseViolationError):
        quasistatic_promotion_check(quasistatic_track, W, SpacetimePoint((0.9, 0.0), -0.5), 0.25, 0.1)
    with pytest.raises(CaseViolationError):
        quasistatic_promotion_check(quasistatic_track, FULL, SpacetimePoint((0.0, 0.0), -0.5), 0.25, 0.1)
    with pytest.raises(InvalidInputError):
        quasistatic_promotion_check(quasistatic_track, W, SpacetimePoint((0.0, 0.0), -0.5), 0.5, 0.1)


@pytest.mark.slow
def test_bell_left_by_the_neckpinch_is_static_well_before_it_vanishes(dumbbell_run):
    flow, profiles = dumbbell_run
    t0, pieces = next((t, ps) for t, ps in profiles if t >= flow.singular_times[0] + 0.1)
    assert len(pieces) == 2
    # continue the right bell with uniform spacing so its flat side is resolved
    bell = ProfileState(resample_profile(pieces[1], 257), t=t0)
    rest = evolve_rotsym(bell, None, StopRule(t_end=t0 + 0.15), n_theta=96)

    s = rest.slice_nearest(t0 + 0.07)
    rho = np.linalg.norm(s.positions[:, 1:], axis=1)
    i = int(np.argmax(rho))
    local = recenter_rescale(rest, SpacetimePoint(tuple(s.positions[i]), s.t), 1.0, window=None)
    tangent = null_space(s.normals[i][None, :])
    # a round bell of this radius would vanish after rho^2 / 4
    W = Spine(SpineKind.HALF_CYLINDER, BASE, tangent, time=rho[i] ** 2 / 4)
    assert quasistatic_promotion_check(local, W, SpacetimePoint(BASE, 0.0), 0.25, 0.2)
