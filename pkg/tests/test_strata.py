import math

import pytest

from errors import InvalidInputError
from spacetime import SpacetimePoint
from strata import (
    MembershipDetail,
    StratConfig,
    bad_scale_bound,
    bad_scale_count,
    decomposition_class_bound,
    energy_decomposition,
    good_scale_set,
    is_quant_stratum_member,
    membership_detail,
    relation_proxy,
    scale_signature,
    scale_ladder,
    stratum_grid,
)

ORIGIN = SpacetimePoint((0.0, 0.0), 0.0)


def test_ladders_are_nested():
    assert scale_ladder(0.25, 0.5) == [1.0, 0.5, 0.25]
    assert scale_ladder(0.3, 0.5) == [1.0, 0.5]
    small = scale_ladder(0.01, 0.25)
    assert scale_ladder(0.1, 0.25) == small[: len(scale_ladder(0.1, 0.25))]
    with pytest.raises(InvalidInputError):
        scale_ladder(0.0, 0.5)


def test_bad_scale_bound_constant():
    cfg = StratConfig(n=1, delta=0.01, q=2, mass_bound=10.0)
    assert cfg.bad_scale_limit == pytest.approx(2820.95, abs=0.01)
    assert cfg.Q == 2822


def test_config_validation():
    with pytest.raises(InvalidInputError):
        StratConfig(n=1, gamma=0.5)
    with pytest.raises(InvalidInputError):
        StratConfig(n=1, q=0)
    assert StratConfig(n=1, gamma=0.25, q=2).gamma_power_ok(8.0)
    assert not StratConfig(n=1, gamma=0.25, q=2).gamma_power_ok(9.0)


def test_signature_bits_below_q_are_set():
    assert bad_scale_count((1, 1, 0, 1, 0), 2) == 1


def test_shrinker_signature_has_no_bad_scales(circle_track):
    cfg = StratConfig(n=1, gamma=0.25, q=2, delta=0.05, beta_max=4, mass_bound=circle_track.mass_bound)
    # both energy scales of alpha = 3 land on sampled slices
    sig = scale_signature(circle_track, ORIGIN, cfg, 3)
    assert sig == (1, 1, 0)
    assert bad_scale_bound(cfg, [sig]) == (0, cfg.bad_scale_limit, True)
    with pytest.raises(InvalidInputError):
        scale_signature(circle_track, ORIGIN, cfg, 5)


def test_energy_decomposition_partitions_points():
    points = [SpacetimePoint((float(i), 0.0), 0.0) for i in range(4)]
    signatures = [(1, 1, 0), (1, 1, 1), (1, 1, 0), (1, 0, 1)]
    classes = energy_decomposition(points, signatures, 3)
    assert sum(len(v) for v in classes.values()) == 4
    assert classes[(1, 1, 0)] == [points[0], points[2]]
    assert list(classes) == sorted(classes)
    assert len(energy_decomposition(points, signatures, 2)) == 2
    assert len(classes) <= decomposition_class_bound(3, 2)
    with pytest.raises(InvalidInputError):
        energy_decomposition(points, signatures, 4)


def test_good_scale_set_keeps_the_self_similar_point(circle_track):
    off = SpacetimePoint((0.3, 0.0), -0.02)
    early = SpacetimePoint((2.0, 0.0), -2.0)
    good = good_scale_set(circle_track, [ORIGIN, off, early], 0.1, 2.0, 0.05)
    assert ORIGIN in good
    assert off not in good
    # scales reaching before the first slice are never good
    assert early not in good


def test_membership_detail_near_threshold():
    detail = MembershipDetail(True, [1.0], [0.105])
    assert detail.near_threshold(0.1)
    assert not MembershipDetail(True, [1.0], [0.2]).near_threshold(0.1)
    assert math.isinf(MembershipDetail(False, [], []).min_dist)


def test_shrinking_circle_center_is_in_the_zeroth_stratum(circle_track):
    detail = membership_detail(circle_track, ORIGIN, 0, 0.05, 0.0625)
    assert detail.member
    assert detail.scales == [1.0, 0.25, 0.0625]
    assert len(detail.dists) == 3


def test_line_points_are_in_no_stratum_below_top(plane_track):
    assert not is_quant_stratum_member(plane_track, ORIGIN, 0, 0.05, 0.5)
    assert not is_quant_stratum_member(plane_track, ORIGIN, 2, 0.05, 0.5)
    with pytest.raises(InvalidInputError):
        is_quant_stratum_member(plane_track, ORIGIN, 3, 0.05, 0.5)


def test_ladder_ratio_must_lie_below_one_half(plane_track):
    with pytest.raises(InvalidInputError):
        is_quant_stratum_member(plane_track, ORIGIN, 0, 0.05, 0.5, gamma=0.5)
    with pytest.raises(InvalidInputError):
        stratum_grid(plane_track, [ORIGIN], [0], [0.05], [0.5], gamma=0.5)
    assert membership_detail(plane_track, ORIGIN, 0, 0.05, 0.25).scales == [1.0, 0.25]


def test_off_support_points_are_not_members(plane_track):
    detail = membership_detail(plane_track, SpacetimePoint((0.0, 5.0), 0.0), 0, 0.05, 0.5)
    assert detail.empty and not detail.member


@pytest.mark.slow
def test_stratum_grid_respects_containment(circle_track):
    points = [ORIGIN, SpacetimePoint((1.0, 0.0), -0.5), SpacetimePoint((0.0, 5.0), 0.0)]
    report = stratum_grid(circle_track, points, [0, 1], [0.05, 0.2], [1.0, 0.5, 0.25])
    assert report.containment_violations() == []
    assert report.membership[(0, 0.05, 0.25)][0]
    assert not any(flags[2] for flags in report.membership.values())
    assert report.scales == [1.0, 0.25]
    rows = report.to_rows()
    assert len(rows) == 3 * 2 * 2
    assert rows[0]["best_kind"] in {"quasistatic_plane", "static_plane"}
    assert "member_eta0.05_r0.25" in rows[0]
    summary = report.summary()
    assert summary["points"] == 3
    assert summary["containment_violations"] == 0


def test_relation_proxy_along_a_line(plane_track):
    proxy = relation_proxy(plane_track, ORIGIN, [0.5, 1.0], 3)
    assert proxy["scales"] == [1.0, 0.5]
    assert max(proxy["dists"]) < 1e-2
    off = relation_proxy(plane_track, SpacetimePoint((0.0, 5.0), 0.0), [0.5], 0)
    assert math.isinf(off["dists"][0])
