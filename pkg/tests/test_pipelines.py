import numpy as np
import pytest

from config_manager import RunConfig
from errors import InvalidInputError
from pipelines import PipelineManager, build_scenario, catalog_times, sample_points
from reports import read_csv, read_json
from track_format import read_track


def catalog_config(kind, tmp_path, **extra):
    data = {"scenario": {"type": kind, "resolution": 32}, "out": str(tmp_path), "points": 6}
    data.update(extra)
    return RunConfig.from_dict(data)


def test_catalog_times_approach_the_origin():
    times = catalog_times()
    assert times[0] == -2.0 and times[-1] == 2.0
    assert np.all(np.diff(times) > 0)
    assert 0.0 in times
    assert np.min(np.abs(times + 2.0 ** -20)) < 1e-12


def test_catalog_scenarios(tmp_path):
    plane = build_scenario(catalog_config("plane", tmp_path))
    assert (plane.n, plane.N) == (1, 2)
    assert plane.provenance["scenario"] == "plane"
    sphere = build_scenario(catalog_config("shrinking-sphere", tmp_path))
    assert sphere.n == 2
    assert sphere.singular_times == (0.0,)
    cylinder = build_scenario(catalog_config("cylinder", tmp_path))
    assert cylinder.N == 3 and not cylinder.closed


@pytest.mark.parametrize(
    "scenario",
    [{"type": "cylinder", "n": 1}, {"type": "ellipse", "radii": [1.0]}],
)
def test_invalid_scenarios(scenario):
    with pytest.raises(InvalidInputError):
        build_scenario(RunConfig.from_dict({"scenario": scenario}))


def test_sample_points_start_with_singular_points(circle_track):
    points = sample_points(circle_track, 5, seed=1)
    assert len(points) == 5
    assert points[0] == circle_track.singular_points[0]
    assert points == sample_points(circle_track, 5, seed=1)
    assert sample_points(circle_track, 1, seed=1) == points[:1]


def test_simulate_writes_a_hashed_track(tmp_path):
    config = catalog_config("shrinking-circle", tmp_path)
    manager = PipelineManager()
    path = manager.simulate(config)
    flow = read_track(path)
    assert flow.provenance["config_hash"] == config.hash
    summary = read_json(tmp_path / "simulate-summary.json")
    assert summary["config_hash"] == config.hash
    assert summary["singular"]["detected_singular_time"] == pytest.approx(0.0, abs=1e-3)
    assert [step["name"] for step in summary["steps"]] == ["simulate", "write_track"]
    assert all("duration_ms" not in step for step in summary["steps"])
    assert all("duration_ms" in step for step in manager.step_log)


def test_failed_steps_are_logged():
    manager = PipelineManager()
    with pytest.raises(InvalidInputError):
        with manager.step("broken", reason="test"):
            raise InvalidInputError("no")
    assert manager.step_log[-1]["status"] == "error"
    assert manager.step_log[-1]["detail"] == {"reason": "test", "error": "no"}


def test_summarize_merges_one_run(tmp_path):
    config = catalog_config("plane", tmp_path)
    manager = PipelineManager()
    manager.simulate(config)
    target = manager.summarize([tmp_path / "simulate-summary.json"], tmp_path / "merged")
    merged = read_json(target)
    assert merged["config_hash"] == config.hash
    assert merged["simulate-summary"]["scenario"] == "plane"


@pytest.mark.slow
def test_stratify_shrinking_circle(tmp_path):
    strat = {"j": [0, 1], "beta": 1, "beta_max": 3}
    config = catalog_config("shrinking-circle", tmp_path, stratification=strat)
    manager = PipelineManager()
    summary = manager.stratify(manager.simulate(config), config)
    assert summary["strata"]["points"] == 6
    assert summary["strata"]["containment_violations"] == 0
    assert summary["bad_scale_bound"]["ok"]
    assert summary["singular_densities"][0]["theta"] == pytest.approx(np.sqrt(2 * np.pi / np.e), abs=1e-2)
    assert set(summary["coverings"]) == {0, 1}
    assert read_csv(tmp_path / "strata.csv")["config_hash"] == config.hash
    assert read_csv(tmp_path / "covering.csv")["rows"][0]["level"] == "0"


@pytest.mark.slow
def test_regularity_shrinking_circle(tmp_path):
    config = catalog_config("shrinking-circle", tmp_path)
    manager = PipelineManager()
    summary = manager.regularity(manager.simulate(config), config)
    assert summary["points"] == 5
    assert summary["domination_violations"] == []
    assert summary["sharpness"] == []
    rows = read_csv(tmp_path / "lp-norms.csv")["rows"]
    assert [float(row["p"]) for row in rows] == [0.5, 1.5]
