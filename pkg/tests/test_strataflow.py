import pytest

import strataflow
from config_manager import ConfigManager
from reports import read_json


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    monkeypatch.setattr(strataflow, "config_manager", ConfigManager(config_dir=tmp_path / "user"))


def test_overrides_from_flags():
    args = strataflow.parse_arguments(
        ["simulate", "--scenario", "dumbbell", "--radius", "2.5", "--t-end", "0.1"]
        + ["--eta", "0.1", "0.2", "--grid", "4"]
    )
    overrides = strataflow.build_overrides(args)
    assert overrides["scenario"] == {
        "type": "dumbbell",
        "radii": [2.5],
        "bell_radius": 2.5,
        "stop": {"t_end": 0.1},
    }
    assert overrides["stratification"] == {"eta": [0.1, 0.2]}
    assert overrides["grid"] == 4
    assert "regularity" not in overrides


def test_unknown_scenario_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        strataflow.main(["simulate", "--scenario", "torus"])
    assert excinfo.value.code == 2


@pytest.mark.parametrize("command", [["stratify", "track.txt"], ["regularity", "track.txt"], ["summarize", "a.json"]])
def test_scenario_flags_belong_to_simulate(command):
    with pytest.raises(SystemExit) as excinfo:
        strataflow.parse_arguments(command + ["--scenario", "circle"])
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit):
        strataflow.parse_arguments(command + ["--radius", "1.0"])


def test_config_errors_exit_with_usage_code(tmp_path, capsys):
    code = strataflow.main(["simulate", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)])
    assert code == strataflow.EXIT_USAGE
    assert "cannot read config file" in capsys.readouterr().err


def test_pipeline_errors_exit_with_one(tmp_path, capsys):
    code = strataflow.main(["simulate", "--scenario", "ellipse", "--radius", "1.0", "--out", str(tmp_path)])
    assert code == strataflow.EXIT_PIPELINE_ERROR
    assert "InvalidInputError" in capsys.readouterr().err


def test_simulate_then_summarize(tmp_path, capsys):
    out = tmp_path / "run"
    code = strataflow.main(["simulate", "--scenario", "shrinking-circle", "--resolution", "32", "--out", str(out)])
    assert code == strataflow.EXIT_OK
    assert (out / "track.txt").exists()
    assert (out / "run-config.yaml").exists()
    assert "track:" in capsys.readouterr().out

    code = strataflow.main(["summarize", str(out / "simulate-summary.json"), "--out", str(out)])
    assert code == strataflow.EXIT_OK
    merged = read_json(out / "run-summary.json")
    assert merged["config_hash"] == read_json(out / "simulate-summary.json")["config_hash"]
