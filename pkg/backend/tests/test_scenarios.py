import json

import numpy as np
import pytest

from app.core.exceptions import ConfigError, IntegrationError, ScenarioError
from app.services import scenarios
from app.services.basis import build_momentum_grid
from app.services.outputs import read_distribution
from app.services.scenarios import (
    PresetName,
    execute_scenario,
    merge_config,
    parse_config,
    preset,
    run_scenario,
)


def test_presets():
    assert preset("long").stages[0].duration == 800
    assert preset("medium").stages[0].duration == 200
    tilted = preset("tilted")
    assert len(tilted.stages) == 2
    assert tilted.stages[1].omega_minus == 0.0
    assert tilted.stages[1].omega_plus == 0.3
    asym = preset("asymmetric")
    assert asym.stages[0].omega_minus == pytest.approx(0.24)
    for name in PresetName:
        config = preset(name.value)
        grid = build_momentum_grid(config.grid.p_max, config.grid.points_per_recoil)
        assert grid.size == 321
        assert config.dt == pytest.approx(0.02)
        assert config.initial_delta_q == 0.15
        assert config.omega_r == 5e-3
        assert all(s.delta == 0.0 for s in config.stages)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("warp")


def test_empty_document_gives_short_preset():
    assert parse_config("") == preset("short")
    assert parse_config("{}") == preset("short")


def test_document_overrides_stages():
    config = parse_config('{"stages":[{"duration":800,"omega_plus":0.3,"omega_minus":0.3,"delta":0}]}')
    assert config.stages[0].duration == 800
    assert config.grid == preset("short").grid


def test_yaml_document():
    config = parse_config("grid:\n  points_per_recoil: 10\ndetector_sigma: 0.05\n")
    assert config.grid.points_per_recoil == 10
    assert config.grid.p_max == 8.0
    assert config.detector_sigma == 0.05


@pytest.mark.parametrize(
    "text, key",
    [
        ('{"dt": -1}', "dt"),
        ('{"foo": 1}', "foo"),
        ('{"grid": {"points_per_recoil": 0}}', "grid.points_per_recoil"),
        ('{"stages": []}', "stages"),
        ('{"stages": [{"duration": -5, "omega_plus": 0.3, "omega_minus": 0.3}]}', "stages.0.duration"),
        ('{"outputs": {"trajectory": "a.csv", "distribution": "a.csv"}}', "outputs"),
    ],
)
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert str(info.value).startswith(key)
    assert info.value.key == key


def test_malformed_documents():
    with pytest.raises(ConfigError):
        parse_config("{not: [valid")
    with pytest.raises(ConfigError):
        parse_config("[1, 2, 3]")
    with pytest.raises(ConfigError):
        parse_config('{"dt": 0.07}')  # 150 is not a whole number of steps
    with pytest.raises(ConfigError):
        parse_config('{"stages": [{"duration": 10, "omega_plus": 0, "omega_minus": 0}]}')


def test_digest_tracks_content(small_config):
    assert small_config.digest() == merge_config(small_config.model_dump()).digest()
    assert small_config.digest() != merge_config({"dt": 0.01}, small_config).digest()


def test_small_run_writes_outputs(small_config, tmp_path):
    report = run_scenario(small_config, tmp_path)
    assert report.final_gamma_t == pytest.approx(2.0)
    assert report.final_trace + report.lost_trace == pytest.approx(1.0, abs=1e-10)
    assert len(report.stages) == 1
    assert len(report.peaks) == 5
    assert set(report.stages[0].sublevels) == {"g-2", "g-1", "g0", "g+1", "g+2", "e-1", "e0", "e+1"}
    assert report.stages[0].background is not None
    # too short to cover the lifetime window
    assert report.tau_iw is None

    trajectory = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert trajectory[0].startswith("# generated")
    header = trajectory[1].split(",")
    assert header[:5] == ["gamma_t", "trace", "lost_trace", "pop_dark_lambda", "pop_dark_iw"]
    assert len(header) == 5 + 41
    assert len(trajectory) == 2 + 5  # snapshots at steps 0, 25, 50, 75, 100

    dist = read_distribution(tmp_path / "final_distribution.csv")
    assert dist.grid.size == 41
    assert dist.total() == pytest.approx(report.final_trace, abs=1e-10)

    fits = json.loads((tmp_path / "peak_fits.json").read_text())
    assert set(fits[0]["peaks"][0]) == {"amplitude", "center", "sigma", "residual"}
    assert set(fits[0]["background"]) == {"amplitude", "center", "sigma", "residual"}
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["config_digest"] == small_config.digest()


def test_outputs_are_deterministic(small_config, tmp_path):
    run_scenario(small_config, tmp_path / "a")
    run_scenario(small_config, tmp_path / "b")
    for name in ("trajectory.csv", "final_distribution.csv"):
        a = (tmp_path / "a" / name).read_text().splitlines()[1:]
        b = (tmp_path / "b" / name).read_text().splitlines()[1:]
        assert a == b
    assert (tmp_path / "a" / "peak_fits.json").read_bytes() == (tmp_path / "b" / "peak_fits.json").read_bytes()


def test_stage_concatenation(small_document):
    whole = execute_scenario(merge_config(small_document))
    split_doc = dict(small_document)
    stage = dict(small_document["stages"][0], duration=1)
    split_doc["stages"] = [stage, dict(stage)]
    split = execute_scenario(merge_config(split_doc))
    assert np.abs(whole.state.lambda_blocks - split.state.lambda_blocks).max() < 1e-12
    assert np.abs(whole.state.iw_blocks - split.state.iw_blocks).max() < 1e-12
    assert split.trajectory.times[-1] == pytest.approx(2.0)
    assert len(split.report.stages) == 2
    assert np.all(np.diff(split.trajectory.times) > 0)


def test_detector_convolution_is_applied(small_document):
    plain = execute_scenario(merge_config(small_document))
    blurred = execute_scenario(merge_config({**small_document, "detector_sigma": 0.3}))
    assert blurred.distribution.density.max() < plain.distribution.density.max()


def test_stage_failures_carry_stage_and_time(small_document, monkeypatch):
    def broken(*args, **kwargs):
        raise IntegrationError("negative population", gamma_t=1.5)

    monkeypatch.setattr(scenarios, "evolve", broken)
    with pytest.raises(ScenarioError) as info:
        execute_scenario(merge_config(small_document))
    assert info.value.stage_index == 0
    assert info.value.gamma_t == 1.5


def test_observer_uses_first_illuminated_stage(small_document):
    doc = {**small_document, "stages": [
        {"duration": 1, "omega_plus": 0, "omega_minus": 0},
        {"duration": 1, "omega_plus": 0.3, "omega_minus": 0.2},
    ]}
    params = scenarios.observer_params(merge_config(doc))
    assert (params.omega_plus, params.omega_minus) == (0.3, 0.2)
