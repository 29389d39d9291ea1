import json

import pytest

from app.cli import main


def test_presets_command(capsys):
    assert main(["presets"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"short", "medium", "long", "tilted", "asymmetric"}
    assert out["long"]["stages"][0]["duration"] == 800


def test_run_and_fit(tmp_path, small_document, capsys):
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps(small_document))
    out_dir = tmp_path / "out"
    assert main(["run", "--config", str(config_path), "--out", str(out_dir), "--detector-sigma", "0.1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seed_label"] == "small"
    assert (out_dir / "final_distribution.csv").exists()

    fit_path = tmp_path / "fit.json"
    assert main(["fit", str(out_dir / "final_distribution.csv"), "--centers", "0", "--out", str(fit_path)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert len(fit["peaks"]) == 1
    assert json.loads(fit_path.read_text()) == fit
    assert fit["background"] is None

    assert main(["fit", str(out_dir / "final_distribution.csv"), "--background"]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert len(fit["peaks"]) == 5
    assert set(fit["background"]) == {"amplitude", "center", "sigma", "residual"}


def test_config_errors_exit_nonzero_with_json_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dt": -1}')
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    line = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert line["error"] == "ConfigError"
    assert line["message"].startswith("dt")


def test_missing_distribution_file(tmp_path, capsys):
    assert main(["fit", str(tmp_path / "nope.csv")]) == 1
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"] == "FileNotFoundError"


def test_oracle_check_command(capsys):
    assert main(["oracle-check", "--p-max", "1", "--points", "2", "--gamma-t", "1"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["passed"] is True


def test_preset_and_config_are_exclusive(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--preset", "short", "--config", str(tmp_path / "x.json")])
