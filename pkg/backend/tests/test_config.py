"""
Tests for run configuration documents and process settings
"""

import json
from pathlib import Path

import pytest

from config import (
    SimulationConfig,
    dump_config,
    get_settings,
    load_config,
    parse_config,
    read_settings,
)
from errors import ConfigError


def test_defaults():
    config = parse_config("{}")
    assert config.model.kind == "Qubit"
    assert config.bath.shape == "Ohmic"
    assert config.evolution == "BTE"
    assert config.initial_state.kind == "InfiniteTemperature"
    assert config.run.time_cap(config.bath.gamma0) == pytest.approx(2000.0)
    assert config.run.scan_method == "spectral"


def test_dump_is_stable_and_reparses():
    text = json.dumps({
        "model": {"kind": "IsingChain", "L": 4, "h_y": 0.2, "h_z": 0.75, "coupling": "SigmaX"},
        "evolution": "RTE",
        "run": {"t_end_cap": 50.0},
    })
    config = parse_config(text)
    dumped = dump_config(config)
    assert parse_config(dumped) == config
    assert dump_config(parse_config(dumped)) == dumped
    assert list(json.loads(dumped)) == sorted(json.loads(dumped))


def test_syntax_error_reports_position():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('{"model": {"kind": "Qubit",}}')
    assert "line 1" in str(excinfo.value)
    assert excinfo.value.exit_code == 2


@pytest.mark.parametrize("document,key", [
    ({"model": {"kind": "Ladder"}}, "model.kind"),
    ({"bath": {"gamma0": -1.0}}, "bath.gamma0"),
    ({"model": {"L": 40}}, "model.L"),
    ({"evolution": "Lindblad"}, "evolution"),
    ({"run": {"unknown_knob": 1}}, "run.unknown_knob"),
])
def test_validation_errors_name_keys(document, key):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(json.dumps(document))
    assert key in excinfo.value.keys


def test_file_matrix_needs_path():
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"initial_state": {"kind": "FileMatrix"}}))


def test_load_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"bath": {"temperature": 2.0}}))
    assert load_config(path).bath.temperature == 2.0
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("NHTHERM_WORKERS", "3")
    monkeypatch.setenv("NHTHERM_LOG_LEVEL", "debug")
    settings = read_settings()
    assert settings.workers == 3
    assert settings.log_level == "DEBUG"
    assert settings.output_dir == Path("./runs")


def test_settings_env_file(tmp_path, monkeypatch):
    env_file = tmp_path / "nhtherm.env"
    env_file.write_text("NHTHERM_OUTPUT_DIR=/tmp/nhtherm-runs\n")
    monkeypatch.setenv("NHTHERM_OUTPUT_DIR", "")
    monkeypatch.delenv("NHTHERM_OUTPUT_DIR")
    settings = get_settings(env_file)
    assert settings.output_dir == Path("/tmp/nhtherm-runs")
    # the singleton keeps the value until reset
    assert get_settings() is settings


def test_invalid_settings(monkeypatch):
    monkeypatch.setenv("NHTHERM_WORKERS", "zero")
    with pytest.raises(ConfigError):
        read_settings()
    monkeypatch.setenv("NHTHERM_WORKERS", "0")
    with pytest.raises(ConfigError):
        read_settings()


def test_config_is_frozen():
    config = SimulationConfig()
    with pytest.raises(Exception):
        config.evolution = "RTE"
