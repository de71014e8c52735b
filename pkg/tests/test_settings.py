"""
Tests for analysis settings
"""

import json

import pytest

from config.settings import AnalysisSettings
from framework.errors import ConfigurationError, MalformedConfig


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("CROSSLAYER_ORACLE_BOUND", "12")
    monkeypatch.setenv("CROSSLAYER_TOLERANCE", "0.001")
    monkeypatch.setenv("CROSSLAYER_LOG_LEVEL", "DEBUG")
    settings = AnalysisSettings.from_env()
    assert settings.oracle_bound == 12
    assert settings.tolerance == 0.001
    assert settings.log_level == "DEBUG"


def test_invalid_environment_value(monkeypatch):
    monkeypatch.setenv("CROSSLAYER_MC_TRIALS", "many")
    with pytest.raises(ConfigurationError):
        AnalysisSettings.from_env()


def test_merge_rejects_unknown_keys(config):
    with pytest.raises(MalformedConfig):
        config.merged({"oracle_bonud": 3})


def test_merge_validates(config):
    assert config.merged({"iewds_bound": 8}).iewds_bound == 8
    with pytest.raises(ConfigurationError):
        config.merged({"mc_trials": 0})


def test_from_file(config, tmp_path):
    path = tmp_path / "analysis.json"
    path.write_text(json.dumps({"settings": {"fee_grid_divisions": 10}}))
    assert config.from_file(str(path)).fee_grid_divisions == 10
    path.write_text("[]")
    with pytest.raises(MalformedConfig):
        config.from_file(str(path))


@pytest.mark.parametrize("raw, expected", [("true", True), ("1", True), ("no", False), ("False", False)])
def test_boolean_environment_values(monkeypatch, raw, expected):
    monkeypatch.setenv("CROSSLAYER_REJECT_AMBIGUOUS", raw)
    assert AnalysisSettings.from_env().reject_ambiguous is expected


def test_invalid_boolean_environment_value(monkeypatch):
    monkeypatch.setenv("CROSSLAYER_REJECT_AMBIGUOUS", "sometimes")
    with pytest.raises(ConfigurationError):
        AnalysisSettings.from_env()
