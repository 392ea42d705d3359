"""
Tests for run configuration precedence and validation.
"""

import argparse

import pytest

from sintail.config import CONFIG_FILE_NAME, RunConfig, load_config, read_config_file
from sintail.errors import ConfigError
from sintail.series import Engine


def flags(**kwargs):
    base = dict(
        precision=None,
        workers=None,
        cache_dir=None,
        output=None,
        engine=None,
        precision_ceiling=None,
        config=None,
    )
    base.update(kwargs)
    return argparse.Namespace(**base)


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.precision_bits == 96
        assert config.workers == 1
        assert config.output == "json"
        assert config.engine is None
        assert config.precision_ceiling == 16384

    def test_ceiling_follows_large_precision(self):
        assert RunConfig(precision_bits=20000).precision_ceiling == 20000

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"precision_bits": 16},
            {"precision_bits": "96"},
            {"workers": 0},
            {"output": "xml"},
            {"engine": "quantum"},
            {"precision_bits": 128, "precision_ceiling": 64},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)

    def test_engine_from_string(self):
        config = RunConfig(engine="certified")
        assert config.engine is Engine.CERTIFIED
        assert config.engine_or(Engine.FAST) is Engine.CERTIFIED
        assert RunConfig().engine_or(Engine.FAST) is Engine.FAST

    def test_to_dict(self):
        data = RunConfig(engine=Engine.FAST).to_dict()
        assert data["engine"] == "fast"
        assert data["precision_bits"] == 96


class TestLoadConfig:
    def test_environment_cache_dir(self, isolated_cache):
        assert load_config(flags()).cache_dir == str(isolated_cache)

    def test_yaml_file_in_cwd(self, tmp_path):
        (tmp_path / CONFIG_FILE_NAME).write_text("precision_bits: 128\noutput: human\n")
        config = load_config(flags(), cwd=str(tmp_path))
        assert config.precision_bits == 128
        assert config.output == "human"

    def test_explicit_config_path(self, tmp_path):
        path = tmp_path / "other.yaml"
        path.write_text("workers: 3\nengine: certified\n")
        config = load_config(flags(config=str(path)))
        assert config.workers == 3
        assert config.engine is Engine.CERTIFIED

    def test_env_beats_yaml(self, tmp_path, monkeypatch):
        (tmp_path / CONFIG_FILE_NAME).write_text("workers: 3\n")
        monkeypatch.setenv("SINTAIL_WORKERS", "5")
        assert load_config(flags(), cwd=str(tmp_path)).workers == 5

    def test_flag_beats_env_and_yaml(self, tmp_path, monkeypatch):
        (tmp_path / CONFIG_FILE_NAME).write_text("workers: 3\nprecision_bits: 128\n")
        monkeypatch.setenv("SINTAIL_WORKERS", "5")
        config = load_config(flags(workers=2, precision=200), cwd=str(tmp_path))
        assert config.workers == 2
        assert config.precision_bits == 200

    def test_empty_environment_value_is_ignored(self, monkeypatch):
        monkeypatch.setenv("SINTAIL_WORKERS", "")
        assert load_config(flags()).workers == 1

    def test_bad_environment_value(self, monkeypatch):
        monkeypatch.setenv("SINTAIL_WORKERS", "many")
        with pytest.raises(ConfigError, match="SINTAIL_WORKERS"):
            load_config(flags())

    def test_user_cache_dir_is_expanded(self, monkeypatch):
        monkeypatch.delenv("SINTAIL_CACHE_DIR")
        config = load_config(flags())
        assert "~" not in config.cache_dir
        assert config.cache_dir.endswith("sintail")

    def test_none_args(self):
        assert load_config(None).precision_bits == 96


class TestConfigFile:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert read_config_file(str(path)) == {}

    @pytest.mark.parametrize(
        "body,match",
        [
            ("precision: 128\n", "unknown keys"),
            ("- 1\n- 2\n", "mapping"),
            ("workers: [1\n", "invalid YAML"),
        ],
    )
    def test_rejects_bad_files(self, tmp_path, body, match):
        path = tmp_path / "bad.yaml"
        path.write_text(body)
        with pytest.raises(ConfigError, match=match):
            read_config_file(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            read_config_file(str(tmp_path / "absent.yaml"))
