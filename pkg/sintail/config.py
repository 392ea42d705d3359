"""
Run configuration: command-line flag > environment > sintail.yaml > default.
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Optional

import yaml

from .classify import DEFAULT_CEILING
from .errors import ConfigError
from .hiprec import DEFAULT_PRECISION, MIN_PRECISION
from .series import Engine

log = logging.getLogger(__name__)

CONFIG_FILE_NAME = "sintail.yaml"
OUTPUTS = ("json", "human")


def default_cache_dir() -> str:
    return os.path.join(os.path.expanduser("~"), ".cache", "sintail")


@dataclass(frozen=True)
class RunConfig:
    precision_bits: int = DEFAULT_PRECISION
    engine: Optional[Engine] = None
    cache_dir: Optional[str] = None
    output: str = "json"
    workers: int = 1
    precision_ceiling: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.precision_bits, bool) or not isinstance(self.precision_bits, int):
            raise ConfigError(f"precision_bits must be an integer, got {self.precision_bits!r}")
        if self.precision_bits < MIN_PRECISION:
            raise ConfigError(
                f"precision_bits must be at least {MIN_PRECISION}, got {self.precision_bits}"
            )
        if isinstance(self.workers, bool) or not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")
        if self.output not in OUTPUTS:
            choices = ", ".join(OUTPUTS)
            raise ConfigError(f"output must be one of {choices}, got {self.output!r}")
        if self.precision_ceiling is None:
            object.__setattr__(self, "precision_ceiling", max(DEFAULT_CEILING, self.precision_bits))
        ceiling = self.precision_ceiling
        if not isinstance(ceiling, int) or ceiling < self.precision_bits:
            raise ConfigError(
                f"precision_ceiling {ceiling!r} is below precision_bits {self.precision_bits}"
            )
        if self.engine is not None and not isinstance(self.engine, Engine):
            try:
                object.__setattr__(self, "engine", Engine(self.engine))
            except ValueError:
                raise ConfigError(f"unknown engine {self.engine!r}")

    def engine_or(self, default: Engine) -> Engine:
        return self.engine if self.engine is not None else default

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["engine"] = self.engine.value if self.engine else None
        return data


def env_or_none(name: str) -> Optional[str]:
    val = os.environ.get(name)
    return val if val else None


def _env_int(name: str) -> Optional[int]:
    val = env_or_none(name)
    if val is None:
        return None
    try:
        return int(val)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {val!r}")


def read_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a mapping of settings")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {', '.join(unknown)}")
    return data


def load_config(args: Any = None, cwd: Optional[str] = None) -> RunConfig:
    """Build a RunConfig from parsed arguments, environment and config file.

    ``args`` is an argparse namespace (or None); attributes that are None are
    treated as not given.
    """
    values: Dict[str, Any] = {"cache_dir": default_cache_dir()}

    path = getattr(args, "config", None)
    if path is None:
        candidate = os.path.join(cwd or os.getcwd(), CONFIG_FILE_NAME)
        if os.path.exists(candidate):
            path = candidate
    if path is not None:
        log.debug("reading config from %s", path)
        values.update(read_config_file(path))

    cache_dir = env_or_none("SINTAIL_CACHE_DIR")
    if cache_dir is not None:
        values["cache_dir"] = cache_dir
    workers = _env_int("SINTAIL_WORKERS")
    if workers is not None:
        values["workers"] = workers

    flags = {
        "precision_bits": "precision",
        "workers": "workers",
        "cache_dir": "cache_dir",
        "output": "output",
        "engine": "engine",
        "precision_ceiling": "precision_ceiling",
    }
    for key, attr in flags.items():
        val = getattr(args, attr, None)
        if val is not None:
            values[key] = val

    config = RunConfig(**values)
    if config.cache_dir:
        config = replace(config, cache_dir=os.path.expanduser(config.cache_dir))
    return config
