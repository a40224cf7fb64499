"""Settings: packaged defaults in config.yaml, optionally overridden by a user file."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_DIR = Path.home() / ".capcheck"
CONFIG_FILE = CONFIG_DIR / "config.yaml"
CONFIG_ENV = "CAPCHECK_CONFIG"
COLOR_ENV = "CAPCHECK_COLOR"


@dataclass(frozen=True)
class SimulationSettings:
    dt: float = 1e-3
    standstill_speed: float = 1e-3
    max_duration: float = 120.0


@dataclass(frozen=True)
class HazardSettings:
    tolerance: float = 1e-6


@dataclass(frozen=True)
class MonitorSettings:
    default_thresholds: Tuple[float, float] = (0.8, 0.3)


@dataclass(frozen=True)
class OutputSettings:
    color: bool = False


@dataclass(frozen=True)
class Settings:
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    hazards: HazardSettings = field(default_factory=HazardSettings)
    monitor: MonitorSettings = field(default_factory=MonitorSettings)
    output: OutputSettings = field(default_factory=OutputSettings)


_SECTIONS = {
    "simulation": SimulationSettings,
    "hazards": HazardSettings,
    "monitor": MonitorSettings,
    "output": OutputSettings,
}


def _read_yaml(text: str, origin: str) -> Dict[str, Any]:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{origin}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{origin}: top level must be a mapping")
    return data


def _coerce(section: str, key: str, value: Any, default: Any, origin: str) -> Any:
    where = f"{origin}: {section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        if key == "tolerance":
            if value < 0:
                raise ConfigError(f"{where} must be >= 0")
        elif value <= 0:
            raise ConfigError(f"{where} must be positive")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"{where} must be a list of two numbers")
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where} must be a list of two numbers")
        degraded, unavailable = (float(v) for v in value)
        if not 0.0 <= unavailable < degraded <= 1.0:
            raise ConfigError(f"{where} must satisfy 0 <= unavailable < degraded <= 1")
        return (degraded, unavailable)
    return value


def _merge(settings: Settings, data: Mapping[str, Any], origin: str) -> Settings:
    updates = {}
    for section, values in data.items():
        if section not in _SECTIONS:
            raise ConfigError(f"{origin}: unknown section '{section}'")
        if not isinstance(values, dict):
            raise ConfigError(f"{origin}: section '{section}' must be a mapping")
        current = getattr(settings, section)
        changes = {}
        for key, value in values.items():
            if not hasattr(current, key):
                raise ConfigError(f"{origin}: unknown key '{section}.{key}'")
            changes[key] = _coerce(section, key, value, getattr(current, key), origin)
        updates[section] = replace(current, **changes)
    return replace(settings, **updates)


def _color_override(settings: Settings) -> Settings:
    flag = os.environ.get(COLOR_ENV)
    if flag is None:
        return settings
    if flag not in ("0", "1"):
        logger.warning("ignoring %s=%r (expected 0 or 1)", COLOR_ENV, flag)
        return settings
    return replace(settings, output=OutputSettings(color=flag == "1"))


def load_settings(path: Optional[Path] = None) -> Settings:
    """Load packaged defaults, then the user file (explicit path, $CAPCHECK_CONFIG, ~/.capcheck)."""
    packaged = resources.files(__package__).joinpath("config.yaml").read_text(encoding="utf-8")
    settings = _merge(Settings(), _read_yaml(packaged, "config.yaml"), "config.yaml")

    if path is None:
        env_path = os.environ.get(CONFIG_ENV)
        if env_path:
            path = Path(env_path)
        elif CONFIG_FILE.exists():
            path = CONFIG_FILE

    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        settings = _merge(settings, _read_yaml(text, str(path)), str(path))
        logger.debug("loaded user config from %s", path)

    return _color_override(settings)
