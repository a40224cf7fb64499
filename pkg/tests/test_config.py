import pytest

from capcheck import config
from capcheck.config import Settings, load_settings
from capcheck.errors import ConfigError


def write(tmp_path, text):
    path = tmp_path / "capcheck.yaml"
    path.write_text(text)
    return path


def test_packaged_defaults():
    settings = load_settings()
    assert settings == Settings()
    assert settings.monitor.default_thresholds == (0.8, 0.3)
    assert settings.output.color is False


def test_user_file_overrides_single_keys(tmp_path):
    path = write(tmp_path, "simulation:\n  max_duration: 30\nmonitor:\n  default_thresholds: [0.9, 0.5]\n")
    settings = load_settings(path)
    assert settings.simulation.max_duration == 30.0
    assert settings.simulation.dt == 1e-3
    assert settings.monitor.default_thresholds == (0.9, 0.5)


def test_empty_user_file_keeps_defaults(tmp_path):
    assert load_settings(write(tmp_path, "")) == Settings()


def test_home_config_is_picked_up(tmp_path, monkeypatch):
    monkeypatch.setattr(config, "CONFIG_FILE", write(tmp_path, "hazards:\n  tolerance: 0.01\n"))
    assert load_settings().hazards.tolerance == 0.01


def test_environment_variable_names_the_file(tmp_path, monkeypatch):
    monkeypatch.setenv(config.CONFIG_ENV, str(write(tmp_path, "output:\n  color: true\n")))
    assert load_settings().output.color is True


@pytest.mark.parametrize(
    "text, message",
    [
        ("plotting:\n  dpi: 3\n", "unknown section"),
        ("simulation:\n  steps: 3\n", "unknown key"),
        ("simulation:\n  dt: fast\n", "must be a number"),
        ("simulation:\n  dt: -1\n", "must be positive"),
        ("output:\n  color: 1\n", "true or false"),
        ("monitor:\n  default_thresholds: [0.3, 0.8]\n", "unavailable < degraded"),
        ("monitor:\n  default_thresholds: 0.5\n", "two numbers"),
        ("monitor:\n  default_thresholds: [high, low]\n", "two numbers"),
        ("monitor:\n  default_thresholds: [true, false]\n", "two numbers"),
        ("hazards:\n  tolerance: -0.1\n", ">= 0"),
        ("- a\n- b\n", "mapping"),
        ("simulation: [\n", ""),
    ],
)
def test_invalid_files(tmp_path, text, message):
    with pytest.raises(ConfigError, match=message):
        load_settings(write(tmp_path, text))


def test_missing_explicit_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_settings(tmp_path / "absent.yaml")


@pytest.mark.parametrize("flag, color", [("1", True), ("0", False), ("maybe", False)])
def test_color_environment_variable(monkeypatch, flag, color):
    monkeypatch.setenv(config.COLOR_ENV, flag)
    assert load_settings().output.color is color


def test_zero_tolerance_is_allowed(tmp_path):
    assert load_settings(write(tmp_path, "hazards:\n  tolerance: 0\n")).hazards.tolerance == 0.0
