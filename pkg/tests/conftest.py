from pathlib import Path

import pytest

from capcheck import adl, config
from capcheck.kinematics import ScenarioProfile

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch, tmp_path):
    """Keep the developer's own ~/.capcheck and environment out of every test."""
    monkeypatch.delenv(config.CONFIG_ENV, raising=False)
    monkeypatch.delenv(config.COLOR_ENV, raising=False)
    monkeypatch.setattr(config, "CONFIG_FILE", tmp_path / "no-such-config.yaml")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def crosswalk_model():
    return adl.parse_file(FIXTURES / "crosswalk.adl")


@pytest.fixture
def monitor_model():
    return adl.parse_file(FIXTURES / "monitor.adl")


@pytest.fixture
def crosswalk_profile(crosswalk_model) -> ScenarioProfile:
    return ScenarioProfile.from_scenario(crosswalk_model.scenario("crosswalk_25mph"))
