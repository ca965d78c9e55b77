import importlib.resources as resources
from datetime import datetime, timezone

import pytest

from smarthome.fleet import load_fleet

DEMO_HOME = str(resources.files("smarthome") / "data" / "demo_home.json")
DEMO_SERVER = str(resources.files("smarthome") / "data" / "demo_server.json")

START = datetime(2024, 3, 1, 9, 0, tzinfo=timezone.utc)


@pytest.fixture
def home():
    """Fresh registry + fleet from the bundled demo home."""
    return load_fleet(DEMO_HOME)


@pytest.fixture
def reg(home):
    return home[0]
