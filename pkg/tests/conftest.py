import pytest

from chns.config import RunConfig
from chns.solver import run


@pytest.fixture(scope="session")
def default_config():
    return RunConfig()


@pytest.fixture(scope="session")
def default_run(default_config):
    return run(default_config)
