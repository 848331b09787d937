import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ftlkit.config import RunConfig  # noqa: E402
from ftlkit.threshold import enumerate_library  # noqa: E402


@pytest.fixture(scope="session")
def library():
    return enumerate_library(5)


@pytest.fixture(scope="session")
def run_cfg():
    return RunConfig()


def bundled_blif(name: str) -> str:
    return resources.files("ftlkit.data").joinpath(f"{name}.blif").read_text()


@pytest.fixture(scope="session")
def trained_library(library, run_cfg):
    from ftlkit.flows import train_library

    return train_library(library, run_cfg)
