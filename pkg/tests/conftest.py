import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gen import tutorial_scenario  # noqa: E402


@pytest.fixture
def tutorial():
    return tutorial_scenario()


@pytest.fixture
def tutorial_bundle(tutorial, tmp_path):
    from asbench import write_scenario

    path = tmp_path / "tutorial"
    write_scenario(tutorial, path)
    return path
