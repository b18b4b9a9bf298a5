import os

import pytest

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture(autouse=True, scope="session")
def _run_from_repo_root():
    """Scenario and policy fixtures are addressed relative to the repo root."""
    previous = os.getcwd()
    os.chdir(REPO_ROOT)
    yield
    os.chdir(previous)
