# tests/e2e/conftest.py

import subprocess
import sys

import pytest


@pytest.fixture(scope="session")
def run_cli():
    """
    Run `python -m pncsim` in a subprocess and return the completed process.
    """
    def _run(*args, timeout=300):
        return subprocess.run([sys.executable, "-m", "pncsim", *args], capture_output=True,
                              text=True, timeout=timeout)

    return _run
