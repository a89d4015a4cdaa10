import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from geosocial.synth import generate, planted_config


@pytest.fixture(scope="session")
def planted():
    """Deterministic 4-region planted corpus shared by slower tests."""
    config = planted_config(seed=7)
    posts, truth = generate(config)
    return config, posts, truth


def pytest_runtest_logreport(report):
    # One visible PASS/FAIL line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.rsplit("::", 1)[-1]
        print(f"\n[acceptance] {name}: {'PASS' if report.passed else 'FAIL'}")
