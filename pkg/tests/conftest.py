import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_report_header(config):
    return "densemble test suite (acceptance criteria print one PASS/FAIL line each; run with -s)"
