import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nuhlab.perturbations import build_pipeline

settings.register_profile(
    "nuhlab",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("nuhlab")


@pytest.fixture(scope="session")
def pipe():
    return build_pipeline()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
