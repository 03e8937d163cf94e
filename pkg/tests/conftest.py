import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from irdecoherence.spectral import FormFactor

settings.register_profile("repro", derandomize=True, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repro")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def critical_sigma1():
    """``J = w^2 exp(-w)``: velocity-critical, with ``phi = ln(1 + t^2) / 4``."""
    return FormFactor(sigma=1.0, cutoff=2.0, amplitude=1.0)


@pytest.fixture(scope="session")
def regular_sigma2():
    return FormFactor(sigma=2.0, cutoff=1.0).with_norm(0.25)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
