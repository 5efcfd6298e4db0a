import numpy as np
import pytest
from hypothesis import settings

from infopricing import (
    BondSpec,
    DiscreteFactor,
    InfoProcessSpec,
    MarketState,
    whk_quadratic_kernel,
)

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def whk_b():
    """Catalogue kernel (b) with c=1, lam=0.5 on U=5."""
    return whk_quadratic_kernel(1.0, 0.5, 5.0)


@pytest.fixture(scope="session")
def digital_credit():
    return InfoProcessSpec("credit", 2.0, DiscreteFactor.digital(0.8), flow_rate=0.5)


@pytest.fixture(scope="session")
def digital_bond(whk_b, digital_credit):
    return BondSpec(2.0, digital_credit, whk_b)


@pytest.fixture
def state():
    return MarketState(0.5, {"macro": 0.3, "credit": 0.4, "macro2": -0.2})


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
