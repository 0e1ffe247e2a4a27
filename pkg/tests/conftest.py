import numpy as np
import pytest
from hypothesis import settings

from aronsson import make_builtin

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ANISO = [[2.0, 0.6], [0.6, 1.0]]


@pytest.fixture(scope="session")
def iso():
    return make_builtin("isotropic")


@pytest.fixture(scope="session")
def aniso():
    return make_builtin("anisotropic", A=ANISO)


@pytest.fixture(scope="session")
def shifted():
    return make_builtin("shifted_smooth", c=0.3)


@pytest.fixture(scope="session")
def builtins(iso, aniso, shifted):
    return {"isotropic": iso, "anisotropic": aniso, "shifted": shifted}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULT_LINES
    except ImportError:
        return
    if RESULT_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULT_LINES):
            terminalreporter.write_line(RESULT_LINES[n])
