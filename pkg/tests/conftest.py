import numpy as np
import pytest

from multifsi.fem import Discretization, MaterialParams
from multifsi.geometry import GeometryConfig, build_nested_mesh

_CACHE = {}


def discretization(level: int, **params) -> Discretization:
    """Shared discretizations of the default geometry; solver caches are reused across tests."""
    key = (level, tuple(sorted(params.items())))
    if key not in _CACHE:
        _CACHE[key] = Discretization(build_nested_mesh(GeometryConfig().refined(level)),
                                     MaterialParams(**params))
    return _CACHE[key]


@pytest.fixture(scope="session")
def disc0():
    return discretization(0)


@pytest.fixture(scope="session")
def disc1():
    return discretization(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance lines collected by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
