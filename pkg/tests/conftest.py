import pytest

from yamabe_blowup import corrector as cor
from yamabe_blowup import curvature as cv

ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def curv8():
    return cv.random_admissible(1, 1.0, 8, higher_order=True)


@pytest.fixture(scope="session")
def sol8(curv8):
    return cor.solve_corrector(curv8)


@pytest.fixture(scope="session")
def curv10():
    return cv.random_admissible(1, 1.0, 10, higher_order=True)


@pytest.fixture(scope="session")
def sol10(curv10):
    return cor.solve_corrector(curv10)


@pytest.fixture
def acceptance():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
