import numpy as np
import pytest

from qlayer.catalog import catalog_surface


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def bump():
    return catalog_surface("gaussian_bump", {"h": 1.0, "w": 1.0})


@pytest.fixture(scope="session")
def plane():
    return catalog_surface("plane")


@pytest.fixture(scope="session")
def cone():
    return catalog_surface("smoothed_cone", {"c": 1.0, "smoothing": 1.0})


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Store one summary line per acceptance criterion and return the verdict."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[k])
