import numpy as np
import pytest

from cylvar.grids import Grid2, Grid3, sample_scalar


def gaussian(r, z):
    return r * np.exp(-r * r - z * z)


@pytest.fixture
def small_grid():
    return Grid2(32, 65, 6.0, 6.0)


@pytest.fixture
def gauss_small(small_grid):
    return sample_scalar(gaussian, small_grid)


@pytest.fixture
def box():
    return Grid3(33, 3.0)


@pytest.fixture
def det_mode(monkeypatch):
    monkeypatch.setenv("CYLVAR_DETERMINISTIC", "1")


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines, one per criterion, at the end of the run."""
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
