import numpy as np
import pytest

from cnnresample.raster import Raster


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_raster(rng, w, h):
    return Raster(rng.random((h, w)))


def mirror(i, n):
    """Reference edge-center reflection, written independently of the library."""
    if n == 1:
        return 0
    while i < 0 or i >= n:
        if i < 0:
            i = -i
        if i >= n:
            i = 2 * (n - 1) - i
    return i


# acceptance verdicts, filled in by test_acceptance and echoed after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")
