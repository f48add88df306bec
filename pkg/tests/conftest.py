import numpy as np
import pytest

from patchvm import Geometry

R_REF = 0.15
RM_REF = 0.015
V0 = 0.1


@pytest.fixture
def geom():
    return Geometry(R_REF, RM_REF)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
