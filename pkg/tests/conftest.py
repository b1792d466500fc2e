import math

import numpy as np
import pytest

from nfcorr.geometry import ArrayGeometry
from nfcorr.scattering import GeneralizedOneRing

CARRIER_HZ = 3.5e9
PSI = math.pi / 3
RING_RADIUS = 3.0


@pytest.fixture(scope="session")
def xl_array():
    """512 half-wavelength elements at 3.5 GHz."""
    return ArrayGeometry.from_carrier(512, CARRIER_HZ)


@pytest.fixture(scope="session")
def small_array():
    return ArrayGeometry.from_carrier(32, CARRIER_HZ)


@pytest.fixture(scope="session")
def near_ring():
    return GeneralizedOneRing(10.0, PSI, RING_RADIUS)


@pytest.fixture(scope="session")
def far_ring():
    return GeneralizedOneRing(70.0, PSI, RING_RADIUS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary: one line per numbered criterion -----------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "metric")
    prev = _ACCEPTANCE.get(number)
    passed = report.passed and (prev is None or prev[1])
    _ACCEPTANCE[number] = (title, passed, detail or (prev[2] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title}"
        terminalreporter.write_line(f"{line} [{detail}]" if detail else line)
