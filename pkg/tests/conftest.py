import numpy as np
import pytest

from steklov.dtn import assemble_dtn, steklov_spectrum
from steklov.geometry import CurveSpec, build_curve

# Test domains.  The three-fold curve needs a high basis order before its
# discrete DtN is accurate to the tolerances the eigenfield identities use.
DISK = CurveSpec((), (), n_nodes=64)
TREFOIL = CurveSpec((0.0, 0.0, 0.1), (), n_nodes=256)
OVAL = CurveSpec((0.0, 0.05), (), n_nodes=256)
DISK_ORDER = 16
TREFOIL_ORDER = 64
OVAL_ORDER = 24


def _setup(spec, order, k_max):
    curve = build_curve(spec)
    dtn = assemble_dtn(curve, order)
    return curve, dtn, steklov_spectrum(dtn, k_max)


@pytest.fixture(scope="session")
def disk():
    return _setup(DISK, DISK_ORDER, 10)


@pytest.fixture(scope="session")
def trefoil():
    return _setup(TREFOIL, TREFOIL_ORDER, 12)


@pytest.fixture(scope="session")
def oval():
    return _setup(OVAL, OVAL_ORDER, 12)


def band_limited(rng, theta, n_modes=6, scale=1.0):
    a = rng.standard_normal(n_modes + 1) * scale
    b = rng.standard_normal(n_modes + 1) * scale
    k = np.arange(n_modes + 1)
    return np.cos(np.outer(theta, k)) @ a + np.sin(np.outer(theta, k)) @ b


# --- acceptance summary -----------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _CRITERIA[n] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")
