import numpy as np
import pytest

from reeb_lab.knot import hopf_fiber, plane_circle, torus_ellipsoid, torus_orbit
from reeb_lab.surface import Ellipsoid, perturbed_ellipsoid


@pytest.fixture(scope="session")
def torus_knot():
    return torus_orbit(torus_ellipsoid(2, 3), 2, 3)


@pytest.fixture(scope="session")
def hopf():
    return hopf_fiber()


@pytest.fixture(scope="session")
def pinched_circle():
    return plane_circle(Ellipsoid(1.0, 1.2))


@pytest.fixture(scope="session")
def generic_surface():
    return perturbed_ellipsoid(1.0, np.sqrt(2.0), {(4, 0, 0, 0): 0.05, (2, 0, 2, 0): 0.03, (0, 1, 0, 3): 0.02})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def generic_orbit(generic_surface):
    from reeb_lab.dynamics import find_periodic_orbit

    return find_periodic_orbit(generic_surface, np.array([1.0, 0, 0, 0]), np.pi)


@pytest.fixture(scope="session")
def generic_path(generic_surface, generic_orbit):
    from reeb_lab.dynamics import linearized_path

    return linearized_path(generic_surface, generic_orbit)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines, key=str):
        ok, detail = lines[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
