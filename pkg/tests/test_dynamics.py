import numpy as np
import pytest

from reeb_lab.core4 import lambda0, sphere_lattice
from reeb_lab.dynamics import (
    NonConvergence,
    action,
    ellipsoid_flow,
    find_periodic_orbit,
    flow,
    flow_samples,
    linearized_path,
    read_orbit_csv,
    write_orbit_csv,
)
from reeb_lab.maslov import rotation_matrix
from reeb_lab.surface import Ellipsoid, Sphere, project_radial, reeb_field, reeb_jacobian

R2 = np.sqrt(2.0)


def test_flow_sphere_quarter():
    assert np.allclose(flow(Sphere(), np.array([1.0, 0, 0, 0]), np.pi / 2), [-1, 0, 0, 0], atol=1e-9)


def test_flow_zero_time_exact():
    p = np.array([0.6, 0.0, 0.0, 0.8])
    assert np.array_equal(flow(Sphere(), p, 0.0), p)


def test_flow_matches_closed_form_ellipsoid(rng):
    E = Ellipsoid(1.0, 1.3)
    for _ in range(20):
        p0 = project_radial(E, rng.normal(size=4))
        t = rng.uniform(-3, 3)
        assert np.allclose(flow(E, p0, t), ellipsoid_flow(E, p0, t), atol=1e-8)


def test_flow_group_property_and_drift(generic_surface, rng):
    for _ in range(3):
        p = project_radial(generic_surface, rng.normal(size=4))
        s, t = rng.uniform(0, 1.5, size=2)
        a = flow(generic_surface, p, s + t)
        b = flow(generic_surface, flow(generic_surface, p, s), t)
        assert np.allclose(a, b, atol=1e-8)
    pts = flow_samples(generic_surface, p, np.linspace(0, 3, 60))
    assert np.max(np.abs(generic_surface.F(pts) - 1)) < 1e-10


def test_periods():
    assert find_periodic_orbit(Sphere(), np.array([0.6, 0, 0, 0.8]), 1.0).period == pytest.approx(np.pi, abs=1e-9)
    E = Ellipsoid(1, R2)
    assert find_periodic_orbit(E, np.array([1.0, 0, 0, 0]), 3.0).period == pytest.approx(np.pi, abs=1e-12)
    assert find_periodic_orbit(E, np.array([0, 0, R2, 0]), 6.0).period == pytest.approx(2 * np.pi, abs=1e-12)


def test_shooting_reproduces_closed_form():
    E = Ellipsoid(1, R2)
    orb = find_periodic_orbit(E, np.array([1.0, 0.01, 0.02, 0]), 3.0, closed_form=False)
    assert orb.period == pytest.approx(np.pi, abs=1e-8)
    assert orb.closure_residual < 1e-8


def test_generic_orbit_invariants(generic_surface, generic_orbit):
    o = generic_orbit
    assert o.method == "shooting"
    assert o.closure_residual < 1e-8
    assert np.max(np.abs(generic_surface.F(o.points) - 1)) < 1e-9
    assert np.allclose(lambda0(o.points, o.velocities), 1.0, atol=1e-10)
    rep = action(o)
    assert rep.mismatch < 1e-8


def test_action_values():
    E = Ellipsoid(1, R2)
    for p0, T in (([1.0, 0, 0, 0], np.pi), ([0, 0, R2, 0], 2 * np.pi)):
        assert action(find_periodic_orbit(E, np.array(p0), T)).integral == pytest.approx(T, abs=1e-8)
    assert action(find_periodic_orbit(Sphere(), np.array([1.0, 0, 0, 0]), np.pi)).integral == pytest.approx(np.pi)


def test_linearized_path_sphere_is_rotation():
    orb = find_periodic_orbit(Sphere(), np.array([1.0, 0, 0, 0]), np.pi)
    path = linearized_path(Sphere(), orb)
    assert np.allclose(path.matrices, rotation_matrix(4 * path.times), atol=1e-6)
    k = np.argmin(np.abs(path.times - np.pi / 4))
    assert path.times[k] == pytest.approx(np.pi / 4)
    assert np.allclose(path.matrices[k], rotation_matrix(np.pi), atol=1e-6)


def test_linearized_path_ellipsoid_plane_orbit():
    E = Ellipsoid(1.0, 1.25)
    orb = find_periodic_orbit(E, np.array([1.0, 0, 0, 0]), np.pi)
    path = linearized_path(E, orb)
    angle = 2 * path.times * (1 / E.r1**2 + 1 / E.r2**2)
    assert np.allclose(path.matrices, rotation_matrix(angle), atol=1e-6)


def test_linearized_path_generic_symplectic(generic_path):
    assert np.max(np.abs(generic_path.det_corrections)) < 1e-6
    assert generic_path.max_det_error < 1e-12
    assert np.allclose(generic_path.matrices[0], np.eye(2), atol=1e-12)
    steps = np.linalg.norm(np.diff(generic_path.matrices, axis=0), ord=2, axis=(1, 2))
    assert np.max(steps) < 0.5


def test_reeb_jacobian_matches_fd(generic_surface):
    h = 1e-6
    for p in project_radial(generic_surface, sphere_lattice(8)):
        fd = np.column_stack([
            (reeb_field(generic_surface, p + h * e) - reeb_field(generic_surface, p - h * e)) / (2 * h)
            for e in np.eye(4)
        ])
        assert np.allclose(reeb_jacobian(generic_surface, p), fd, atol=1e-5)


def test_orbit_csv_round_trip(tmp_path, generic_orbit, generic_path):
    f = tmp_path / "orbit.csv"
    write_orbit_csv(f, generic_orbit, generic_path)
    t, pts, mats = read_orbit_csv(f)
    assert np.array_equal(t, generic_orbit.times)
    assert np.array_equal(pts, generic_orbit.points)
    assert np.array_equal(mats, generic_path.matrices)


def test_irrational_ellipsoid_orbit_not_closed():
    E = Ellipsoid(1.0, 1.2345678)
    with pytest.raises(NonConvergence):
        find_periodic_orbit(E, np.array([0.6, 0, 0.9, 0]), 3.0)
