import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reeb_lab.core4 import (
    inverse_stereographic,
    j_mul,
    lambda0,
    mhat,
    omega0,
    orientation_det,
    sphere_lattice,
    stereographic,
)

vec = arrays(np.float64, 4, elements=st.floats(-10, 10, allow_nan=False))


def unit(v):
    return v / np.linalg.norm(v)


def test_j_mul_basis():
    assert np.allclose(j_mul(np.array([1.0, 0, 0, 0])), [0, 1, 0, 0])
    assert np.allclose(j_mul(np.array([0, 1.0, 0, 0])), [-1, 0, 0, 0])


def test_mhat_basis():
    assert np.allclose(mhat(np.array([1.0, 0, 0, 0])), [0, 0, 1, 0])


@given(vec)
def test_complex_structures(v):
    assert np.allclose(j_mul(j_mul(v)), -v, atol=1e-12)
    assert np.allclose(mhat(mhat(v)), -v, atol=1e-12)
    assert np.allclose(j_mul(mhat(v)), -mhat(j_mul(v)), atol=1e-12)
    assert abs(np.dot(mhat(v), v)) < 1e-9
    assert abs(np.dot(mhat(v), j_mul(v))) < 1e-9


@given(vec, vec)
def test_omega0_forms(u, v):
    assert omega0(u, v) == pytest.approx(np.dot(j_mul(u), v), abs=1e-10)
    assert abs(omega0(u, u)) < 1e-10
    assert omega0(u, j_mul(u)) == pytest.approx(np.dot(u, u), rel=1e-12, abs=1e-10)


def test_omega0_and_lambda0_values():
    e1, e2 = np.eye(4)[0], np.eye(4)[1]
    assert omega0(e1, e2) == pytest.approx(1.0)
    assert lambda0(e1, e2) == pytest.approx(0.5)


@given(vec)
def test_lambda0_kills_radial(p):
    assert abs(lambda0(p, p)) < 1e-9


def test_lambda0_exterior_derivative(rng):
    # d(lambda0)(u, v) = u.lambda(v) - v.lambda(u) by central differences
    h = 1e-4
    for _ in range(10):
        p, u, v = rng.normal(size=(3, 4))
        du = (lambda0(p + h * u, v) - lambda0(p - h * u, v)) / (2 * h)
        dv = (lambda0(p + h * v, u) - lambda0(p - h * v, u)) / (2 * h)
        assert du - dv == pytest.approx(omega0(u, v), abs=1e-6)


def test_orientation_det_standard_basis():
    assert orientation_det(*np.eye(4)) == pytest.approx(1.0)
    assert orientation_det(*np.eye(4)[[1, 0, 2, 3]]) == pytest.approx(-1.0)


def test_stereographic_antipode_and_round_trip(rng):
    pole = unit(rng.normal(size=4))
    assert np.allclose(stereographic(-pole, pole), 0, atol=1e-12)
    pts = rng.normal(size=(50, 4))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    assert np.allclose(inverse_stereographic(stereographic(pts, pole), pole), pts, atol=1e-12)


def test_stereographic_distance_monotone(rng):
    # points on a great circle through -pole, increasing spherical distance from -pole
    pole = np.array([0.0, 0, 0, 1])
    w = np.array([1.0, 0, 0, 0])
    angles = np.linspace(0, 2.5, 40)
    pts = -np.cos(angles)[:, None] * pole + np.sin(angles)[:, None] * w
    img = stereographic(pts, pole)
    dist = np.linalg.norm(img - img[0], axis=1)
    assert np.all(np.diff(dist) > 0)


def test_stereographic_errors():
    pole = np.array([0.0, 0, 0, 1])
    with pytest.raises(ValueError):
        stereographic(pole, pole)
    with pytest.raises(ValueError):
        stereographic(np.array([2.0, 0, 0, 0]), pole)


def test_sphere_lattice_unit_and_deterministic():
    a = sphere_lattice(500)
    assert a.shape == (500, 4)
    assert np.allclose(np.linalg.norm(a, axis=1), 1.0)
    assert np.array_equal(a, sphere_lattice(500))
    # roughly uniform: mean close to zero
    assert np.linalg.norm(a.mean(axis=0)) < 0.05
