import json

import numpy as np
import pytest

from reeb_lab.filling import (
    FillingError,
    NonTransverseIntersection,
    check_disc,
    complex_points,
    embedded_filling,
    flat_disc,
    graph_disc,
    injectivity_scan,
    intersections_json,
    linear_filling,
    self_intersection_number,
    stable_tangential_index,
    symplectic_check,
    tangential_index,
    verify_theorem1,
    whitney_disc,
)
from reeb_lab.knot import plane_circle
from reeb_lab.surface import Ellipsoid


@pytest.fixture(scope="module")
def torus_filling(torus_knot):
    return linear_filling(torus_knot)


def test_linear_filling_planar_circle_is_flat():
    k = plane_circle(Ellipsoid(1, np.sqrt(2)))
    d = linear_filling(k)
    assert np.allclose(d.points[..., 2:], 0.0)
    assert np.allclose(np.linalg.norm(d.boundary, axis=-1), 1.0)
    assert np.max(np.linalg.norm(d.points, axis=-1)) <= 1 + 1e-12


def test_linear_filling_hopf_is_flat_disc(hopf):
    d = linear_filling(hopf)
    assert np.allclose(d.points[..., 2:], 0.0)
    assert check_disc(d, hopf).ok


def test_linear_filling_torus_contract(torus_knot, torus_filling):
    chk = check_disc(torus_filling, torus_knot)
    assert chk.ok, chk
    assert chk.boundary_error < 1e-8
    assert np.max(torus_knot.surface.F(torus_filling.points)) <= 1 + 1e-9
    assert symplectic_check(torus_filling) > 0


def test_linear_filling_degenerate_split(torus_knot):
    with pytest.raises(FillingError):
        linear_filling(torus_knot, a=0.0, b=0.01)


def test_symplectic_check_flat():
    assert symplectic_check(flat_disc()) == pytest.approx(1.0)
    assert symplectic_check(flat_disc(orientation=-1)) == pytest.approx(-1.0)


def test_complex_points_flat_whole_disc():
    rep = complex_points(flat_disc())
    assert rep.whole_disc == "holomorphic"
    assert rep.anti_holomorphic == 0


def test_complex_points_anti_holomorphic_fixture():
    # z -> (conj z, z^2): tangent plane at 0 is C x {0} with the reversed orientation
    d = graph_disc(lambda z: z**2, lambda z: (2 * z, 2j * z), conj_first=True)
    rep = complex_points(d)
    assert rep.anti_holomorphic >= 1
    assert np.allclose(rep.points[0].xy, 0.0, atol=1e-8)


def test_complex_points_holomorphic_fixture():
    # z -> (z, conj z^2) has a complex point at 0, holomorphic orientation
    d = graph_disc(lambda z: np.conj(z) ** 2, lambda z: (2 * np.conj(z), -2j * np.conj(z)))
    rep = complex_points(d)
    assert rep.holomorphic == 1 and rep.anti_holomorphic == 0


def test_symplectic_filling_has_no_anti_holomorphic_points(torus_filling):
    assert complex_points(torus_filling).anti_holomorphic == 0


def test_tangential_index_flat_empty():
    assert tangential_index(flat_disc()) == (0, [])


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_tangential_index_whitney(sign):
    tan, recs = tangential_index(whitney_disc(k_sign=sign))
    assert tan == int(sign) and len(recs) == 1
    r = recs[0]
    assert r.point == pytest.approx((0.25, 0, 0, 0), abs=1e-12)
    assert sorted([r.params_p[0], r.params_q[0]]) == pytest.approx([-0.5, 0.5])
    assert r.residual < 1e-9


def test_tangential_index_non_transverse():
    with pytest.raises(NonTransverseIntersection):
        tangential_index(whitney_disc(k_sign=0.0))


def test_tangential_index_refinement_invariant(torus_filling):
    tan, recs = tangential_index(torus_filling)
    tan2, recs2 = tangential_index(torus_filling.refined(2))
    assert tan == tan2 == 1
    assert np.allclose(recs[0].point, recs2[0].point, atol=1e-6)
    assert stable_tangential_index(whitney_disc())[0] == 1


def test_embedded_filling_great_circle(hopf):
    d = embedded_filling(hopf)
    assert injectivity_scan(d) > 1e-5
    assert tangential_index(d)[0] == 0
    assert symplectic_check(d) > 0


def test_embedded_filling_plane_orbit(pinched_circle):
    d = embedded_filling(pinched_circle)
    assert d.meta["injectivity_min_distance"] > 1e-5
    assert tangential_index(d)[0] == 0
    assert check_disc(d, pinched_circle).ok


def test_embedded_filling_needs_two_critical_points(torus_knot):
    with pytest.warns(UserWarning):
        with pytest.raises(FillingError):
            embedded_filling(torus_knot)


def test_theorem1_hopf(hopf):
    rep = verify_theorem1(hopf, flat_disc())
    assert (rep.lk, rep.tan, rep.passed) == (-1, 0, True)


def test_theorem1_torus(torus_knot, torus_filling):
    rep = verify_theorem1(torus_knot, torus_filling)
    assert rep.passed and rep.lk == 1 and rep.tan == 1 and rep.anti_holomorphic == 0


def test_theorem1_requires_symplectic(hopf):
    with pytest.raises(FillingError):
        verify_theorem1(hopf, flat_disc(orientation=-1))


def test_self_intersection_number(hopf, torus_knot, torus_filling):
    assert self_intersection_number(hopf).value == 0
    s = self_intersection_number(torus_knot, torus_filling)
    assert s.value == 2 and s.consistent
    assert s.value - s.lk == 1


def test_dumps(tmp_path):
    d = whitney_disc(n_r=8, n_theta=16)
    d.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "r,theta,x1,y1,x2,y2" and len(lines) == 1 + 8 * 16
    _, recs = tangential_index(whitney_disc())
    rec = json.loads(intersections_json(recs))
    assert set(rec[0]) == {"params_p", "params_q", "point", "sign"} and rec[0]["sign"] == 1
