"""Disc fillings of transverse knots and their intersection theory.

A filling is a map of the closed unit disc into R^4 whose boundary circle
traces the knot.  The fillings built here are *chord fillings*: two arcs
``gamma_1, gamma_2: [0, pi] -> gamma`` from a point ``a`` to a point ``b``
(``gamma_2`` with the knot's orientation, ``gamma_1`` against it) and the
disc point ``(cos u, s sin u)`` goes to ``(1 - s)/2 gamma_1(u) + (1 + s)/2
gamma_2(u)``.  The boundary, traversed counterclockwise, is the knot.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .core4 import j_mul, omega0, orientation_det
from .knot import (
    TransverseKnot,
    check_transverse,
    find_filling_direction,
    self_linking,
)
from .surface import StarShapedSurface


class FillingError(ValueError):
    pass


class NonTransverseIntersection(FillingError):
    pass


# ---------------------------------------------------------------------------
# Disc container


class ImmersedDisc:
    """A map of the unit disc sampled on a polar grid.

    ``evaluator(x, y)`` returns ``(f, f_x, f_y)`` (arrays ``(..., 4)``) in
    Cartesian disc coordinates; grid samples and polar partials are derived
    from it.  The grid has radii ``i / n_r`` (``i = 1..n_r``) and angles
    ``2 pi (j + 1/2) / n_theta``.
    """

    def __init__(self, evaluator: Callable, n_r: int = 96, n_theta: int = 384, name: str = "disc", meta=None):
        if n_r < 2 or n_theta < 8:
            raise ValueError("grid too small")
        self.evaluator = evaluator
        self.n_r = int(n_r)
        self.n_theta = int(n_theta)
        self.name = name
        self.meta = dict(meta or {})
        self.r = np.arange(1, self.n_r + 1) / self.n_r
        self.theta = 2 * np.pi * (np.arange(self.n_theta) + 0.5) / self.n_theta
        R, TH = np.meshgrid(self.r, self.theta, indexing="ij")
        self.x = R * np.cos(TH)
        self.y = R * np.sin(TH)
        self.points, self.fx, self.fy = evaluator(self.x, self.y)
        c, s = np.cos(TH)[..., None], np.sin(TH)[..., None]
        self.fr = self.fx * c + self.fy * s
        self.ftheta = R[..., None] * (-self.fx * s + self.fy * c)

    def __call__(self, x, y):
        return self.evaluator(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def refined(self, factor: int = 2) -> "ImmersedDisc":
        return ImmersedDisc(self.evaluator, factor * self.n_r, factor * self.n_theta, self.name, self.meta)

    @property
    def boundary(self):
        return self.points[-1]

    def immersion_margin(self, collar: int = 0) -> float:
        """Smallest singular value of ``(f_x, f_y)`` over the grid (rows within ``collar`` of the rim skipped)."""
        rows = slice(0, self.n_r - collar) if collar else slice(None)
        m = np.stack([self.fx[rows], self.fy[rows]], axis=-1)
        return float(np.min(np.linalg.svd(m, compute_uv=False)[..., -1]))

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "theta", "x1", "y1", "x2", "y2"])
            for i in range(self.n_r):
                for j in range(self.n_theta):
                    w.writerow([repr(float(self.r[i])), repr(float(self.theta[j]))]
                               + [repr(float(v)) for v in self.points[i, j]])


# ---------------------------------------------------------------------------
# Chord fillings


def _arc_splines(knot: TransverseKnot, s1, s2, n_nodes: int):
    """Cubic splines of ``u -> gamma(s_i(u))`` on ``[0, pi]`` from node parameters."""
    u = np.linspace(0.0, np.pi, n_nodes)
    p1, _ = knot(np.mod(s1, 2 * np.pi))
    p2, _ = knot(np.mod(s2, 2 * np.pi))
    return CubicSpline(u, p1, axis=0), CubicSpline(u, p2, axis=0)


def chord_disc(g1: CubicSpline, g2: CubicSpline, n_r=96, n_theta=384, name="chord-filling", meta=None) -> ImmersedDisc:
    """Disc swept by the chords from ``g1(u)`` to ``g2(u)``, ``u in [0, pi]``."""
    d1, d2 = g1.derivative(), g2.derivative()

    def evaluator(x, y):
        # the chord map is singular at the split points x = +-1
        u = np.arccos(np.clip(x, -1.0 + 1e-12, 1.0 - 1e-12))
        su_safe = np.sin(u)
        sig = np.clip(y / su_safe, -1.0, 1.0)[..., None]
        a, b = g1(u), g2(u)
        da, db = d1(u), d2(u)
        m, d = 0.5 * (a + b), 0.5 * (b - a)
        dm, dd = 0.5 * (da + db), 0.5 * (db - da)
        f = m + sig * d
        ft = dm + sig * dd
        s3 = (su_safe**3)[..., None]
        fx = -ft / su_safe[..., None] + d * (y * np.cos(u))[..., None] / s3
        fy = d / su_safe[..., None]
        return f, fx, fy

    return ImmersedDisc(evaluator, n_r, n_theta, name, meta)


def _arclength_table(knot, s_start, s_end, n=8192):
    s = np.linspace(s_start, s_end, n + 1)
    _, der = knot(np.mod(s, 2 * np.pi))
    speed = np.linalg.norm(der, axis=-1)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(s))])
    return s, np.abs(cum)


def linear_filling(knot: TransverseKnot, a: float = 0.0, b: Optional[float] = None,
                   n_r: int = 96, n_theta: int = 384, n_nodes: int = 2049) -> ImmersedDisc:
    """Linear filling of a knot on the boundary of a convex body.

    ``a`` and ``b`` are knot parameters of the split points; by default ``b``
    is the point halfway around the knot in arc length from ``a``.  Both
    arcs are reparametrized proportionally to arc length on ``[0, pi]``.
    """
    s_fwd, L_fwd = _arclength_table(knot, a, a + 2 * np.pi)
    total = L_fwd[-1]
    if b is None:
        b = float(np.interp(0.5 * total, L_fwd, s_fwd))
    b = a + np.mod(b - a, 2 * np.pi)
    l2 = float(np.interp(b, s_fwd, L_fwd))
    l1 = total - l2
    if min(l1, l2) <= 0 or max(l1, l2) / min(l1, l2) > 20:
        raise FillingError("degenerate split: arcs too unequal")
    u = np.linspace(0.0, np.pi, n_nodes)
    # gamma_2 runs forward from a to b, gamma_1 backward from a to b
    s2 = np.interp(u / np.pi * l2, L_fwd, s_fwd)
    s1 = np.interp(total - u / np.pi * l1, L_fwd, s_fwd)
    s1[0], s2[0] = a, a
    s1[-1], s2[-1] = b, b
    s2, s1 = _polish_arclength(knot, a, s2, u / np.pi * l2), _polish_arclength(knot, a, s1, total - u / np.pi * l1)
    g1, g2 = _arc_splines(knot, s1, s2, n_nodes)
    return chord_disc(g1, g2, n_r, n_theta, "linear-filling", {"split": [float(a), float(b)]})


def _polish_arclength(knot, a, s, target, iters=3):
    """Newton-polish parameters so arc length from ``a`` hits ``target``."""
    s = s.copy()
    for _ in range(iters):
        # Gauss-Legendre arc length from a to s
        xg, wg = np.polynomial.legendre.leggauss(24)
        lengths = np.empty_like(s)
        for k0 in range(0, len(s), 512):
            sl = slice(k0, k0 + 512)
            ss = s[sl]
            # split each interval into 8 panels for accuracy
            panels = np.linspace(0.0, 1.0, 9)
            acc = np.zeros_like(ss)
            for p0, p1 in zip(panels[:-1], panels[1:]):
                nodes = a + (ss[:, None] - a) * (p0 + (p1 - p0) * (xg[None, :] + 1) / 2)
                _, der = knot(np.mod(nodes.ravel(), 2 * np.pi))
                sp = np.linalg.norm(der, axis=-1).reshape(nodes.shape)
                acc += (ss - a) * (p1 - p0) / 2 * (sp @ wg)
            lengths[sl] = np.abs(acc)
        _, der = knot(np.mod(s, 2 * np.pi))
        speed = np.linalg.norm(der, axis=-1)
        sign = np.sign(s - a + 1e-300)
        s = s - sign * (lengths - target) / speed
    return s


def _refine_extremum(knot, v, s0, kind):
    sgn = 1.0 if kind == "min" else -1.0
    h = 2 * np.pi / 512

    def height(s):
        p, _ = knot(np.array([s]))
        return sgn * float(p[0] @ v)

    res = optimize.minimize_scalar(height, bounds=(s0 - 2 * h, s0 + 2 * h), method="bounded",
                                   options={"xatol": 1e-13})
    return float(res.x)


def _invert_height(knot, v, lo, hi, targets, iters=80):
    """Bisection for ``<gamma(s), v> = target`` on a monotone stretch ``[lo, hi]``."""
    lo = np.full_like(targets, lo)
    hi = np.full_like(targets, hi)
    p_lo, _ = knot(np.mod(lo[:1], 2 * np.pi))
    increasing = True
    p_hi, _ = knot(np.mod(hi[:1], 2 * np.pi))
    increasing = float(p_hi[0] @ v) > float(p_lo[0] @ v)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pm, _ = knot(np.mod(mid, 2 * np.pi))
        above = (pm @ v > targets) == increasing
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return 0.5 * (lo + hi)


def embedded_filling(knot: TransverseKnot, v=None, n_r: int = 96, n_theta: int = 384,
                     n_nodes: int = 2049, n_dirs: int = 512) -> ImmersedDisc:
    """Chord filling whose chords are level sets of the height ``<., v>``.

    ``v`` must give a height with exactly one minimum ``a`` and one maximum
    ``b`` on the knot (see :func:`find_filling_direction`, used when ``v``
    is omitted).  Both arcs are parametrized so that heights agree at equal
    parameters, hence distinct chords lie in distinct level hyperplanes and
    the disc is embedded.
    """
    if v is None:
        fd = find_filling_direction(knot, n_dirs)
        if not fd.ok:
            raise FillingError(f"no two-critical-point height found (defect {fd.defect})")
        v = fd.v
    v = np.asarray(v, dtype=float)
    n_s = 4096
    t = 2 * np.pi * np.arange(n_s) / n_s
    pts, der = knot(t)
    h = pts @ v
    a = _refine_extremum(knot, v, t[int(np.argmin(h))], "min")
    b = _refine_extremum(knot, v, t[int(np.argmax(h))], "max")
    b_fwd = a + np.mod(b - a, 2 * np.pi)
    # monotonicity of the height on both arcs
    dh = der @ v
    s_rel = np.mod(t - a, 2 * np.pi)
    on2 = s_rel < (b_fwd - a)
    margin = 1e-3 * np.ptp(h) * 2 * np.pi / n_s
    interior = (np.minimum(np.abs(t - a), 2 * np.pi - np.abs(t - a)) > 4 * 2 * np.pi / n_s) & (
        np.minimum(np.abs(t - np.mod(b, 2 * np.pi)), 2 * np.pi - np.abs(t - np.mod(b, 2 * np.pi))) > 4 * 2 * np.pi / n_s)
    if np.any(interior & on2 & (dh < -margin)) or np.any(interior & ~on2 & (dh > margin)):
        raise FillingError("height is not monotone on an arc")
    pa, _ = knot(np.array([a]))
    pb, _ = knot(np.array([b]))
    hmin, hmax = float(pa[0] @ v), float(pb[0] @ v)
    u = np.linspace(0.0, np.pi, n_nodes)
    targets = hmin + (hmax - hmin) * 0.5 * (1 - np.cos(u))
    s2 = _invert_height(knot, v, a, b_fwd, targets)
    s1 = _invert_height(knot, v, a, b_fwd - 2 * np.pi, targets)
    s1[0] = s2[0] = a
    s1[-1] = s2[-1] = b_fwd
    g1, g2 = _arc_splines(knot, s1, s2, n_nodes)
    disc = chord_disc(g1, g2, n_r, n_theta, "embedded-filling", {"direction": v.tolist(), "split": [a, float(b_fwd)]})
    scan = injectivity_scan(disc)
    disc.meta["injectivity_min_distance"] = scan
    if scan <= 1e-5:
        raise FillingError("embedded filling failed the injectivity scan")
    return disc


def _param_threshold(disc):
    return 3.0 * max(1.0 / disc.n_r, 2 * np.pi / disc.n_theta)


def _edge_length(disc):
    er = np.linalg.norm(np.diff(disc.points, axis=0), axis=-1).max()
    et = np.linalg.norm(disc.points - np.roll(disc.points, 1, axis=1), axis=-1).max()
    return float(max(er, et))


def injectivity_scan(disc: ImmersedDisc) -> float:
    """Smallest R^4 distance between grid points that are not neighbours on the disc.

    Only pairs closer than one grid edge are examined; if there are none the
    edge length itself is returned as a lower bound.
    """
    pts = disc.points.reshape(-1, 4)
    xy = np.column_stack([disc.x.ravel(), disc.y.ravel()])
    edge = _edge_length(disc)
    pairs = cKDTree(pts).query_pairs(edge, output_type="ndarray")
    if len(pairs) == 0:
        return edge
    far = np.linalg.norm(xy[pairs[:, 0]] - xy[pairs[:, 1]], axis=1) > _param_threshold(disc)
    if not np.any(far):
        return edge
    p = pairs[far]
    return float(np.min(np.linalg.norm(pts[p[:, 0]] - pts[p[:, 1]], axis=1)))


def _distance_to_knot(knot, x, n=4096, newton=4):
    t, pts, _ = knot.sample(n)
    _, k = cKDTree(pts).query(x)
    s = t[k]
    for _ in range(newton):
        p, d = knot(s)
        s = s - np.sum((p - x) * d, axis=1) / np.sum(d * d, axis=1)
    p, _ = knot(s)
    return np.linalg.norm(p - x, axis=1)


@dataclass(frozen=True)
class DiscCheck:
    boundary_error: float
    immersion_margin: float
    max_interior_F: float
    ok: bool


def check_disc(disc: ImmersedDisc, knot: Optional[TransverseKnot] = None,
               surface: Optional[StarShapedSurface] = None, collar: int = 2) -> DiscCheck:
    """Boundary trace error, immersion margin and containment of a disc.

    The rim must lie on the knot within ``1e-8``, ``(f_x, f_y)`` must have
    smallest singular value above ``1e-6`` off a ``collar`` of rows at the
    rim, and interior rows off the collar must satisfy ``F < 1 - 1e-8``.
    """
    bnd = float(np.max(_distance_to_knot(knot, disc.boundary))) if knot is not None else 0.0
    imm = disc.immersion_margin(collar)
    if surface is None and knot is not None:
        surface = knot.surface
    fmax = float(np.max(surface.F(disc.points[: disc.n_r - collar]))) if surface is not None else -np.inf
    ok = bnd < 1e-8 and imm > 1e-6 and fmax < 1 - 1e-8
    return DiscCheck(bnd, imm, fmax, ok)


# ---------------------------------------------------------------------------
# Symplectic and complex points


def symplectic_check(disc: ImmersedDisc) -> float:
    """``min omega0(f_r, f_theta) / (|f_r| |f_theta|)`` over the grid."""
    num = omega0(disc.fr, disc.ftheta)
    den = np.linalg.norm(disc.fr, axis=-1) * np.linalg.norm(disc.ftheta, axis=-1)
    return float(np.min(num / den))


def complex_defect(fx, fy):
    """Distance of ``J f_x / |f_x|`` from the tangent plane, and the orientation sign.

    Returns ``(defect, beta)`` where ``f_y ~ alpha f_x + beta J f_x`` at a
    complex point; ``beta > 0`` means the plane is a complex line with its
    complex orientation (holomorphic), ``beta < 0`` anti-holomorphic.
    """
    q, _ = np.linalg.qr(np.stack([fx, fy], axis=-1))
    jx = j_mul(fx) / np.linalg.norm(fx, axis=-1)[..., None]
    coef = np.einsum("...ik,...i->...k", q, jx)
    resid = jx - np.einsum("...ik,...k->...i", q, coef)
    beta = np.sum(fy * j_mul(fx), axis=-1) / np.sum(fx * fx, axis=-1)
    return np.linalg.norm(resid, axis=-1), beta


@dataclass(frozen=True)
class ComplexPoint:
    xy: tuple
    point: tuple
    kind: str  # "holomorphic" | "anti-holomorphic"
    defect: float


@dataclass(frozen=True)
class ComplexPointReport:
    points: List[ComplexPoint]
    whole_disc: Optional[str] = None  # kind, when the disc is complex everywhere

    @property
    def anti_holomorphic(self):
        n = sum(1 for p in self.points if p.kind == "anti-holomorphic")
        return n if self.whole_disc != "anti-holomorphic" else max(n, 1)

    @property
    def holomorphic(self):
        return sum(1 for p in self.points if p.kind == "holomorphic")


def complex_points(disc: ImmersedDisc, tol: float = 1e-7, seed_threshold: float = 0.25) -> ComplexPointReport:
    """Locate and classify points where the tangent plane is a complex line."""
    d, beta = complex_defect(disc.fx, disc.fy)
    if np.max(d) < tol:
        kind = "holomorphic" if np.all(beta > 0) else "anti-holomorphic"
        return ComplexPointReport([], kind)
    # local minima of the defect on the grid (theta periodic)
    nb = [np.roll(d, 1, axis=1), np.roll(d, -1, axis=1)]
    up = np.vstack([d[:1] * np.inf, d[:-1]])
    down = np.vstack([d[1:], d[-1:] * np.inf])
    is_min = (d <= nb[0]) & (d <= nb[1]) & (d <= up) & (d <= down) & (d < seed_threshold)
    seeds = np.argwhere(is_min)

    def resid(z):
        _, fx, fy = disc(np.array([z[0]]), np.array([z[1]]))
        q, _ = np.linalg.qr(np.column_stack([fx[0], fy[0]]))
        jx = j_mul(fx[0]) / np.linalg.norm(fx[0])
        return jx - q @ (q.T @ jx)

    found = []
    for i, j in seeds:
        z0 = np.array([disc.x[i, j], disc.y[i, j]])
        sol = optimize.least_squares(resid, z0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        z = sol.x
        if np.hypot(*z) > 1.0:
            continue
        dz = float(np.linalg.norm(resid(z)))
        if dz > tol:
            continue
        if any(np.hypot(z[0] - c.xy[0], z[1] - c.xy[1]) < 1e-5 for c in found):
            continue
        f, fx, fy = disc(np.array([z[0]]), np.array([z[1]]))
        _, b = complex_defect(fx, fy)
        kind = "holomorphic" if b[0] > 0 else "anti-holomorphic"
        found.append(ComplexPoint((float(z[0]), float(z[1])), tuple(map(float, f[0])), kind, dz))
    return ComplexPointReport(found)


# ---------------------------------------------------------------------------
# Double points


@dataclass(frozen=True)
class IntersectionRecord:
    params_p: tuple
    params_q: tuple
    point: tuple
    sign: int
    residual: float
    det: float

    def record(self):
        return {"params_p": list(self.params_p), "params_q": list(self.params_q),
                "point": list(self.point), "sign": self.sign}


def intersections_json(records) -> str:
    return json.dumps([r.record() for r in records], sort_keys=True)


def _newton_pairs(disc, P, Q, iters=30):
    """Batched Newton for ``f(P) = f(Q)`` in the four disc coordinates."""
    P, Q = P.copy(), Q.copy()
    for _ in range(iters):
        fp, fxp, fyp = disc(P[:, 0], P[:, 1])
        fq, fxq, fyq = disc(Q[:, 0], Q[:, 1])
        r = fp - fq
        jac = np.stack([fxp, fyp, -fxq, -fyq], axis=-1)
        ok = np.abs(np.linalg.det(jac)) > 1e-300
        step = np.zeros((len(P), 4))
        step[ok] = np.linalg.solve(jac[ok], -r[ok][..., None])[..., 0]
        # keep steps bounded so iterates stay near the seed cells
        sn = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, 0.1 / np.maximum(sn, 1e-300))[:, None]
        P += step[:, :2]
        Q += step[:, 2:]
        if np.all(sn < 1e-14):
            break
    fp, *_ = disc(P[:, 0], P[:, 1])
    fq, *_ = disc(Q[:, 0], Q[:, 1])
    return P, Q, np.linalg.norm(fp - fq, axis=1)


def candidate_pairs(disc: ImmersedDisc):
    """Disc-point pairs that may straddle a double point.

    The broad phase runs on a square lattice of spacing ``h = 1 / n_r``
    inside the disc, which has uniform density (the polar grid crowds at
    the centre).  Each lattice point is matched against others within twice
    its longest incident lattice edge in R^4.  Pairs closer than ``3 h`` on
    the disc, or whose image distance is explained by the differential
    (``|f(p) - f(q)| >= sigma |p - q| / 2``), are dropped.
    """
    h = 1.0 / disc.n_r
    g = np.arange(-disc.n_r, disc.n_r + 1) * h
    X, Y = np.meshgrid(g, g, indexing="ij")
    inside = X**2 + Y**2 <= 1.0
    xy = np.column_stack([X[inside], Y[inside]])
    pts, *_ = disc(xy[:, 0], xy[:, 1])
    edge = np.zeros(len(xy))
    for dx, dy in ((h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)):
        nb = np.column_stack([xy[:, 0] + dx, xy[:, 1] + dy])
        nb /= np.maximum(1.0, np.hypot(nb[:, 0], nb[:, 1]))[:, None]
        q, *_ = disc(nb[:, 0], nb[:, 1])
        edge = np.maximum(edge, np.linalg.norm(q - pts, axis=1))
    tree = cKDTree(pts)
    balls = tree.query_ball_point(pts, 2.0 * edge)
    i = np.repeat(np.arange(len(pts)), [len(b) for b in balls])
    j = np.concatenate([np.asarray(b, dtype=np.intp) for b in balls])
    keep = i < j
    i, j = i[keep], j[keep]
    dxy = np.linalg.norm(xy[i] - xy[j], axis=1)
    d4 = np.linalg.norm(pts[i] - pts[j], axis=1)
    sigma = disc.immersion_margin(collar=2)
    keep = (dxy > 3 * h) & (d4 < 0.5 * sigma * dxy)
    return xy[i[keep]], xy[j[keep]]


def tangential_index(disc: ImmersedDisc, tol: float = 1e-6, merge: float = 1e-6):
    """Signed count of transverse double points of the disc.

    Candidate grid pairs (see :func:`candidate_pairs`) seed a Newton solve of
    ``f(p) = f(q)``; converged, distinct solutions are merged and signed by
    ``det[f_x(p), f_y(p), f_x(q), f_y(q)]``.

    Raises
    ------
    NonTransverseIntersection
        If a double point has normalized determinant below ``tol``.
    """
    P0, Q0 = candidate_pairs(disc)
    if len(P0) == 0:
        return 0, []
    thresh = 3.0 / disc.n_r
    P, Q, res = _newton_pairs(disc, P0, Q0)
    good = (
        (res < 1e-9)
        & (np.hypot(P[:, 0], P[:, 1]) < 1.0)
        & (np.hypot(Q[:, 0], Q[:, 1]) < 1.0)
        & (np.linalg.norm(P - Q, axis=1) > thresh)
    )
    records: List[IntersectionRecord] = []
    for p, q, r in zip(P[good], Q[good], res[good]):
        if (p[0], p[1]) > (q[0], q[1]):
            p, q = q, p
        if any(np.linalg.norm(np.array(rec.params_p) - p) < merge and np.linalg.norm(np.array(rec.params_q) - q) < merge
               for rec in records):
            continue
        fp, fxp, fyp = disc(np.array([p[0]]), np.array([p[1]]))
        _, fxq, fyq = disc(np.array([q[0]]), np.array([q[1]]))
        vecs = [fxp[0], fyp[0], fxq[0], fyq[0]]
        det = float(orientation_det(*vecs) / np.prod([np.linalg.norm(v) for v in vecs]))
        if abs(det) < tol:
            raise NonTransverseIntersection(
                f"non-transverse double point at {fp[0]}; perturb or refine the grid")
        records.append(IntersectionRecord((float(p[0]), float(p[1])), (float(q[0]), float(q[1])),
                                          tuple(map(float, fp[0])), 1 if det > 0 else -1, float(r), det))
    return int(sum(r.sign for r in records)), records


def _same_records(a, b, tol):
    if len(a) != len(b):
        return False
    key = lambda r: (r.params_p, r.params_q)
    for ra, rb in zip(sorted(a, key=key), sorted(b, key=key)):
        if ra.sign != rb.sign or np.linalg.norm(np.subtract(ra.point, rb.point)) > tol:
            return False
    return True


def stable_tangential_index(disc: ImmersedDisc, tol: float = 1e-6, max_doublings: int = 2):
    """Tangential index confirmed on the grid and on its 2x refinement.

    The grid is doubled (at most ``max_doublings`` extra times) until two
    successive grids give the same signed count and the same double points
    within ``1e-6``.  Returns ``(tan, records, disc_used)``.
    """
    tan, recs = tangential_index(disc, tol)
    for _ in range(max_doublings + 1):
        finer = disc.refined(2)
        tan2, recs2 = tangential_index(finer, tol)
        if tan2 == tan and _same_records(recs, recs2, 1e-6):
            return tan, recs, disc
        disc, tan, recs = finer, tan2, recs2
    raise FillingError("tangential index not stable under grid refinement")


# ---------------------------------------------------------------------------
# Verifiers


@dataclass(frozen=True)
class Theorem1Report:
    lk: int
    tan: int
    symplectic_min: float
    anti_holomorphic: int
    passed: bool
    intersections: list = field(default_factory=list)

    def record(self):
        return {"lk": self.lk, "tan": self.tan, "symplectic_min": self.symplectic_min,
                "anti_holomorphic": self.anti_holomorphic, "pass": self.passed}


def verify_theorem1(knot: TransverseKnot, disc: ImmersedDisc, eps: float = 1e-2, n_quad=None) -> Theorem1Report:
    """Check ``lk = 2 tan - 1`` for a transverse knot bounding a symplectic disc."""
    smin = symplectic_check(disc)
    if smin <= 0:
        raise FillingError("disc is not a symplectic immersion")
    if check_transverse(knot) <= 0:
        raise FillingError("knot is not positively transverse")
    lk = self_linking(knot, eps, n_quad).value
    tan, recs = tangential_index(disc)
    anti = complex_points(disc).anti_holomorphic
    return Theorem1Report(lk, tan, smin, anti, lk == 2 * tan - 1 and anti == 0, recs)


@dataclass(frozen=True)
class SelfIntersectionNumber:
    value: int
    lk: int
    tan: Optional[int] = None

    @property
    def consistent(self):
        return None if self.tan is None else self.value == 2 * self.tan


def self_intersection_number(knot: TransverseKnot, disc: Optional[ImmersedDisc] = None,
                             lk: Optional[int] = None) -> SelfIntersectionNumber:
    """``Int = lk + 1``; with a symplectic filling also compared with ``2 tan``."""
    if lk is None:
        lk = self_linking(knot).value
    tan = None
    if disc is not None:
        tan, _ = tangential_index(disc)
    return SelfIntersectionNumber(lk + 1, lk, tan)


# ---------------------------------------------------------------------------
# Synthetic fixtures


def flat_disc(n_r=96, n_theta=384, orientation: int = 1) -> ImmersedDisc:
    """The unit disc of the ``z1`` line (``orientation=-1`` reverses it)."""
    def ev(x, y):
        z = np.zeros(np.shape(x))
        f = np.stack([x, orientation * y, z, z], axis=-1)
        fx = np.stack([z + 1, z, z, z], axis=-1)
        fy = np.stack([z, z + orientation, z, z], axis=-1)
        return f, fx, fy
    return ImmersedDisc(ev, n_r, n_theta, "flat" if orientation > 0 else "flat-reversed")


def graph_disc(g, dg, conj_first: bool = False, n_r=96, n_theta=384, scale=0.5, name="graph") -> ImmersedDisc:
    """``z -> (z, g(z))`` (or ``(conj z, g(z))``) on the disc of radius ``scale``.

    ``dg(z)`` returns ``(dg/dx, dg/dy)`` as complex numbers.
    """
    def ev(x, y):
        z = scale * (x + 1j * y)
        w = g(z)
        gx, gy = dg(z)
        zz = np.conj(z) if conj_first else z
        sgn = -1.0 if conj_first else 1.0
        f = np.stack([zz.real, zz.imag, w.real, w.imag], axis=-1)
        one = np.ones(np.shape(x))
        zero = np.zeros(np.shape(x))
        fx = scale * np.stack([one, zero, gx.real, gx.imag], axis=-1)
        fy = scale * np.stack([zero, sgn * one, gy.real, gy.imag], axis=-1)
        return f, fx, fy
    return ImmersedDisc(ev, n_r, n_theta, name)


def whitney_disc(n_r=96, n_theta=384, k_sign: float = 1.0) -> ImmersedDisc:
    """Immersed disc with exactly one transverse double point.

    ``f(x, y) = (c1(x), c2(x), y, k_sign * x * y)`` where ``c`` is the nodal
    cubic ``(x^2, x^3 - x/4)``; the sheets through ``x = -1/2`` and
    ``x = 1/2`` meet only at ``y = 0``, in the point ``(1/4, 0, 0, 0)``.
    """
    def ev(x, y):
        one = np.ones(np.shape(x))
        zero = np.zeros(np.shape(x))
        f = np.stack([x**2, x**3 - x / 4, y, k_sign * x * y], axis=-1)
        fx = np.stack([2 * x, 3 * x**2 - 0.25, zero, k_sign * y], axis=-1)
        fy = np.stack([zero, zero, one, k_sign * x], axis=-1)
        return f, fx, fy
    return ImmersedDisc(ev, n_r, n_theta, "whitney")
