"""Transverse knots on star-shaped hypersurfaces.

Self-linking is evaluated without a Seifert surface: the contact plane has
the global section ``pi M``, so the self-linking number is the linking
number of the knot with its pushoff along that section.  Both curves are
moved to the round S^3 by radial projection and to R^3 by stereographic
projection, where the Gauss double integral is evaluated.
"""

import csv
import os
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numba
import numpy as np
from scipy.spatial import cKDTree

from .core4 import dot, from_complex, j_mul, lambda0, mhat, sphere_lattice, stereographic
from .dynamics import PeriodicOrbit
from .surface import Ellipsoid, Sphere, StarShapedSurface, normal, project_radial


if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "workqueue"


class KnotError(ValueError):
    pass


def _fourier_eval(samples, t):
    """Trigonometric interpolant of uniform periodic samples and its derivative."""
    n = len(samples)
    c = np.fft.fft(samples, axis=0) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        # split the Nyquist mode symmetrically so the interpolant is real
        c = c.copy()
        c[n // 2] *= 0.5
        c = np.concatenate([c, c[n // 2: n // 2 + 1]])
        k = np.concatenate([k, [n // 2]])
        k[n // 2] = -n // 2
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e = np.exp(1j * np.outer(t, k))
    val = (e @ c).real
    der = (e @ (1j * k[:, None] * c)).real
    return val, der


def spectral_derivative(samples):
    """Derivative of uniformly sampled periodic data on ``[0, 2 pi)``."""
    n = len(samples)
    k = np.fft.fftfreq(n, d=1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = (n,) + (1,) * (np.ndim(samples) - 1)
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(samples, axis=0), axis=0).real


class TransverseKnot:
    """Closed curve ``gamma: [0, 2 pi) -> Sigma``.

    ``func(t)`` returns ``(points, derivatives)`` for an array of
    parameters.  Knots built from samples use their trigonometric
    interpolant.
    """

    def __init__(self, surface: StarShapedSurface, func: Callable, name: str = "knot"):
        self.surface = surface
        self.func = func
        self.name = name

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def sample(self, n: int):
        t = 2 * np.pi * np.arange(n) / n
        pts, der = self.func(t)
        return t, pts, der

    @classmethod
    def from_samples(cls, surface, points, name="sampled"):
        pts = np.asarray(points, dtype=float)
        if np.linalg.norm(pts[0] - pts[-1]) < 1e-12:
            pts = pts[:-1]
        return cls(surface, lambda t: _fourier_eval(pts, t), name)

    @classmethod
    def from_orbit(cls, orbit: PeriodicOrbit, name="orbit"):
        """Reparametrize a periodic orbit linearly onto ``[0, 2 pi)``."""
        knot = cls.from_samples(orbit.surface, orbit.points[:-1], name)
        knot.period = orbit.period
        return knot

    def reparametrized(self, s: Callable, ds: Callable):
        """Knot ``t -> gamma(s(t))`` for an orientation-preserving diffeomorphism ``s``."""
        def func(t):
            p, d = self.func(s(t))
            return p, d * ds(t)[:, None]
        return TransverseKnot(self.surface, func, self.name + "-reparam")

    def reversed(self):
        def func(t):
            p, d = self.func(2 * np.pi - t)
            return p, -d
        return TransverseKnot(self.surface, func, self.name + "-reversed")

    def to_csv(self, path, n=512):
        t, pts, _ = self.sample(n)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x1", "y1", "x2", "y2"])
            for ti, p in zip(t, pts):
                w.writerow([repr(float(ti))] + [repr(float(x)) for x in p])

    @classmethod
    def from_csv(cls, surface, path):
        """Read a closed curve sampled at uniform ``t`` (columns t, x1, y1, x2, y2)."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if rows[0][:5] != ["t", "x1", "y1", "x2", "y2"]:
            raise KnotError("knot CSV needs columns t, x1, y1, x2, y2")
        data = np.array(rows[1:], dtype=float)
        dt = np.diff(data[:, 0])
        if np.ptp(dt) > 1e-9 * max(1.0, abs(dt.mean())):
            raise KnotError("knot CSV must use a uniform parameter")
        return cls.from_samples(surface, data[:, 1:5], os.path.basename(str(path)))


def hopf_fiber() -> TransverseKnot:
    """The Hopf fiber ``t -> (e^{it}, 0)`` on the unit sphere."""
    def func(t):
        z = np.exp(1j * t)
        return from_complex(z, 0 * z), from_complex(1j * z, 0 * z)
    return TransverseKnot(Sphere(), func, "hopf")


def torus_ellipsoid(p: int, q: int) -> Ellipsoid:
    """Ellipsoid whose Reeb frequencies are in ratio ``p : q`` (``r1 = 1``)."""
    return Ellipsoid(1.0, np.sqrt(p / q))


def torus_orbit(surface: Ellipsoid, p: int, q: int, share: float = 0.5) -> TransverseKnot:
    """Reeb orbit ``(a e^{i p t}, b e^{i q t})`` of an ellipsoid with ratio ``p : q``.

    ``share`` is the fraction ``a^2 / r1^2`` of the defining function carried
    by the first factor.
    """
    w1, w2 = surface.frequencies
    if abs(w1 / w2 - p / q) > 1e-12:
        raise KnotError(f"ellipsoid frequencies are not in ratio {p}:{q}")
    if np.gcd(p, q) != 1:
        raise KnotError("p and q must be coprime")
    a = np.sqrt(share) * surface.r1
    b = np.sqrt(1 - share) * surface.r2

    def func(t):
        z1 = a * np.exp(1j * p * t)
        z2 = b * np.exp(1j * q * t)
        return from_complex(z1, z2), from_complex(1j * p * z1, 1j * q * z2)

    knot = TransverseKnot(surface, func, f"torus-{p}-{q}")
    knot.period = 2 * np.pi * p / w1
    return knot


def plane_circle(surface: Ellipsoid) -> TransverseKnot:
    """The Reeb circle in the ``z1`` coordinate plane of an ellipsoid."""
    r = surface.r1

    def func(t):
        z = r * np.exp(1j * t)
        return from_complex(z, 0 * z), from_complex(1j * z, 0 * z)

    knot = TransverseKnot(surface, func, "z1-circle")
    knot.period = np.pi * r**2
    return knot


# ---------------------------------------------------------------------------
# Invariants


def check_transverse(knot: TransverseKnot, n: int = 1024) -> float:
    """``min lambda(gamma') / |gamma'|``; positive iff canonically oriented transverse."""
    _, pts, der = knot.sample(n)
    return float(np.min(lambda0(pts, der) / np.linalg.norm(der, axis=-1)))


def check_embedded(knot: TransverseKnot, n: int = 512, sep: float = 0.1) -> float:
    """Minimum distance between samples whose parameters differ by more than ``sep``."""
    t, pts, _ = knot.sample(n)
    dt = np.abs(t[:, None] - t[None, :])
    dt = np.minimum(dt, 2 * np.pi - dt)
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    return float(np.min(dist[dt > sep]))


def xi_section(surface: StarShapedSurface, pts):
    """Global section ``pi M`` of the contact plane, vectorized."""
    n = normal(surface, pts)
    m = mhat(n)
    jn = j_mul(n)
    return m - (dot(j_mul(pts), m) / dot(pts, n))[..., None] * jn


@numba.njit(parallel=True, cache=True)
def _gauss_sum(x1, d1, x2, d2):
    n1, n2 = x1.shape[0], x2.shape[0]
    acc = np.zeros(n1)
    for i in numba.prange(n1):
        s = 0.0
        for j in range(n2):
            rx = x1[i, 0] - x2[j, 0]
            ry = x1[i, 1] - x2[j, 1]
            rz = x1[i, 2] - x2[j, 2]
            cx = d1[i, 1] * d2[j, 2] - d1[i, 2] * d2[j, 1]
            cy = d1[i, 2] * d2[j, 0] - d1[i, 0] * d2[j, 2]
            cz = d1[i, 0] * d2[j, 1] - d1[i, 1] * d2[j, 0]
            r2 = rx * rx + ry * ry + rz * rz
            s += (rx * cx + ry * cy + rz * cz) / (r2 * np.sqrt(r2))
        acc[i] = s
    return acc.sum()


def _set_threads(workers):
    if workers is None:
        workers = int(os.environ.get("REEB_LAB_THREADS", "0") or 0)
    if workers > 0:
        numba.set_num_threads(max(1, min(workers, numba.config.NUMBA_NUM_THREADS)))


def gauss_linking(x1, d1, x2, d2, workers: Optional[int] = None) -> float:
    """Trapezoid Gauss linking integral of two closed curves in R^3.

    ``x*`` are samples at uniform parameters on ``[0, 2 pi)`` and ``d*`` the
    parameter derivatives there.  The outer sum runs in parallel, capped by
    ``workers`` or the ``REEB_LAB_THREADS`` environment variable.
    """
    _set_threads(workers)
    h1 = 2 * np.pi / len(x1)
    h2 = 2 * np.pi / len(x2)
    arrs = [np.ascontiguousarray(a, dtype=np.float64) for a in (x1, d1, x2, d2)]
    return float(_gauss_sum(*arrs)) * h1 * h2 / (4 * np.pi)


def polygon_linking(x1, x2) -> float:
    """Exact linking number of two closed polygons via signed solid angles.

    Independent of :func:`gauss_linking`; used as a cross-check.
    """
    a0 = x1
    a1 = np.roll(x1, -1, axis=0)
    b0 = x2
    b1 = np.roll(x2, -1, axis=0)
    total = 0.0
    for i in range(len(x1)):
        a = b0 - a0[i]
        b = b0 - a1[i]
        c = b1 - a1[i]
        d = b1 - a0[i]
        p = np.sum(a * np.cross(b, c), axis=-1)
        an, bn, cn, dn = (np.linalg.norm(v, axis=-1) for v in (a, b, c, d))
        d1 = an * bn * cn + np.sum(a * b, -1) * cn + np.sum(b * c, -1) * an + np.sum(c * a, -1) * bn
        d2 = an * dn * cn + np.sum(a * d, -1) * cn + np.sum(d * c, -1) * an + np.sum(c * a, -1) * dn
        total += np.sum(np.arctan2(p, d1) + np.arctan2(p, d2))
    return total / (2 * np.pi)


@dataclass(frozen=True)
class LinkingComputation:
    eps: float
    pole: np.ndarray
    raw: float
    value: int
    residual: float
    n_quad: int

    def __int__(self):
        return self.value


def choose_pole(curves, n_candidates: int = 32, min_dist: float = 0.3):
    """Candidate pole on S^3 farthest from all sample points of ``curves``."""
    cands = sphere_lattice(n_candidates)
    pts = np.concatenate(curves)
    dists = np.min(np.linalg.norm(cands[:, None, :] - pts[None, :, :], axis=-1), axis=1)
    k = int(np.argmax(dists))
    if dists[k] <= min_dist:
        raise KnotError("no admissible stereographic pole")
    return cands[k]


def pushoff(knot: TransverseKnot, eps: float, n: int):
    """Knot samples and their pushoff along ``pi M``, both radially on ``Sigma``."""
    t, pts, _ = knot.sample(n)
    sec = xi_section(knot.surface, pts)
    sec = sec / np.linalg.norm(sec, axis=-1)[:, None]
    return pts, project_radial(knot.surface, pts + eps * sec)


def _linking_once(knot, eps, n_quad, pole=None, workers=None):
    pts, push = pushoff(knot, eps, n_quad)
    gap = float(cKDTree(pts).query(push)[0].min())
    if gap < eps / 10:
        raise KnotError("pushoff collides with the knot")
    u1 = pts / np.linalg.norm(pts, axis=-1)[:, None]
    u2 = push / np.linalg.norm(push, axis=-1)[:, None]
    if pole is None:
        pole = choose_pole([u1, u2])
    x1 = stereographic(u1, pole)
    x2 = stereographic(u2, pole)
    raw = gauss_linking(x1, spectral_derivative(x1), x2, spectral_derivative(x2), workers)
    val = int(np.rint(raw))
    return LinkingComputation(eps, pole, raw, val, abs(raw - val), n_quad)


def quadrature_size(knot: TransverseKnot, eps: float, nodes_per_eps: float = 16.0) -> int:
    """Power of two keeping the node spacing well below the pushoff distance."""
    _, _, der = knot.sample(256)
    speed = float(np.max(np.linalg.norm(der, axis=-1)))
    need = nodes_per_eps * speed / eps
    return int(2 ** max(9, int(np.ceil(np.log2(need)))))


def self_linking(knot: TransverseKnot, eps: float = 1e-2, n_quad: Optional[int] = None,
                 check: bool = True, pole=None, workers=None) -> LinkingComputation:
    """Self-linking number of a canonically oriented transverse knot.

    ``n_quad`` defaults to :func:`quadrature_size`; the stability check at
    ``eps / 2`` doubles the node count so the ratio of spacing to pushoff
    distance is unchanged.

    Raises
    ------
    KnotError
        If the integral is not within 0.1 of an integer, the integer changes
        when ``eps`` is halved, or no admissible pole exists.
    """
    if check_transverse(knot) <= 0:
        raise KnotError("knot is not positively transverse to the contact structure")
    if n_quad is None:
        n_quad = quadrature_size(knot, eps)
    res = _linking_once(knot, eps, n_quad, pole, workers)
    if res.residual >= 0.1:
        raise KnotError(f"Gauss integral {res.raw:.4f} is not near an integer")
    if check:
        half = _linking_once(knot, eps / 2, 2 * n_quad, pole, workers)
        if half.value != res.value or half.residual >= 0.1:
            raise KnotError("self-linking unstable under halving the pushoff size")
    return res


def total_curvature(knot: TransverseKnot, n: int = 2048) -> float:
    """``∫ |T'(t)| dt`` with ``T = gamma' / |gamma'|``; parametrization invariant."""
    def at(m):
        _, _, der = knot.sample(m)
        tang = der / np.linalg.norm(der, axis=-1)[:, None]
        return float(np.sum(np.linalg.norm(spectral_derivative(tang), axis=-1)) * 2 * np.pi / m)

    fine, coarse = at(n), at(n // 2)
    if abs(fine - coarse) > 1e-6 * max(1.0, fine):
        raise KnotError("total curvature quadrature not converged")
    return fine


# ---------------------------------------------------------------------------
# Height functions


@dataclass(frozen=True)
class Crookedness:
    minima: int
    degenerate: bool

    def __int__(self):
        return self.minima


def _collapse_runs(h, tol):
    """Cyclic runs of (numerically) equal values: returns run values and widths."""
    n = len(h)
    same = np.abs(h - np.roll(h, -1)) <= tol  # same[i]: h[i] ~ h[i+1]
    if np.all(same):
        return np.array([h[0]]), np.array([n])
    start = int(np.argmin(same)) + 1  # first index after a break
    vals, widths = [], []
    i = 0
    while i < n:
        j = i
        while j < n - 1 and same[(start + j) % n]:
            j += 1
        vals.append(h[(start + i) % n])
        widths.append(j - i + 1)
        i = j + 1
    return np.array(vals), np.array(widths)


def crookedness(knot: TransverseKnot, v, n: int = 4096, max_plateau: int = 5) -> Crookedness:
    """Number of strict local minima of ``t -> <gamma(t), v>``.

    Runs of equal samples are merged into a single critical value; a run
    wider than ``max_plateau`` samples makes the count unreliable and sets
    the degenerate flag.
    """
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    _, pts, _ = knot.sample(n)
    h = pts @ v
    tol = 1e-13 * (1.0 + np.max(np.abs(pts)))
    vals, widths = _collapse_runs(h, tol)
    if len(vals) == 1:
        return Crookedness(0, True)
    is_min = (vals < np.roll(vals, 1)) & (vals < np.roll(vals, -1))
    is_max = (vals > np.roll(vals, 1)) & (vals > np.roll(vals, -1))
    wide = np.any(widths[is_min | is_max] > max_plateau) or np.any(widths > max_plateau)
    return Crookedness(int(np.sum(is_min)), bool(wide))


@dataclass(frozen=True)
class FillingDirection:
    v: np.ndarray
    ok: bool
    minima: int
    maxima: int
    defect: int
    sharpness: float
    total_curvature: float


def find_filling_direction(knot: TransverseKnot, n_dirs: int = 512, n: int = 1024) -> FillingDirection:
    """Search a lattice of directions for a height with one min and one max.

    Among valid directions the one whose extrema have the largest second
    differences is returned.  If none is valid, the candidate with the
    fewest surplus critical points is returned with ``ok = False``.
    """
    kappa = total_curvature(knot)
    if kappa >= 4 * np.pi:
        warnings.warn(f"total curvature {kappa:.4f} >= 4 pi; a two-critical-point height may not exist")
    dirs = sphere_lattice(n_dirs)
    _, pts, _ = knot.sample(n)
    H = pts @ dirs.T
    prev, nxt = np.roll(H, 1, axis=0), np.roll(H, -1, axis=0)
    is_min = (H < prev) & (H < nxt)
    is_max = (H > prev) & (H > nxt)
    n_min, n_max = is_min.sum(axis=0), is_max.sum(axis=0)
    second = np.abs(prev + nxt - 2 * H)
    sharp = np.where(is_min | is_max, second, np.inf).min(axis=0)
    valid = (n_min == 1) & (n_max == 1) & (sharp > 1e-6)
    defect = (n_min - 1) + (n_max - 1)
    if np.any(valid):
        k = int(np.argmax(np.where(valid, sharp, -1.0)))
    else:
        k = int(np.lexsort((-np.where(np.isfinite(sharp), sharp, 0), defect))[0])
    return FillingDirection(dirs[k], bool(valid[k]), int(n_min[k]), int(n_max[k]),
                            int(defect[k]), float(sharp[k]), kappa)
