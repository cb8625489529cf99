"""Rotation numbers and the Maslov index of paths in SL(2, R).

For a path ``c`` starting at the identity, every direction ``X`` has a
total rotation ``rot(c, X)`` and any two directions differ by less than
``pi``.  If all rotations lie strictly inside ``(2 p pi, 2 (p + 1) pi)`` the
index is ``2 p + 1``; otherwise some direction rotates by exactly
``2 p pi`` and the index is ``2 p``.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, optimize

from .dynamics import PeriodicOrbit, SL2Path, linearized_path
from .surface import StarShapedSurface, contact_frame, shape_operator

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
DEGENERACY_TOL = 1e-5


class MaslovError(ValueError):
    pass


def _directions(n):
    a = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(a), np.sin(a)])


def _rotations_once(mats, dirs):
    imgs = np.einsum("tij,kj->kti", mats, dirs)
    ang = np.arctan2(imgs[..., 1], imgs[..., 0])
    d = np.diff(ang, axis=1)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    if d.size and np.max(np.abs(d)) >= np.pi / 2:
        return None
    return np.sum(d, axis=1)


def rotations(path: SL2Path, dirs, max_refine: int = 3) -> np.ndarray:
    """Total rotation of ``Phi(t) X / |Phi(t) X|`` for each row ``X`` of ``dirs``.

    If some direction turns by ``pi / 2`` or more between samples the path
    is refined by log-linear interpolation (factor 4, at most ``max_refine``
    times) before giving up.
    """
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    for _ in range(max_refine + 1):
        vals = _rotations_once(path.matrices, dirs)
        if vals is not None:
            return vals
        path = resample(path, 4)
    raise MaslovError("path sampled too coarsely for rotation tracking")


def rotation(path: SL2Path, X) -> float:
    """Total rotation angle of one unit direction under the path."""
    return float(rotations(path, X)[0])


@dataclass(frozen=True)
class RotationReport:
    rot_min: float
    rot_max: float
    directions: np.ndarray
    values: np.ndarray

    @property
    def spread(self):
        return self.rot_max - self.rot_min


def rotation_report(path: SL2Path, n_dirs: int = 64, xtol: float = 1e-10) -> RotationReport:
    """Rotations over equispaced directions, with the extreme directions refined.

    The rotation is a smooth function of the direction angle, so the
    coarse minimizer and maximizer are polished by bounded scalar search.
    """
    ang = np.pi * np.arange(n_dirs) / n_dirs  # X and -X rotate alike
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    vals = rotations(path, dirs)
    h = np.pi / n_dirs
    extra_a, extra_v = [], []
    for sign, k in ((1.0, int(np.argmin(vals))), (-1.0, int(np.argmax(vals)))):
        res = optimize.minimize_scalar(
            lambda a: sign * rotations(path, [[np.cos(a), np.sin(a)]])[0],
            bounds=(ang[k] - h, ang[k] + h), method="bounded", options={"xatol": xtol})
        extra_a.append(res.x)
        extra_v.append(sign * res.fun)
    ang = np.concatenate([ang, extra_a])
    vals = np.concatenate([vals, extra_v])
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    return RotationReport(float(vals.min()), float(vals.max()), dirs, vals)


@dataclass(frozen=True)
class MaslovResult:
    index: int
    degenerate: bool
    rot_min: float
    rot_max: float
    witness: dict = field(default_factory=dict)
    method: str = "linearized"

    def to_json(self) -> str:
        return json.dumps(self.record(), sort_keys=True)

    def record(self) -> dict:
        return {
            "index": self.index,
            "degenerate": self.degenerate,
            "rot_min": self.rot_min,
            "rot_max": self.rot_max,
            "method": self.method,
        }


def maslov_index(path: SL2Path, n_dirs: int = 64, tol: float = DEGENERACY_TOL) -> MaslovResult:
    """Maslov index of a path in SL(2, R) from the rotation of directions.

    Raises
    ------
    MaslovError
        If the rotation spread is not below ``pi`` (broken input).
    """
    rep = rotation_report(path, n_dirs)
    if rep.spread >= np.pi + 1e-6:
        raise MaslovError(f"rotation spread {rep.spread:.6f} >= pi")
    two_pi = 2 * np.pi
    odd = 2 * int(np.floor(rep.rot_min / two_pi)) + 1
    for p in range(int(np.floor(rep.rot_min / two_pi)), int(np.ceil(rep.rot_max / two_pi)) + 1):
        target = p * two_pi
        dist = np.abs(rep.values - target)
        j = int(np.argmin(dist))
        crossing = rep.rot_min <= target <= rep.rot_max
        if crossing or dist[j] <= tol:
            witness = {"direction": rep.directions[j].tolist(), "rotation": float(rep.values[j])}
            if not crossing:
                witness["candidates"] = [2 * p, odd]
            return MaslovResult(2 * p, True, rep.rot_min, rep.rot_max, witness)
    return MaslovResult(odd, False, rep.rot_min, rep.rot_max,
                        {"interval": [two_pi * (odd - 1) / 2, two_pi * (odd + 1) / 2]})


# ---------------------------------------------------------------------------
# Path constructions


def exp_js_path(S, n_steps: int = 256) -> SL2Path:
    """The path ``t -> exp(t J S)`` on ``[0, 1]`` for symmetric ``S``, ``|S| < 2 pi``."""
    S = np.asarray(S, dtype=float)
    if S.shape != (2, 2) or not np.allclose(S, S.T, atol=1e-12):
        raise ValueError("S must be a symmetric 2x2 matrix")
    if np.linalg.norm(S, 2) >= 2 * np.pi:
        raise ValueError("operator norm of S must be below 2 pi")
    t = np.linspace(0.0, 1.0, n_steps + 1)
    JS = J2 @ S
    return SL2Path(t, np.array([linalg.expm(s * JS) for s in t]))


def rotation_matrix(a):
    a = np.asarray(a, dtype=float)
    c, s = np.cos(a), np.sin(a)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def loop_shift(path: SL2Path, k: int, samples_per_turn: int = 64) -> SL2Path:
    """Prepend ``k`` full counterclockwise turns of ``U(1)`` to the path."""
    if k == 0:
        return path
    n = samples_per_turn * abs(k)
    s = np.linspace(0.0, 1.0, n + 1)
    loop = rotation_matrix(2 * np.pi * k * s)
    times = np.concatenate([s, 1.0 + path.times[1:] - path.times[0]])
    return SL2Path(times, np.concatenate([loop, path.matrices[1:]]))


def inverse_path(path: SL2Path) -> SL2Path:
    """Pointwise inverse ``t -> c(t)^{-1}``."""
    return SL2Path(path.times.copy(), np.linalg.inv(path.matrices))


def _log_sl2(m):
    """Principal logarithm of matrices in SL(2, R) near the identity (batched)."""
    m = m / np.sqrt(np.linalg.det(m))[:, None, None]
    half = 0.5 * (m[:, 0, 0] + m[:, 1, 1])
    if np.any(half <= -1 + 1e-12):
        raise MaslovError("matrix has no real logarithm near the identity")
    ell = np.where(half < 1, np.arccos(np.clip(half, -1, 1)), np.arccosh(np.maximum(half, 1)))
    den = np.where(half < 1, np.sin(ell), np.sinh(ell))
    fac = np.where(ell > 1e-8, ell / np.where(den == 0, 1, den), 1.0)
    return fac[:, None, None] * (m - half[:, None, None] * np.eye(2))


def _exp_traceless(x):
    """``expm`` of traceless 2x2 matrices (batched), via ``X^2 = -det(X) I``."""
    d = np.linalg.det(x)
    w = np.sqrt(np.abs(d))
    c = np.where(d > 0, np.cos(w), np.cosh(w))
    s = np.where(w > 1e-12, np.where(d > 0, np.sin(w), np.sinh(w)) / np.where(w > 0, w, 1), 1.0)
    return c[:, None, None] * np.eye(2) + s[:, None, None] * x


def resample(path: SL2Path, factor: int) -> SL2Path:
    """Refine by inserting log-linear interpolants ``c_i expm(s log(c_i^-1 c_{i+1}))``."""
    a, b = path.matrices[:-1], path.matrices[1:]
    L = _log_sl2(np.linalg.solve(a, b))
    s = np.arange(1, factor + 1) / factor
    steps = _exp_traceless((s[None, :, None, None] * L[:, None]).reshape(-1, 2, 2)).reshape(len(a), factor, 2, 2)
    mats = np.concatenate([path.matrices[:1], np.einsum("nij,nkjl->nkil", a, steps).reshape(-1, 2, 2)])
    dt = np.diff(path.times)
    times = np.concatenate([path.times[:1], (path.times[:-1, None] + s[None, :] * dt[:, None]).ravel()])
    return SL2Path(times, mats)


# ---------------------------------------------------------------------------
# Curvature-integral oracle


@dataclass(frozen=True)
class CurvatureRotation:
    value: float
    richardson_delta: float
    integrand: np.ndarray


def rotation_via_curvature(surface: StarShapedSurface, orbit: PeriodicOrbit, path: SL2Path = None) -> CurvatureRotation:
    """Rotation of the frame vector ``M`` computed as a curvature integral.

    Integrates ``|gamma'| (Pi(JN, JN) + Pi(Mt, Mt))`` along the orbit, where
    ``Mt`` is the unit vector of ``L`` obtained by projecting the transported
    ``pi M`` back to ``L``.  Composite Simpson on the uniform orbit samples,
    checked against Simpson on every other sample.
    """
    if path is None:
        path = linearized_path(surface, orbit)
    pts = path.points if path.points is not None else orbit.points
    A, _ = shape_operator(surface, pts)  # frame (JN, M, JM)
    c = path.matrices[:, :, 0]
    c = c / np.linalg.norm(c, axis=1)[:, None]
    pi_jn = A[:, 0, 0]
    pi_mt = np.einsum("ti,tij,tj->t", c, A[:, 1:, 1:], c)
    phi = np.array([contact_frame(surface, p).phi for p in pts])
    f = phi * (pi_jn + pi_mt)
    n = len(f) - 1
    if n % 4:
        raise ValueError("sample count must be a multiple of 4")
    h = (path.times[-1] - path.times[0]) / n
    fine = integrate.simpson(f, dx=h)
    coarse = integrate.simpson(f[::2], dx=2 * h)
    delta = abs(fine - coarse)
    if delta > 1e-4:
        raise MaslovError(f"curvature quadrature unresolved (Richardson delta {delta:.2e})")
    return CurvatureRotation(float(fine), float(delta), f)


def orbit_maslov(surface, orbit, n_dirs=64, tol=DEGENERACY_TOL):
    """Maslov index of a periodic orbit and its linearized path."""
    path = linearized_path(surface, orbit)
    return maslov_index(path, n_dirs, tol), path


# ---------------------------------------------------------------------------
# Axiom checks


def random_symmetric(rng, bound: float = 2 * np.pi, margin: float = 0.1):
    """Random symmetric 2x2 matrix with operator norm in ``(0, bound - margin)``
    and eigenvalues at least ``margin`` away from zero."""
    while True:
        a = rng.uniform(-1, 1, size=(2, 2))
        S = a + a.T
        ev = np.linalg.eigvalsh(S)
        S *= rng.uniform(0.1, bound - margin) / np.max(np.abs(ev))
        if np.min(np.abs(np.linalg.eigvalsh(S))) > margin:
            return S


def random_path(rng, n_segments: int = 3, n_steps: int = 256, bound: float = np.pi) -> SL2Path:
    """Concatenation of ``exp(s J S_k)`` segments with random symmetric ``S_k``.

    ``bound`` caps each segment's norm so the product stays well conditioned
    enough for rotation tracking at ``n_steps`` samples per segment.
    """
    mats = [np.eye(2)]
    for _ in range(n_segments):
        JS = J2 @ random_symmetric(rng, bound)
        base = mats[-1]
        for s in np.arange(1, n_steps + 1) / n_steps:
            mats.append(linalg.expm(s * JS) @ base)
    return SL2Path(np.linspace(0.0, float(n_segments), len(mats)), np.array(mats))


@dataclass(frozen=True)
class AxiomReport:
    loop_shift: bool
    inverse: bool
    signature: bool
    spread: bool
    upper_bound: bool
    max_spread: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.loop_shift and self.inverse and self.signature and self.spread and self.upper_bound

    def record(self):
        return {"loop_shift": self.loop_shift, "inverse": self.inverse, "signature": self.signature,
                "spread": self.spread, "upper_bound": self.upper_bound, "max_spread": self.max_spread,
                "pass": self.passed, **self.details}


def axiom_suite(seed: int = 0, n_inverse: int = 20, n_signature: int = 50, shifts=range(-2, 3),
                n_dirs: int = 64) -> AxiomReport:
    """Check loop shift, inverse, signature normalization and the rotation bounds.

    Every computed path also feeds the spread (``rot_max - rot_min < pi``)
    and upper bound (``rot < (mu + 1) pi`` in every direction) checks.
    """
    rng = np.random.default_rng(seed)
    spreads, upper_ok = [], True

    def index(path):
        nonlocal upper_ok
        res = maslov_index(path, n_dirs)
        spreads.append(res.rot_max - res.rot_min)
        upper_ok &= bool(res.rot_max < (res.index + 1) * np.pi)
        return res.index

    base = random_path(rng)
    mu0 = index(base)
    shift_fail = [k for k in shifts if index(loop_shift(base, k)) - mu0 != 2 * k]

    inverse_fail = 0
    for _ in range(n_inverse):
        path = random_path(rng)
        if index(inverse_path(path)) != -index(path):
            inverse_fail += 1

    signature_fail = 0
    for _ in range(n_signature):
        S = random_symmetric(rng)
        sig = int(np.sum(np.sign(np.linalg.eigvalsh(S))))
        if 2 * index(exp_js_path(S)) != sig:
            signature_fail += 1

    max_spread = float(max(spreads))
    return AxiomReport(
        not shift_fail, inverse_fail == 0, signature_fail == 0, max_spread < np.pi, upper_ok, max_spread,
        {"shift_failures": shift_fail, "inverse_failures": inverse_fail,
         "signature_failures": signature_fail, "paths_checked": len(spreads)},
    )
