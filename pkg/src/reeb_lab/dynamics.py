"""Reeb flow, periodic orbits and the linearized flow on the contact plane."""

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .core4 import dot, from_complex, lambda0, to_complex
from .surface import (
    Ellipsoid,
    StarShapedSurface,
    contact_frame,
    project_radial,
    project_to_xi,
    reeb_field,
    reeb_jacobian,
    trivialize,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_STEP = 0.02


class NonConvergence(RuntimeError):
    """A numerical procedure failed to reach its tolerance."""


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def dopri54(
    rhs: Callable,
    y0,
    t_eval,
    rtol: float = DEFAULT_TOL,
    atol: float = DEFAULT_TOL,
    max_step: float = np.inf,
    project: Optional[Callable] = None,
    on_sample: Optional[Callable] = None,
):
    """Integrate ``y' = rhs(y)`` and return the states at ``t_eval``.

    ``t_eval`` must start at 0 and increase.  ``project`` is applied after
    every accepted step; ``on_sample(i, y)`` may replace the state at each
    output time (used to clean up variational vectors).
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval[0] != 0.0 or np.any(np.diff(t_eval) < 0):
        raise ValueError("t_eval must start at 0 and be nondecreasing")
    y = np.array(y0, dtype=float)
    out = np.empty((len(t_eval),) + y.shape)
    if on_sample is not None:
        y = on_sample(0, y)
    out[0] = y
    t = 0.0
    k1 = rhs(y)
    h = min(max_step, 0.01, t_eval[-1] if t_eval[-1] > 0 else 1.0)
    for i in range(1, len(t_eval)):
        target = t_eval[i]
        while t < target:
            if target - t <= h * (1 + 1e-12):
                h_try, last = target - t, True
            else:
                h_try, last = h, False
            ks = [k1]
            for s in range(1, 7):
                ys = y + h_try * sum(a * k for a, k in zip(_A[s], ks))
                ks.append(rhs(ys))
            y_new = y + h_try * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
            err = h_try * sum(e * k for e, k in zip(_E, ks))
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            en = float(np.sqrt(np.mean((err / scale) ** 2)))
            if en <= 1.0:
                t = target if last else t + h_try
                y = project(y_new) if project is not None else y_new
                k1 = rhs(y) if project is not None else ks[6]
                fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                if not last or fac < 1.0:
                    h = min(max_step, h_try * fac)
            else:
                h = h_try * max(0.1, 0.9 * en ** -0.2)
            if h < 1e-14:
                raise NonConvergence("step size underflow")
        if on_sample is not None:
            y = on_sample(i, y)
            k1 = rhs(y)
        out[i] = y
    return out


def flow(surface: StarShapedSurface, p0, t: float, tol: float = DEFAULT_TOL):
    """Reeb flow ``Psi_t(p0)``; negative ``t`` flows backwards."""
    p0 = np.asarray(p0, dtype=float)
    if t == 0:
        return p0.copy()
    sign = 1.0 if t > 0 else -1.0

    def rhs(y):
        return sign * reeb_field(surface, y)

    y = dopri54(rhs, p0, [0.0, abs(t)], rtol=tol, atol=tol,
                project=lambda y: project_radial(surface, y))[-1]
    if abs(surface.F(y) - 1.0) > 1e-10:
        raise NonConvergence("flow left the surface")
    return y


def sample_count(period: float, max_step: float = DEFAULT_MAX_STEP, minimum: int = 128) -> int:
    """Number of uniform sample intervals; a multiple of 4 (for Simpson + Richardson)."""
    n = max(minimum, int(np.ceil(period / max_step)))
    return int(4 * np.ceil(n / 4))


def flow_samples(surface, p0, times, tol=DEFAULT_TOL, max_step=DEFAULT_MAX_STEP):
    return dopri54(lambda y: reeb_field(surface, y), np.asarray(p0, dtype=float), times,
                   rtol=tol, atol=tol, max_step=max_step,
                   project=lambda y: project_radial(surface, y))


# ---------------------------------------------------------------------------
# Periodic orbits


@dataclass(frozen=True)
class PeriodicOrbit:
    surface: StarShapedSurface
    p0: np.ndarray
    period: float
    times: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    closure_residual: float
    method: str = "shooting"

    def to_csv(self, path, path_matrices=None):
        write_orbit_csv(path, self, path_matrices)


def write_orbit_csv(path, orbit: PeriodicOrbit, sl2=None):
    header = ["t", "x1", "y1", "x2", "y2"]
    if sl2 is not None:
        header += ["phi11", "phi12", "phi21", "phi22"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, (t, p) in enumerate(zip(orbit.times, orbit.points)):
            row = [repr(float(t))] + [repr(float(x)) for x in p]
            if sl2 is not None:
                row += [repr(float(x)) for x in sl2.matrices[i].ravel()]
            w.writerow(row)


def read_orbit_csv(path):
    """Return ``(t, points, matrices or None)`` from an orbit dump."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    mats = data[:, 5:9].reshape(-1, 2, 2) if len(header) >= 9 else None
    return data[:, 0], data[:, 1:5], mats


def ellipsoid_period(surface: Ellipsoid, p0, max_den: int = 64) -> float:
    """Closed-form period of the (linear) Reeb flow on an ellipsoid."""
    z1, z2 = to_complex(p0)
    w1, w2 = surface.frequencies
    if abs(z2) < 1e-12:
        return 2 * np.pi / w1
    if abs(z1) < 1e-12:
        return 2 * np.pi / w2
    frac = Fraction(w1 / w2).limit_denominator(max_den)
    if abs(float(frac) - w1 / w2) > 1e-12:
        raise NonConvergence("orbit through p0 is not closed (irrational frequency ratio)")
    return 2 * np.pi * frac.numerator / w1


def ellipsoid_flow(surface: Ellipsoid, p0, t):
    """``z_k(t) = exp(2 i t / r_k^2) z_k(0)``, vectorized over ``t``."""
    z1, z2 = to_complex(p0)
    w1, w2 = surface.frequencies
    t = np.asarray(t, dtype=float)
    return from_complex(np.exp(1j * w1 * t) * z1, np.exp(1j * w2 * t) * z2)


def _section_point(surface, p0, basis, normal0, a, b):
    """Point of ``Sigma`` on the hyperplane through ``p0`` (normal ``X(p0)``)."""
    q = p0 + a * basis[0] + b * basis[1]
    c = 0.0
    for _ in range(50):
        x = q + c * normal0
        r = surface.F(x) - 1.0
        if abs(r) < 1e-14:
            return x
        c -= r / dot(surface.grad(x), normal0)
    if abs(surface.F(q + c * normal0) - 1.0) > 1e-12:
        raise NonConvergence("section point projection failed")
    return q + c * normal0


def find_periodic_orbit(
    surface: StarShapedSurface,
    p0,
    period_guess: float,
    tol: float = 1e-11,
    max_newton: int = 50,
    closed_form: bool = True,
    max_step: float = DEFAULT_MAX_STEP,
) -> PeriodicOrbit:
    """Locate a closed Reeb orbit near ``p0`` with period near ``period_guess``.

    Ellipsoids are handled in closed form (unless ``closed_form=False``).
    Otherwise a Gauss-Newton shooting iteration runs on the section
    ``Sigma ∩ {<p - p0, X(p0)> = 0}``, parametrized by the complex tangent
    frame ``(M, JM)`` at ``p0`` which is orthogonal to ``X(p0)``.
    """
    if not period_guess > 0:
        raise ValueError("period guess must be positive")
    p0 = project_radial(surface, np.asarray(p0, dtype=float))
    if closed_form and isinstance(surface, Ellipsoid):
        T = ellipsoid_period(surface, p0)
        times = np.linspace(0.0, T, sample_count(T, max_step) + 1)
        pts = ellipsoid_flow(surface, p0, times)
        return PeriodicOrbit(surface, p0, T, times, pts, reeb_field(surface, pts),
                             float(np.linalg.norm(pts[-1] - p0)), "closed-form")

    frame = contact_frame(surface, p0)
    basis = np.stack([frame.m, frame.jm])
    n0 = frame.normal
    x = np.array([0.0, 0.0, float(period_guess)])

    def residual(x):
        p = _section_point(surface, p0, basis, n0, x[0], x[1])
        return flow(surface, p, x[2], tol) - p

    r = residual(x)
    h = 1e-6
    for _ in range(max_newton):
        if np.linalg.norm(r) < 1e-10:
            break
        jac = np.empty((4, 3))
        for k in range(3):
            dx = np.zeros(3)
            dx[k] = h
            jac[:, k] = (residual(x + dx) - residual(x - dx)) / (2 * h)
        step = np.linalg.lstsq(jac, -r, rcond=1e-10)[0]
        # damp until the residual decreases
        lam = 1.0
        while lam > 1e-4:
            x_new = x + lam * step
            if x_new[2] > 0:
                r_new = residual(x_new)
                if np.linalg.norm(r_new) < np.linalg.norm(r):
                    break
            lam *= 0.5
        else:
            raise NonConvergence("shooting line search failed")
        x, r = x_new, r_new
    else:
        if np.linalg.norm(r) >= 1e-8:
            raise NonConvergence("shooting did not converge in %d Newton steps" % max_newton)

    p_star = _section_point(surface, p0, basis, n0, x[0], x[1])
    T = float(x[2])
    times = np.linspace(0.0, T, sample_count(T, max_step) + 1)
    pts = flow_samples(surface, p_star, times, tol=tol, max_step=max_step)
    resid = float(np.linalg.norm(pts[-1] - p_star))
    if resid >= 1e-8:
        raise NonConvergence(f"closure residual {resid:.2e} too large")
    return PeriodicOrbit(surface, p_star, T, times, pts, reeb_field(surface, pts), resid, "shooting")


@dataclass(frozen=True)
class ActionReport:
    period: float
    integral: float

    @property
    def mismatch(self):
        return abs(self.period - self.integral)


def action(orbit: PeriodicOrbit) -> ActionReport:
    """Action ``∫ lambda`` of the orbit, together with its period.

    In Reeb parametrization ``lambda(gamma') = 1`` so the two agree.
    """
    integrand = lambda0(orbit.points, orbit.velocities)
    val = float(integrate.simpson(integrand, x=orbit.times))
    rep = ActionReport(orbit.period, val)
    if rep.mismatch > 1e-6:
        raise NonConvergence(f"action {val} disagrees with period {orbit.period}")
    return rep


# ---------------------------------------------------------------------------
# Linearized flow


@dataclass(frozen=True)
class SL2Path:
    times: np.ndarray
    matrices: np.ndarray  # (n, 2, 2)
    det_corrections: np.ndarray = field(default_factory=lambda: np.zeros(0))
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.matrices.shape != (len(self.times), 2, 2):
            raise ValueError("matrices must have shape (len(times), 2, 2)")

    @property
    def max_det_error(self):
        return float(np.max(np.abs(np.linalg.det(self.matrices) - 1.0)))


def linearized_path(surface: StarShapedSurface, orbit: PeriodicOrbit, tol: float = DEFAULT_TOL) -> SL2Path:
    """Linearized Reeb flow on ``xi`` along the orbit, in the frame ``T``.

    The ambient variational equation ``v' = dX v`` is integrated for the
    two frame vectors ``pi M, pi JM`` at the base point.  At every sample
    the vectors are projected back onto ``xi``, expressed in the frame and
    rescaled to determinant one; the pre-rescaling determinant error is
    recorded.
    """
    times = orbit.times
    corrections = np.zeros(len(times))
    mats = np.empty((len(times), 2, 2))
    points = np.empty((len(times), 4))

    def rhs(y):
        p = y[:4]
        dX = reeb_jacobian(surface, p)
        return np.concatenate([reeb_field(surface, p), dX @ y[4:8], dX @ y[8:12]])

    def project(y):
        y = y.copy()
        y[:4] = project_radial(surface, y[:4])
        return y

    def on_sample(i, y):
        fr = contact_frame(surface, y[:4])
        v = project_to_xi(fr, y[4:].reshape(2, 4))
        phi = trivialize(fr, v).T  # columns = images of the two basis vectors
        det = float(np.linalg.det(phi))
        corrections[i] = det - 1.0
        if abs(det - 1.0) > 1e-4:
            raise NonConvergence(f"determinant drift {det - 1.0:.2e} at t={times[i]:.4g}")
        s = 1.0 / np.sqrt(det)
        mats[i] = phi * s
        points[i] = y[:4]
        return np.concatenate([y[:4], (v * s).ravel()])

    fr0 = contact_frame(surface, orbit.p0)
    y0 = np.concatenate([orbit.p0, fr0.xi_basis.ravel()])
    max_step = float(np.min(np.diff(times))) if len(times) > 1 else np.inf
    dopri54(rhs, y0, times, rtol=tol, atol=tol, max_step=max_step, project=project, on_sample=on_sample)
    return SL2Path(times.copy(), mats, corrections, points)
