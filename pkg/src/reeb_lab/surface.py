"""Star-shaped hypersurfaces ``F = 1`` in R^4 and their pointwise geometry.

The shape operator is computed from the Hessian of ``F`` (not by
differencing normals).  Reeb field, contact plane and the global symplectic
frame of the contact plane all derive from the unit normal ``N``:

* Reeb field ``X = phi J N`` with ``phi = 2 / <p, N>``;
* ``M = mhat(N)`` and ``J M`` span the complex tangent line ``L``;
* the contact plane ``xi`` is spanned by the lifts of ``M`` and ``J M``
  along ``J N``, i.e. the inverse of orthogonal projection ``xi -> L``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .core4 import J4, dot, j_mul, lambda0, mhat, omega0, sphere_lattice


class SurfaceError(ValueError):
    pass


class StarShapedSurface:
    """Level set ``F = 1`` of a smooth function, star-shaped about 0.

    Subclasses provide vectorized ``F``, ``grad`` and ``hess``; all accept
    arrays of shape ``(..., 4)``.
    """

    kind = "generic-implicit"

    def F(self, p):
        raise NotImplementedError

    def grad(self, p):
        return fd_grad(self.F, p)

    def hess(self, p):
        return fd_hess(self.F, p)

    def describe(self) -> dict:
        return {"kind": self.kind}


def fd_grad(F, p, h=1e-5):
    p = np.asarray(p, dtype=float)
    g = np.empty(p.shape)
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        g[..., k] = (F(p + e) - F(p - e)) / (2 * h)
    return g


def fd_hess(F, p, h=1e-4):
    p = np.asarray(p, dtype=float)
    H = np.empty(p.shape + (4,))
    f0 = F(p)
    eye = np.eye(4) * h
    for i in range(4):
        H[..., i, i] = (F(p + eye[i]) - 2 * f0 + F(p - eye[i])) / h**2
        for j in range(i + 1, 4):
            v = (
                F(p + eye[i] + eye[j])
                - F(p + eye[i] - eye[j])
                - F(p - eye[i] + eye[j])
                + F(p - eye[i] - eye[j])
            ) / (4 * h**2)
            H[..., i, j] = v
            H[..., j, i] = v
    return H


class Ellipsoid(StarShapedSurface):
    """``|z1|^2 / r1^2 + |z2|^2 / r2^2 = 1``; ``Ellipsoid(1, 1)`` is S^3."""

    def __init__(self, r1: float = 1.0, r2: float = 1.0):
        if not (r1 > 0 and r2 > 0 and np.isfinite(r1) and np.isfinite(r2)):
            raise SurfaceError("ellipsoid radii must be positive")
        self.r1 = float(r1)
        self.r2 = float(r2)
        self._w = np.array([1 / r1**2, 1 / r1**2, 1 / r2**2, 1 / r2**2])

    @property
    def kind(self):
        return "round-sphere" if self.r1 == 1.0 and self.r2 == 1.0 else "ellipsoid"

    @property
    def frequencies(self):
        """Angular speeds ``2 / r_k^2`` of the Reeb flow in each factor."""
        return 2.0 / self.r1**2, 2.0 / self.r2**2

    def F(self, p):
        p = np.asarray(p, dtype=float)
        return np.sum(self._w * p * p, axis=-1)

    def grad(self, p):
        return 2.0 * self._w * np.asarray(p, dtype=float)

    def hess(self, p):
        p = np.asarray(p, dtype=float)
        return np.broadcast_to(np.diag(2.0 * self._w), p.shape[:-1] + (4, 4)).copy()

    def describe(self):
        if self.kind == "round-sphere":
            return {"kind": "sphere"}
        return {"kind": "ellipsoid", "r1": self.r1, "r2": self.r2}


def Sphere() -> Ellipsoid:
    return Ellipsoid(1.0, 1.0)


class PolynomialSurface(StarShapedSurface):
    """Level set of a polynomial of degree at most 4 in ``(x1, y1, x2, y2)``.

    ``terms`` maps exponent tuples ``(e1, e2, e3, e4)`` to coefficients.
    """

    kind = "implicit-polynomial"

    def __init__(self, terms: dict):
        clean = {}
        for exps, c in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != 4 or min(exps) < 0:
                raise SurfaceError(f"bad exponent tuple {exps}")
            if sum(exps) > 4:
                raise SurfaceError(f"term {exps} exceeds degree 4")
            if c != 0:
                clean[exps] = clean.get(exps, 0.0) + float(c)
        if not clean:
            raise SurfaceError("polynomial has no terms")
        self.terms = clean
        self._exps = np.array(list(clean.keys()), dtype=int)
        self._coef = np.array(list(clean.values()), dtype=float)

    @staticmethod
    def _powers(p, exps):
        # p^(e) for each term, shape (..., n_terms), negative exponents -> 0
        out = np.ones(p.shape[:-1] + (len(exps),))
        for k in range(4):
            e = exps[:, k]
            base = p[..., k][..., None]
            out = out * np.where(e >= 0, base ** np.maximum(e, 0), 0.0)
        return out

    def F(self, p):
        p = np.asarray(p, dtype=float)
        return self._powers(p, self._exps) @ self._coef

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        g = np.empty(p.shape)
        for k in range(4):
            e = self._exps.copy()
            e[:, k] -= 1
            g[..., k] = self._powers(p, e) @ (self._coef * self._exps[:, k])
        return g

    def hess(self, p):
        p = np.asarray(p, dtype=float)
        H = np.empty(p.shape + (4,))
        for i in range(4):
            for j in range(i, 4):
                e = self._exps.copy()
                c = self._coef * self._exps[:, i]
                e[:, i] -= 1
                c = c * e[:, j]
                e[:, j] -= 1
                v = self._powers(p, e) @ c
                H[..., i, j] = v
                H[..., j, i] = v
        return H

    def describe(self):
        return {
            "kind": "implicit-polynomial",
            "terms": {"".join(map(str, k)): v for k, v in sorted(self.terms.items())},
        }


def perturbed_ellipsoid(r1=1.0, r2=np.sqrt(2.0), extra: Optional[dict] = None) -> PolynomialSurface:
    """Ellipsoid polynomial plus additional terms (a generic test family)."""
    terms = {
        (2, 0, 0, 0): 1 / r1**2,
        (0, 2, 0, 0): 1 / r1**2,
        (0, 0, 2, 0): 1 / r2**2,
        (0, 0, 0, 2): 1 / r2**2,
    }
    for k, v in (extra or {}).items():
        terms[tuple(k)] = terms.get(tuple(k), 0.0) + v
    return PolynomialSurface(terms)


class ImplicitSurface(StarShapedSurface):
    """Wrap a user-supplied ``F`` (vectorized over the last axis).

    Missing derivatives fall back to central finite differences.
    """

    def __init__(self, F: Callable, grad: Optional[Callable] = None, hess: Optional[Callable] = None):
        self._F = F
        self._grad = grad
        self._hess = hess

    def F(self, p):
        return self._F(np.asarray(p, dtype=float))

    def grad(self, p):
        if self._grad is None:
            return fd_grad(self._F, p)
        return self._grad(np.asarray(p, dtype=float))

    def hess(self, p):
        if self._hess is None:
            return fd_hess(self._F, p)
        return self._hess(np.asarray(p, dtype=float))


# ---------------------------------------------------------------------------
# Pointwise structure


def project_radial(surface: StarShapedSurface, p, tol=1e-13, max_iter=100):
    """Scale ``p`` (or each row of a stack) onto ``F = 1`` along its ray."""
    p = np.asarray(p, dtype=float)
    if np.any(np.linalg.norm(p, axis=-1) == 0.0):
        raise SurfaceError("cannot project the origin")
    if isinstance(surface, Ellipsoid):
        return p / np.sqrt(surface.F(p))[..., None]
    t = np.ones(p.shape[:-1])
    for _ in range(max_iter):
        q = t[..., None] * p
        r = surface.F(q) - 1.0
        if np.all(np.abs(r) < tol):
            return q
        slope = dot(surface.grad(q), p)
        if np.any(slope <= 0):
            raise SurfaceError("surface is not star-shaped along this ray")
        step = r / slope
        # keep t positive; halve overly long steps
        t = np.where(step < t, t - step, 0.5 * t)
    raise SurfaceError("radial projection did not converge")


def _grad_checked(surface, p):
    g = surface.grad(p)
    gn = np.linalg.norm(g, axis=-1)
    if np.any(gn < 1e-12):
        raise SurfaceError("degenerate gradient")
    return g, gn


def normal(surface: StarShapedSurface, p):
    """Outer unit normal ``grad F / |grad F|``."""
    p = np.asarray(p, dtype=float)
    g, gn = _grad_checked(surface, p)
    n = g / gn[..., None]
    if np.any(dot(p, n) <= 0):
        raise SurfaceError("<p, N> <= 0: surface not star-shaped at p")
    return n


def tangent_frame(n):
    """Orthonormal frame ``(J N, M, J M)`` of the tangent space."""
    jn = j_mul(n)
    m = mhat(n)
    jm = j_mul(m)
    return np.stack([jn, m, jm], axis=-2)


def shape_operator(surface: StarShapedSurface, p):
    """Shape operator at ``p`` in the tangent frame ``(J N, M, J M)``.

    Returns ``(A, basis)`` where ``A`` is the symmetric 3x3 matrix
    ``<A e_i, e_j> = e_i^T Hess F e_j / |grad F|`` and ``basis`` holds the
    frame vectors as rows.
    """
    p = np.asarray(p, dtype=float)
    g, gn = _grad_checked(surface, p)
    n = g / gn[..., None]
    basis = tangent_frame(n)
    H = surface.hess(p)
    A = basis @ H @ np.swapaxes(basis, -1, -2) / gn[..., None, None]
    return 0.5 * (A + np.swapaxes(A, -1, -2)), basis


def second_fundamental_form(surface: StarShapedSurface, p, u, v):
    """``Pi(u, v) = <A u, v>`` for tangent vectors given in R^4."""
    A, basis = shape_operator(surface, p)
    cu = basis @ np.asarray(u, dtype=float)
    cv = basis @ np.asarray(v, dtype=float)
    return cu @ A @ cv


@dataclass(frozen=True)
class CurvatureData:
    a: float
    b: float
    c: float
    directions: np.ndarray
    margin: float


def principal_curvatures(surface: StarShapedSurface, p) -> CurvatureData:
    """Principal curvatures ``a >= b >= c`` with directions and ``b + c - a``."""
    A, basis = shape_operator(surface, np.asarray(p, dtype=float))
    w, vecs = np.linalg.eigh(A)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    dirs = (basis.T @ vecs[:, order]).T
    return CurvatureData(float(w[0]), float(w[1]), float(w[2]), dirs, float(w[1] + w[2] - w[0]))


def pinching_margins(surface: StarShapedSurface, pts) -> np.ndarray:
    """Vectorized ``b + c - a`` over a stack of surface points."""
    A, _ = shape_operator(surface, pts)
    w = np.linalg.eigvalsh(A)
    return w[..., 0] + w[..., 1] - w[..., 2]


@dataclass(frozen=True)
class PinchingReport:
    min_margin: float
    argmin: np.ndarray
    passed: bool
    n_samples: int
    lattice_min: float = field(default=np.nan)


def pinching_scan(surface: StarShapedSurface, n_samples: int = 4096, polish: int = 4) -> PinchingReport:
    """Minimum pinching margin over a lattice sample of the surface.

    The lattice minimum is polished by local minimization started from the
    ``polish`` best lattice points, so minima attained on thin sets (for
    example a single Reeb circle) are located to high accuracy.
    """
    if n_samples < 10:
        raise ValueError("n_samples must be at least 10")
    pts = project_radial(surface, sphere_lattice(n_samples))
    margins = pinching_margins(surface, pts)
    order = np.argsort(margins, kind="stable")
    best_val = float(margins[order[0]])
    best_pt = pts[order[0]]
    lattice_min = best_val

    def objective(u):
        nu = np.linalg.norm(u)
        if nu < 1e-6:
            return 1e6
        return float(pinching_margins(surface, project_radial(surface, u / nu)))

    for idx in order[:polish]:
        u0 = pts[idx] / np.linalg.norm(pts[idx])
        res = optimize.minimize(
            objective, u0, method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000},
        )
        if res.fun < best_val:
            best_val = float(res.fun)
            best_pt = project_radial(surface, res.x / np.linalg.norm(res.x))
    return PinchingReport(best_val, best_pt, best_val >= -1e-9, n_samples, lattice_min)


def reeb_field(surface: StarShapedSurface, p):
    """Reeb vector field ``X = phi J N = 2 J grad F / <p, grad F>``."""
    p = np.asarray(p, dtype=float)
    g = surface.grad(p)
    s = dot(p, g)
    if np.any(s <= 0):
        raise SurfaceError("<p, N> <= 0: surface not star-shaped at p")
    return 2.0 * j_mul(g) / s[..., None]


def reeb_jacobian(surface: StarShapedSurface, p):
    """Ambient Jacobian ``dX`` of the extension ``X = 2 J grad F / <p, grad F>``."""
    p = np.asarray(p, dtype=float)
    g = surface.grad(p)
    H = surface.hess(p)
    s = dot(p, g)
    ds = g + np.einsum("...ij,...j->...i", H, p)
    Jg = j_mul(g)
    return (2.0 / s)[..., None, None] * (J4 @ H) - (2.0 / s**2)[..., None, None] * (
        Jg[..., :, None] * ds[..., None, :]
    )


def contact_lambda(p, v):
    """The contact form ``lambda = lambda0 | T Sigma``."""
    return lambda0(p, v)


@dataclass(frozen=True)
class ContactFrame:
    point: np.ndarray
    normal: np.ndarray
    m: np.ndarray
    jm: np.ndarray
    xi_basis: np.ndarray  # rows: pi(M), pi(JM)
    phi: float

    @property
    def reeb(self):
        return self.phi * j_mul(self.normal)


def contact_frame(surface: StarShapedSurface, p) -> ContactFrame:
    """Normal, complex tangent frame and the symplectic frame of ``xi``."""
    p = np.asarray(p, dtype=float)
    n = normal(surface, p)
    m = mhat(n)
    jm = j_mul(m)
    jn = j_mul(n)
    jp = j_mul(p)
    pn = float(dot(p, n))
    # lift along ker(P) = span(JN) into ker(lambda); <Jp, JN> = <p, N>
    xi_m = m - (dot(jp, m) / pn) * jn
    xi_jm = jm - (dot(jp, jm) / pn) * jn
    assert abs(omega0(xi_m, xi_jm) - 1.0) < 1e-9
    return ContactFrame(p, n, m, jm, np.stack([xi_m, xi_jm]), 2.0 / pn)


def trivialize(frame: ContactFrame, v, tol=1e-8):
    """Coordinates of ``v in xi_p`` in the frame ``(pi M, pi J M)``.

    Because ``pi`` inverts orthogonal projection onto ``L = span(M, JM)``,
    the coordinates are simply ``(<v, M>, <v, JM>)``.
    """
    v = np.asarray(v, dtype=float)
    scale = max(1.0, float(np.max(np.linalg.norm(v, axis=-1))))
    if np.any(np.abs(contact_lambda(frame.point, v)) > tol * scale) or np.any(
        np.abs(dot(v, frame.normal)) > tol * scale
    ):
        raise SurfaceError("vector is not in the contact plane")
    return np.stack([dot(v, frame.m), dot(v, frame.jm)], axis=-1)


def project_to_xi(frame: ContactFrame, v):
    """Remove the normal component, then the Reeb component along ``X``."""
    v = np.asarray(v, dtype=float)
    v = v - dot(v, frame.normal)[..., None] * frame.normal
    return v - contact_lambda(frame.point, v)[..., None] * frame.reeb
