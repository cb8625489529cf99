"""Linear algebra of R^4 = C^2.

Points and tangent vectors are plain float arrays whose last axis has
length 4, ordered ``(x1, y1, x2, y2)`` so that ``z1 = x1 + i y1`` and
``z2 = x2 + i y2``.  Every function broadcasts over leading axes.
"""

import numpy as np

ATOL = 1e-12

# J as a real 4x4 matrix: (x1, y1, x2, y2) -> (-y1, x1, -y2, x2)
J4 = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
)


def vec4(x1, y1, x2, y2) -> np.ndarray:
    return np.array([x1, y1, x2, y2], dtype=float)


def to_complex(v):
    """Return ``(z1, z2)`` for a real 4-vector (or stack of them)."""
    v = np.asarray(v, dtype=float)
    return v[..., 0] + 1j * v[..., 1], v[..., 2] + 1j * v[..., 3]


def from_complex(z1, z2) -> np.ndarray:
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def j_mul(v):
    """Complex structure: multiply both coordinates by ``i``."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    out[..., 2] = -v[..., 3]
    out[..., 3] = v[..., 2]
    return out


def mhat(v):
    """Conjugate-linear map ``(z1, z2) -> (-conj(z2), conj(z1))``.

    ``mhat`` squares to ``-Id``, is an isometry and anticommutes with
    :func:`j_mul`; ``mhat(v)`` is orthogonal to both ``v`` and ``J v``.
    """
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 2]
    out[..., 1] = v[..., 3]
    out[..., 2] = v[..., 0]
    out[..., 3] = -v[..., 1]
    return out


def dot(u, v):
    return np.sum(np.asarray(u, dtype=float) * np.asarray(v, dtype=float), axis=-1)


def omega0(u, v):
    """Standard symplectic form ``dx1^dy1 + dx2^dy2``; equals ``<Ju, v>``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return (
        u[..., 0] * v[..., 1]
        - u[..., 1] * v[..., 0]
        + u[..., 2] * v[..., 3]
        - u[..., 3] * v[..., 2]
    )


def lambda0(p, v):
    """Radial Liouville form ``(lambda0)_p(v) = <Jp, v> / 2``."""
    return 0.5 * dot(j_mul(p), v)


def orientation_det(a, b, c, d):
    """Determinant of the 4x4 matrix with columns ``a, b, c, d``.

    Positive means ``(a, b, c, d)`` is positively oriented with respect to
    the ordered basis ``(x1, y1, x2, y2)``, i.e. the orientation of
    ``omega0 ^ omega0``.
    """
    m = np.stack([np.asarray(a), np.asarray(b), np.asarray(c), np.asarray(d)], axis=-1)
    return np.linalg.det(m)


# ---------------------------------------------------------------------------
# Stereographic projection S^3 -> R^3


def _pole_frame(pole):
    """Orthonormal basis ``(b1, b2, b3)`` of ``pole^perp`` oriented so that
    stereographic projection preserves the boundary orientation of S^3."""
    pole = np.asarray(pole, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([pole, np.eye(4)]))
    basis = q[:, 1:4].T.copy()
    # near the antipode -pole the projection is ~ identity onto pole^perp and
    # the outward normal of S^3 there is -pole
    if np.linalg.det(np.column_stack([-pole, *basis])) < 0:
        basis[2] *= -1.0
    return basis


def stereographic(p, pole):
    """Project points of the unit 3-sphere to R^3 from ``pole``.

    Raises
    ------
    ValueError
        If ``pole`` or a point is not on the unit sphere, or a point lies
        within 1e-9 of the pole.
    """
    p = np.asarray(p, dtype=float)
    pole = np.asarray(pole, dtype=float)
    if abs(np.linalg.norm(pole) - 1.0) > 1e-9:
        raise ValueError("pole must lie on the unit sphere")
    if np.any(np.abs(np.linalg.norm(p, axis=-1) - 1.0) > 1e-9):
        raise ValueError("points must lie on the unit sphere")
    if np.any(np.linalg.norm(p - pole, axis=-1) < 1e-9):
        raise ValueError("point coincides with the projection pole")
    basis = _pole_frame(pole)
    s = dot(p, pole)
    return (p @ basis.T) / (1.0 - s)[..., None]


def inverse_stereographic(x, pole):
    """Inverse of :func:`stereographic` for the same pole."""
    x = np.asarray(x, dtype=float)
    pole = np.asarray(pole, dtype=float)
    basis = _pole_frame(pole)
    r2 = np.sum(x * x, axis=-1)[..., None]
    return (2.0 * (x @ basis) + (r2 - 1.0) * pole) / (r2 + 1.0)


# ---------------------------------------------------------------------------
# Deterministic low-discrepancy samples of S^3


def _kronecker_alphas(dim):
    # generalized golden ratio: unique positive root of x^(d+1) = x + 1
    g = 2.0
    for _ in range(60):
        g = (1.0 + g) ** (1.0 / (dim + 1))
    return np.array([g ** -(k + 1) for k in range(dim)])


def sphere_lattice(n: int) -> np.ndarray:
    """``n`` deterministic, well-spread unit vectors in R^4.

    A Kronecker (generalized Fibonacci) sequence in the unit cube is pushed
    to S^3 through Hopf coordinates with an area-preserving change of the
    latitude, so the points are uniform in the limit.
    """
    if n < 1:
        raise ValueError("n must be positive")
    k = np.arange(n)[:, None] + 0.5
    u = np.mod(k * _kronecker_alphas(3)[None, :], 1.0)
    eta = np.arcsin(np.sqrt(u[:, 0]))
    a, b = 2.0 * np.pi * u[:, 1], 2.0 * np.pi * u[:, 2]
    return np.column_stack(
        [np.cos(eta) * np.cos(a), np.cos(eta) * np.sin(a), np.sin(eta) * np.cos(b), np.sin(eta) * np.sin(b)]
    )
