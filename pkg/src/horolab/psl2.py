"""PSL(2,R) arithmetic for a single rank-one factor.

Elements are unit-determinant 2x2 float arrays kept on a canonical sign
representative (first nonzero entry of the first column positive), so the
+/- ambiguity of PSL never leaks into downstream formulas.  Boundary points
of the projective line are extended reals with ``math.inf`` as the single
point at infinity.

Conventions, fixed once for the whole package:

    a_t = diag(e^{t/2}, e^{-t/2})          positive chamber t >= 0
    N   = upper unipotent [[1, x], [0, 1]] (contracted by a_{-s} . a_s)
    N+  = lower unipotent [[1, 0], [y, 1]]
    e+  = infinity,  e- = 0,  w0 = [[0, 1], [-1, 0]]

All functions are pure and accept stacked inputs: matrix arguments may have
shape (..., 2, 2) and boundary points shape (...); results broadcast.
"""

import math
from typing import NamedTuple

import numpy as np

from .errors import ChartError, InvalidElementError, OpenCellError

INF = math.inf

# |det - 1| tolerance after normalization; |d| threshold for the open cell.
DET_TOL = 1e-12
CELL_TOL = 1e-12


class IwasawaParts(NamedTuple):
    k: np.ndarray  # rotation angle
    t: np.ndarray  # a-coordinate
    x: np.ndarray  # N-coordinate


class CartanParts(NamedTuple):
    k1: np.ndarray
    t: np.ndarray  # >= 0
    k2: np.ndarray


class BruhatParts(NamedTuple):
    x: np.ndarray  # N-coordinate
    t: np.ndarray  # a-coordinate
    y: np.ndarray  # N+-coordinate


class LoxodromicData(NamedTuple):
    t_jordan: float
    attract: float
    repel: float


def identity():
    return np.eye(2)


def rotation(theta):
    """Rotation matrix R(theta); R(theta) maps infinity to cot(theta)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack(
        [np.stack([c, -s], axis=-1), np.stack([s, c], axis=-1)], axis=-2
    )


def a_matrix(t):
    """Chamber element a_t = diag(e^{t/2}, e^{-t/2})."""
    t = np.asarray(t, dtype=float)
    z = np.zeros_like(t)
    e = np.exp(0.5 * t)
    return np.stack(
        [np.stack([e, z], axis=-1), np.stack([z, 1.0 / e], axis=-1)], axis=-2
    )


def n_upper(x):
    """Horospherical element n_x = [[1, x], [0, 1]]."""
    x = np.asarray(x, dtype=float)
    o, z = np.ones_like(x), np.zeros_like(x)
    return np.stack(
        [np.stack([o, x], axis=-1), np.stack([z, o], axis=-1)], axis=-2
    )


def n_lower(y):
    """Opposite horospherical element [[1, 0], [y, 1]]."""
    y = np.asarray(y, dtype=float)
    o, z = np.ones_like(y), np.zeros_like(y)
    return np.stack(
        [np.stack([o, z], axis=-1), np.stack([y, o], axis=-1)], axis=-2
    )


W0 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def canonical_sign(m):
    """Flip sign so the first nonzero entry of the first column is positive."""
    m = np.asarray(m, dtype=float)
    a, c = m[..., 0, 0], m[..., 1, 0]
    s = np.where(a != 0.0, np.sign(a), np.sign(c))
    return m * s[..., None, None]


def normalize(m):
    """Scale a positive-determinant matrix to det 1 and canonical sign.

    Idempotent; raises InvalidElementError on non-positive or vanishing
    determinant.
    """
    m = np.asarray(m, dtype=float)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if np.any(np.abs(det) < 1e-300) or np.any(det <= 0.0):
        raise InvalidElementError(
            "matrix has non-positive or vanishing determinant"
        )
    return canonical_sign(m / np.sqrt(det)[..., None, None])


def inverse(m):
    """Inverse of a unit-determinant matrix, canonical sign."""
    m = np.asarray(m, dtype=float)
    inv = np.empty_like(m)
    inv[..., 0, 0] = m[..., 1, 1]
    inv[..., 0, 1] = -m[..., 0, 1]
    inv[..., 1, 0] = -m[..., 1, 0]
    inv[..., 1, 1] = m[..., 0, 0]
    return canonical_sign(inv)


def compose(m1, m2):
    """Product m1 @ m2, kept on the canonical representative."""
    return canonical_sign(np.asarray(m1) @ np.asarray(m2))


def mobius(m, xi):
    """Boundary action xi -> (a xi + b) / (c xi + d) on extended reals.

    Total: a vanishing denominator maps to infinity, and infinity maps to
    a / c (or infinity when c = 0).  -inf inputs are folded onto the single
    projective point at infinity.
    """
    m = np.asarray(m, dtype=float)
    xi = np.asarray(xi, dtype=float)
    a, b = m[..., 0, 0], m[..., 0, 1]
    c, d = m[..., 1, 0], m[..., 1, 1]
    at_inf = np.isinf(xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        finite = np.where(c * xi + d != 0.0, (a * xi + b) / (c * xi + d), INF)
        from_inf = np.where(c != 0.0, a / np.where(c != 0.0, c, 1.0), INF)
    out = np.where(at_inf, from_inf, finite)
    out = np.where(np.isinf(out), INF, out)
    if out.ndim == 0:
        return float(out)
    return out


def iwasawa(m):
    """Decompose g = R(k) a_t n_x; t = 2 log |first column of g|."""
    m = np.asarray(m, dtype=float)
    a, c = m[..., 0, 0], m[..., 1, 0]
    r1 = np.hypot(a, c)
    t = 2.0 * np.log(r1)
    k = np.arctan2(c, a)
    x = (a * m[..., 0, 1] + c * m[..., 1, 1]) / (r1 * r1)
    return IwasawaParts(k, t, x)


def iwasawa_matrix(parts):
    """Recompose R(k) a_t n_x from Iwasawa parts."""
    k, t, x = (np.asarray(v, dtype=float) for v in parts)
    return rotation(k) @ a_matrix(t) @ n_upper(x)


def cartan(m):
    """Decompose g = R(k1) a_t R(k2) with t = log(sigma1/sigma2) >= 0."""
    m = np.asarray(m, dtype=float)
    a, b = m[..., 0, 0], m[..., 0, 1]
    c, d = m[..., 1, 0], m[..., 1, 1]
    # g^T g = [[p, q], [q, s]], det 1.
    p = a * a + c * c
    q = a * b + c * d
    s = b * b + d * d
    theta_v = 0.5 * np.arctan2(2.0 * q, p - s)
    trace = p + s
    # trace >= 2 for unimodular input; (2/trace)^2 avoids trace^2 overflow.
    ratio = 2.0 / trace
    sigma1_sq = 0.5 * trace * (
        1.0 + np.sqrt(np.maximum(1.0 - ratio * ratio, 0.0))
    )
    t = np.log(np.maximum(sigma1_sq, 1.0))
    cv, sv = np.cos(theta_v), np.sin(theta_v)
    # First column of g V and its normalization give R(k1).
    u0 = a * cv + b * sv
    u1 = c * cv + d * sv
    k1 = np.arctan2(u1, u0)
    return CartanParts(k1, t, -theta_v)


def cartan_matrix(parts):
    k1, t, k2 = (np.asarray(v, dtype=float) for v in parts)
    return rotation(k1) @ a_matrix(t) @ rotation(k2)


def bruhat(m):
    """Decompose g = n_x a_t n^+_y (open cell d != 0).

    With the sign fixed so d > 0: x = b/d, t = -2 log d, y = c/d.  Raises
    OpenCellError when |d| < 1e-12.
    """
    m = np.asarray(m, dtype=float)
    d = m[..., 1, 1]
    if np.any(np.abs(d) < CELL_TOL):
        raise OpenCellError("element outside the open cell N.AM.N+ (d = 0)")
    s = np.sign(d)
    d = d * s
    t = -2.0 * np.log(d)
    x = s * m[..., 0, 1] / d
    y = s * m[..., 1, 0] / d
    return BruhatParts(x, t, y)


def bruhat_matrix(parts):
    x, t, y = (np.asarray(v, dtype=float) for v in parts)
    return n_upper(x) @ a_matrix(t) @ n_lower(y)


def trace(m):
    m = np.asarray(m, dtype=float)
    return m[..., 0, 0] + m[..., 1, 1]


def jordan_length(m):
    """Per-element Jordan coordinate: 2 log rho for |tr| > 2, else 0."""
    tr = np.abs(trace(m))
    lox = tr > 2.0
    tr_safe = np.where(lox, tr, 2.0)
    rho = 0.5 * (tr_safe + np.sqrt(tr_safe * tr_safe - 4.0))
    return np.where(lox, 2.0 * np.log(rho), 0.0)


def loxodromic_data(m):
    """Jordan length and fixed points of a loxodromic element, else None.

    Non-loxodromic elements (|trace| <= 2) carry Jordan coordinate 0 by
    convention and have no transverse fixed-point pair, so None is returned.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise ValueError("loxodromic_data expects a single 2x2 matrix")
    tr = float(m[0, 0] + m[1, 1])
    if abs(tr) <= 2.0:
        return None
    disc = math.sqrt(tr * tr - 4.0)
    t_jordan = 2.0 * math.log(0.5 * (abs(tr) + disc))
    a, b = float(m[0, 0]), float(m[0, 1])
    c, d = float(m[1, 0]), float(m[1, 1])
    if c != 0.0:
        # Fixed points ((a-d) +/- sqrt(tr^2-4)) / (2c); c xi + d = eigenvalue,
        # so the + root attracts iff tr > 0.
        sgn = 1.0 if tr > 0.0 else -1.0
        attract = ((a - d) + sgn * disc) / (2.0 * c)
        repel = ((a - d) - sgn * disc) / (2.0 * c)
    else:
        finite = b / (d - a)
        if abs(a) > abs(d):
            attract, repel = INF, finite
        else:
            attract, repel = finite, INF
    return LoxodromicData(t_jordan, attract, repel)


def rotation_to(xi):
    """Angle theta with R(theta) . infinity = xi (theta in [0, pi))."""
    xi = np.asarray(xi, dtype=float)
    theta = np.where(np.isinf(xi), 0.0, np.arctan2(1.0, xi) % np.pi)
    if theta.ndim == 0:
        return float(theta)
    return theta


def iwasawa_cocycle(m, xi):
    """a-part sigma(g, xi) of the Iwasawa decomposition of g R(theta_xi)."""
    return iwasawa(np.asarray(m) @ rotation(rotation_to(xi))).t


def busemann(xi, m):
    """Busemann cocycle beta_xi(e, g) = -sigma(g^{-1}, xi).

    Consequences of the convention (tested, not special-cased):
    beta_{g+}(e, g) equals the Iwasawa a-part of g and beta_{g-}(e, g)
    equals 2 log |second column of g|.
    """
    out = -iwasawa_cocycle(inverse(m), xi)
    if np.ndim(out) == 0:
        return float(out)
    return out


def boundary_derivative(m, xi):
    """|d(g.xi)/d xi| = 1/(c xi + d)^2 in the affine chart.

    Requires xi and g.xi finite; raises ChartError otherwise.
    """
    m = np.asarray(m, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(np.isinf(xi)):
        raise ChartError("boundary point at infinity has no affine derivative")
    denom = m[..., 1, 0] * xi + m[..., 1, 1]
    if np.any(denom == 0.0):
        raise ChartError("image at infinity: derivative leaves the chart")
    out = 1.0 / (denom * denom)
    if out.ndim == 0:
        return float(out)
    return out


def theta_of_point(xi):
    """Circle coordinate theta in [0, pi) of a boundary point (inf -> 0)."""
    return rotation_to(xi)


def point_of_theta(theta):
    """Boundary point cot(theta) of a circle coordinate (0 -> inf)."""
    theta = np.asarray(theta, dtype=float) % np.pi
    with np.errstate(divide="ignore"):
        out = np.where(theta == 0.0, INF, np.cos(theta) / np.sin(theta))
    if out.ndim == 0:
        return float(out)
    return out
