"""Operations on products of PSL(2,R) factors.

A group element is an (r, 2, 2) float array, one canonical-sign
unit-determinant matrix per factor; boundary points, chamber vectors and
a-coordinates are (r,) arrays.  Functions broadcast over a leading batch
axis where it is cheap to do so: matrices (..., r, 2, 2), points (..., r).
"""

import numpy as np

from . import psl2
from .errors import GeneralPositionError, OpenCellError, PreconditionError

# Chart margin: a boundary component counts as infinity beyond this, to
# guard float overflow in the N.e- chart.
CHART_MARGIN = 1e12


def group_element(factors):
    """Stack per-factor matrices into an (r, 2, 2) element, normalized."""
    m = np.stack([np.asarray(f, dtype=float) for f in factors], axis=0)
    return psl2.normalize(m)


def identity(r):
    return np.broadcast_to(np.eye(2), (r, 2, 2)).copy()


def rank(g):
    return np.asarray(g).shape[-3]


def compose(g, h):
    return psl2.compose(g, h)


def inverse(g):
    return psl2.inverse(g)


def a_element(tvec):
    """Chamber element exp(t) for an a-coordinate vector (r,)."""
    return psl2.a_matrix(np.asarray(tvec, dtype=float))


def n_element(xvec):
    """Horospherical element with N-coordinates (r,)."""
    return psl2.n_upper(np.asarray(xvec, dtype=float))


def boundary_point(values):
    return np.asarray(values, dtype=float)


def e_plus(r):
    return np.full(r, psl2.INF)


def e_minus(r):
    return np.zeros(r)


def act(g, xi):
    """Componentwise boundary action."""
    return np.asarray(psl2.mobius(g, xi))


def cartan_vector(g):
    """Componentwise Cartan projection (log singular-value ratios), >= 0."""
    return np.asarray(psl2.cartan(g).t)


def jordan_vector(g):
    """Componentwise Jordan projection; 0 in non-loxodromic factors."""
    return np.asarray(psl2.jordan_length(g))


def is_loxodromic(g):
    """True when every factor is loxodromic."""
    return bool(np.all(np.abs(psl2.trace(g)) > 2.0))


def fixed_flags(g):
    """Attracting/repelling flags (y_g, y_{g^{-1}}), or None.

    Defined only for elements loxodromic in every factor.
    """
    g = np.asarray(g, dtype=float)
    attract = np.empty(g.shape[0])
    repel = np.empty(g.shape[0])
    for i in range(g.shape[0]):
        data = psl2.loxodromic_data(g[i])
        if data is None:
            return None
        attract[i] = data.attract
        repel[i] = data.repel
    return attract, repel


def general_position(xi, eta):
    """True iff the flags differ in every factor."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    both_inf = np.isinf(xi) & np.isinf(eta)
    return bool(np.all(~both_inf & (xi != eta)))


def bruhat_components(g, n):
    """Componentwise (b^N, b^{AM}, b^{N+}) coordinates of g n_x.

    Raises OpenCellError, reporting the first offending factor, when some
    factor of g n_x leaves the open cell.
    """
    g = np.asarray(g, dtype=float)
    x = np.asarray(n, dtype=float)
    gn = g @ psl2.n_upper(x)
    d = gn[..., 1, 1]
    bad = np.abs(d) < psl2.CELL_TOL
    if np.any(bad):
        factor = int(np.argmax(bad))
        raise OpenCellError(
            f"g.n leaves the open cell in factor {factor}", factor=factor
        )
    parts = psl2.bruhat(gn)
    return parts.x, parts.t, parts.y


def generalized_jordan(g):
    """a-part of b^{AM}(g, y_g), defined when y_g lies in the N.e- chart.

    Requires g loxodromic in every factor (PreconditionError otherwise);
    raises OpenCellError if the attracting flag has a component at (or
    numerically beyond the chart margin of) infinity.
    """
    flags = fixed_flags(g)
    if flags is None:
        raise PreconditionError(
            "generalized Jordan projection needs a fully loxodromic element"
        )
    y_g, _ = flags
    if np.any(np.isinf(y_g)) or np.any(np.abs(y_g) > CHART_MARGIN):
        raise OpenCellError("attracting flag leaves the N.e- chart")
    _, am, _ = bruhat_components(g, y_g)
    return am


def iwasawa_vector(g):
    """Componentwise Iwasawa a-parts."""
    return np.asarray(psl2.iwasawa(g).t)


def hopf(g):
    """Hopf coordinates (g.e+, g.e-, Iwasawa a-part), componentwise."""
    g = np.asarray(g, dtype=float)
    r = g.shape[-3]
    plus = act(g, np.broadcast_to(e_plus(r), g.shape[:-2]))
    minus = act(g, np.broadcast_to(e_minus(r), g.shape[:-2]))
    return plus, minus, iwasawa_vector(g)


def from_hopf(xi, eta, b):
    """Reconstruct the element with Hopf coordinates (xi, eta, b).

    Raises GeneralPositionError when some factor has xi_i = eta_i.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    b = np.asarray(b, dtype=float)
    if not general_position(xi, eta):
        raise GeneralPositionError("Hopf coordinates need transverse flags")
    theta = np.asarray(psl2.rotation_to(xi))
    k = psl2.rotation(theta)
    w = np.asarray(psl2.mobius(psl2.inverse(k), eta))
    x = np.exp(-b) * w
    return psl2.canonical_sign(k @ psl2.a_matrix(b) @ psl2.n_upper(x))


def busemann_vector(xi, g):
    """Componentwise Busemann cocycle beta_xi(e, g)."""
    return np.asarray(psl2.busemann(xi, g))


def matrix_power(g, p):
    """Elementwise p-th power by repeated squaring (p >= 0)."""
    g = np.asarray(g, dtype=float)
    result = identity(g.shape[0])
    base = g
    while p > 0:
        if p & 1:
            result = compose(result, base)
        base = compose(base, base)
        p >>= 1
    return result
