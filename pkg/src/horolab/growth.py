"""Poincare series, critical exponents, tangent forms, conformal densities.

Linear forms on the chamber are coefficient vectors (r,); series run over
the reduced words of a Schottky system weighted by e^{-phi(mu(w))} with mu
the componentwise Cartan projection.  The Patterson-style atom estimate
places mass at the per-factor Cartan angles k1 of each word.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import product, psl2, schottky
from .errors import (
    DivergenceError,
    GeneralPositionError,
    PartitionError,
    PreconditionError,
    UnderflowError,
)


@dataclass
class WordData:
    """Cartan data of the reduced-word ball, reused across series calls."""

    lengths: np.ndarray  # (N,)
    mu: np.ndarray  # (N, r) Cartan vectors
    k1: np.ndarray  # (N, r) Cartan angles, mod pi
    max_len: int
    prefix1: np.ndarray = None  # first letter index (-1 for identity)
    prefix2: np.ndarray = None  # second letter index (-1 if length < 2)


def word_data(system, max_len):
    last, mats, lengths, parent, _ = schottky.word_ball(system, max_len)
    parts = psl2.cartan(mats)
    k1 = np.asarray(parts.k1) % math.pi
    k1[k1 >= math.pi] = 0.0  # fold the rounding artifact at the wrap
    n = len(last)
    prefix1 = np.full(n, -1, dtype=np.int64)
    prefix2 = np.full(n, -1, dtype=np.int64)
    for i in range(1, n):
        p = parent[i]
        if p == 0:
            prefix1[i] = last[i]
        else:
            prefix1[i] = prefix1[p]
            prefix2[i] = last[i] if parent[p] == 0 else prefix2[p]
    return WordData(
        lengths,
        np.asarray(parts.t),
        k1,
        max_len,
        prefix1,
        prefix2,
    )


def poincare_partial(system, phi, max_len, data=None):
    """Per-length sums S_n = sum_{|w|=n} e^{-phi(mu(w))}, n = 0..max_len."""
    if max_len < 1:
        raise PreconditionError("max_len must be >= 1")
    if data is None:
        data = word_data(system, max_len)
    phi = np.asarray(phi, dtype=float)
    weights = np.exp(-(data.mu @ phi))
    return np.bincount(data.lengths, weights=weights, minlength=max_len + 1)


@dataclass
class DeltaEstimate:
    delta: float
    residual: float  # fitted log-slope at the returned exponent

    def __float__(self):
        return self.delta


def _log_slope(data, phi, s):
    weights = np.exp(-s * (data.mu @ phi))
    sums = np.bincount(data.lengths, weights=weights,
                       minlength=data.max_len + 1)
    n0 = max(1, data.max_len // 2)
    ns = np.arange(n0, data.max_len + 1)
    logs = np.log(sums[n0:])
    return float(np.polyfit(ns, logs, 1)[0])


def delta_phi(system, phi, max_len, data=None, s_tol=1e-4):
    """Critical exponent of s -> sum e^{-s phi(mu(w))}.

    Fits the growth slope of log S_n over the last half of the lengths and
    bisects in s until the bracket closes below s_tol; the residual slope
    at the estimate is reported.  phi must be positive on the measured
    limit cone.
    """
    if data is None:
        data = word_data(system, max_len)
    phi = np.asarray(phi, dtype=float)
    directions = data.mu[data.lengths == data.max_len]
    if directions.size and np.min(directions @ phi) <= 0.0:
        raise DivergenceError(
            "form is not positive on the measured limit cone"
        )
    lo = 0.0
    if _log_slope(data, phi, lo) <= 0.0:
        raise DivergenceError("series already subcritical at s = 0")
    hi = 1.0
    for _ in range(200):
        if _log_slope(data, phi, hi) < 0.0:
            break
        hi *= 2.0
    else:
        raise DivergenceError("no subcritical exponent found")
    while hi - lo > s_tol:
        mid = 0.5 * (lo + hi)
        if _log_slope(data, phi, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    delta = 0.5 * (lo + hi)
    return DeltaEstimate(delta, _log_slope(data, phi, delta))


def _simplex_grid(r, per_axis):
    """Positive rational directions on the unit simplex."""
    if r == 1:
        return np.ones((1, 1))
    out = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            out.append(prefix + [remaining])
            return
        for c in range(1, remaining - slots + 2):
            rec(prefix + [c], remaining - c, slots - 1)

    rec([], per_axis + r - 1, r)
    grid = np.asarray(out, dtype=float)
    return grid / grid.sum(axis=1, keepdims=True)


@dataclass
class PsiTangent:
    value: float  # growth indicator estimate at v
    form: np.ndarray  # tangent linear form (r,)
    grid_values: np.ndarray  # s(phi_hat) * phi_hat(v) over the scanned grid
    grid_forms: np.ndarray  # the scanned scaled forms


def psi_tangent(system, v, max_len, grid=None, data=None):
    """Duality estimate of the growth indicator and its tangent form at v.

    Scans unit-simplex directions phi_hat, rescales each so its critical
    exponent is 1 (the scaling law makes that rescaling delta(phi_hat)),
    and minimizes the rescaled form at v; one local grid-halving pass
    refines the minimizer (r = 2).  Default grid: 33 directions for r = 2,
    15 per axis for r >= 3.
    """
    v = np.asarray(v, dtype=float)
    r = system.r
    if grid is None:
        grid = 33 if r <= 2 else 15
    if v.shape != (r,) or np.any(v <= 0.0):
        raise PreconditionError("v must be an interior chamber vector")
    if data is None:
        data = word_data(system, max_len)
    cone = schottky.limit_cone(system, min(max_len, 6))
    dirs = cone.directions
    if dirs.shape[0] == 0 or not _in_cone(v, dirs):
        raise PreconditionError("v is outside the measured limit cone")

    def scan(directions):
        forms, values = [], []
        for phat in directions:
            if np.min(dirs @ phat) <= 0.0:
                continue
            est = delta_phi(system, phat, max_len, data=data)
            forms.append(est.delta * phat)
            values.append(est.delta * float(phat @ v))
        return np.asarray(forms), np.asarray(values)

    if r == 1:
        est = delta_phi(system, np.ones(1), max_len, data=data)
        form = np.array([est.delta])
        return PsiTangent(est.delta * float(v[0]), form,
                          np.array([est.delta * v[0]]), form[None])
    if r == 2:
        u = np.linspace(0.0, 1.0, grid + 2)[1:-1]
        directions = np.stack([u, 1.0 - u], axis=1)
    else:
        directions = _simplex_grid(r, grid)
    def pick(forms, values):
        # Flat landscapes happen on degenerate cones (e.g. the diagonal
        # joining); break ties toward the minimum-norm (balanced) form.
        tol = 1e-6 + 1e-4 * abs(float(values.min()))
        near = np.nonzero(values <= values.min() + tol)[0]
        norms = np.linalg.norm(forms[near], axis=1)
        return int(near[int(np.argmin(norms))])

    forms, values = scan(directions)
    if values.size == 0:
        raise PreconditionError("no admissible directions on the grid")
    best = pick(forms, values)
    if r == 2:
        best_hat = forms[best] / forms[best].sum()
        u0 = float(best_hat[0])
        h = float(u[1] - u[0]) if len(u) > 1 else 0.25
        u_ref = np.clip(np.linspace(u0 - h, u0 + h, 9), 1e-3, 1 - 1e-3)
        ref_dirs = np.stack([u_ref, 1.0 - u_ref], axis=1)
        f2, v2 = scan(ref_dirs)
        if v2.size:
            forms = np.concatenate([forms, f2])
            values = np.concatenate([values, v2])
        best = pick(forms, values)
    return PsiTangent(float(values[best]), forms[best], values, forms)


def _in_cone(v, dirs):
    """v lies in the convex cone spanned by the directions (up to slack)."""
    vhat = v / np.linalg.norm(v)
    if dirs.shape[1] == 1:
        return True
    if dirs.shape[1] == 2:
        ang = np.arctan2(dirs[:, 1], dirs[:, 0])
        a = math.atan2(vhat[1], vhat[0])
        return ang.min() - 1e-9 <= a <= ang.max() + 1e-9
    from scipy.optimize import nnls

    _, resid = nnls(dirs.T, vhat)
    return resid < 1e-6


@dataclass
class ConformalMeasureEstimate:
    """Finite atom approximation of a conformal boundary measure."""

    thetas: np.ndarray  # (N, r) circle coordinates of the atoms
    weights: np.ndarray  # (N,) positive, sums to 1
    form: np.ndarray  # (r,) the functional used in the weights
    s: float
    max_len: int
    length_mass: np.ndarray = field(default=None)  # mass per word length

    @property
    def boundary_points(self):
        return psl2.point_of_theta(self.thetas)

    def mass_of_box(self, arcs, closed=False):
        """Total weight inside a product of per-factor arcs.

        Half-open arcs by default so that partitions tile exactly even when
        atoms sit on cell boundaries.
        """
        inside = np.ones(self.thetas.shape[0], dtype=bool)
        for f, arc in enumerate(arcs):
            inside &= schottky.arc_contains(
                arc, self.thetas[:, f], closed=closed
            )
        return float(self.weights[inside].sum())


def patterson_atoms(system, phi, s, max_len, data=None, check_critical=True):
    """Atoms at the Cartan angles of words of length 1..max_len.

    Weight of word w is e^{-s phi(mu(w))}, normalized; s should dominate
    the critical exponent of phi (checked unless check_critical=False).
    """
    if max_len < 4:
        raise PreconditionError("max_len must be >= 4")
    if data is None:
        data = word_data(system, max_len)
    phi = np.asarray(phi, dtype=float)
    if check_critical:
        est = delta_phi(system, phi, max_len, data=data)
        if s < est.delta - 1e-9:
            raise PreconditionError(
                f"s = {s} is below the critical exponent {est.delta:.6f}"
            )
    sel = data.lengths > 0
    with np.errstate(over="ignore"):
        weights = np.exp(-s * (data.mu[sel] @ phi))
    total = weights.sum()
    if not np.isfinite(total) or total < 1e-300:
        raise UnderflowError("atom weights vanish at double precision")
    weights = weights / total
    length_mass = np.bincount(
        data.lengths[sel], weights=weights, minlength=max_len + 1
    )
    return ConformalMeasureEstimate(
        data.k1[sel], weights, phi, float(s), max_len, length_mass
    )


def _support_arc(thetas):
    """Smallest arc containing the points: complement of the widest gap."""
    u = np.sort(np.unique(thetas))
    if len(u) == 1:
        return (float(u[0]), float(u[0]))
    gaps = np.diff(np.concatenate([u, [u[0] + math.pi]]))
    k = int(np.argmax(gaps))
    return (float(u[(k + 1) % len(u)]), float(u[k]))


def cylinder_partition(nu, data, system, n_arcs=16, factor=0):
    """Partition of the limit set by word-prefix cylinders (one factor).

    Starts from the depth-2 prefix cells (cylinders are disjoint arcs by
    ping-pong nesting; length-1 words count toward their diagonal cell) and
    splits heavy cells at their widest interior gap until n_arcs cells
    exist.  Cells containing a letter fixed point are split last: isolating
    the fixed-point atom cluster degrades the arc-center conformality
    estimator.
    """
    sel = data.lengths > 0
    th = nu.thetas[:, factor]
    p1, p2 = data.prefix1[sel], data.prefix2[sel]
    k2 = 2 * system.k
    mats = system.letter_matrices()
    fixed_thetas = []
    for idx in range(k2):
        lox = psl2.loxodromic_data(mats[idx, factor])
        if lox is not None:
            fixed_thetas.append(psl2.theta_of_point(lox.attract))
    cells = []
    for a in range(k2):
        for b in range(k2):
            if b == (a + system.k) % k2:
                continue
            mask = (p1 == a) & ((p2 == b) | ((p2 == -1) & (b == a)))
            if mask.any():
                cells.append(mask)

    def has_fixed_point(mask):
        arc = _support_arc(th[mask])
        return any(
            schottky.arc_contains(arc, t0) for t0 in fixed_thetas
        )

    for _ in range(4 * n_arcs):
        if len(cells) >= n_arcs:
            break
        candidates = sorted(
            range(len(cells)),
            key=lambda i: (has_fixed_point(cells[i]),
                           -nu.weights[cells[i]].sum()),
        )
        for pos in candidates:
            split = _split_cell(th, cells[pos])
            if split is not None:
                cells.pop(pos)
                cells.extend(split)
                break
        else:
            break
    return [_support_arc(th[m]) for m in cells if m.any()]


def _split_cell(th, mask):
    """Split a cell in two at its widest interior gap."""
    arc = _support_arc(th[mask])
    lo, hi = arc
    width = (hi - lo) % math.pi
    if width == 0.0:
        return None
    rel = (th - lo) % math.pi
    u = np.sort(np.unique(rel[mask]))
    if len(u) < 2:
        return None
    gaps = np.diff(u)
    k = int(np.argmax(gaps))
    cut = 0.5 * (u[k] + u[k + 1])
    left = mask & (rel <= cut)
    right = mask & (rel > cut)
    if not left.any() or not right.any():
        return None
    return [left, right]


def quantile_partition(nu, n_arcs, factor=0):
    """Circle partition into arcs of roughly equal atom mass (one factor).

    Boundaries are midpoints of strict gaps between sorted atom positions,
    so the closed arcs tile the circle without sharing any atom.
    """
    theta = nu.thetas[:, factor]
    order = np.argsort(theta, kind="stable")
    ts, ws = theta[order], nu.weights[order]
    cum = np.cumsum(ws)

    def gap_bound(idx):
        # Walk forward to a gap wide enough that its midpoint is a float
        # strictly between the neighbors (atoms cluster geometrically).
        while idx < len(ts) - 2 and ts[idx + 1] - ts[idx] < 1e-9:
            idx += 1
        return 0.5 * (ts[idx] + ts[idx + 1])

    bounds = []
    for q in range(1, n_arcs):
        idx = min(int(np.searchsorted(cum, q / n_arcs)), len(ts) - 2)
        bounds.append(gap_bound(idx))
    start = 0.5 * (ts[0] + (ts[-1] - math.pi))  # midpoint across the wrap
    bounds = sorted(set([start % math.pi] + bounds))
    arcs = []
    for i in range(len(bounds)):
        lo = bounds[i]
        hi = bounds[(i + 1) % len(bounds)]
        arcs.append((lo, hi))
    return arcs


@dataclass
class ConformalityResidual:
    residual: float
    sign: int  # +1 / -1 : winning Busemann sign convention
    per_arc: np.ndarray


def conformality_residual(nu, psi, gamma, partition, min_mass=1e-3):
    """Worst-arc deviation from the conformal transformation rule.

    Compares nu(gamma^{-1} A) / nu(A) with exp(sign * psi(beta_xi(e, gamma)))
    at the arc centers xi for both sign conventions and returns the smaller
    residual together with the winning sign.
    """
    psi = np.asarray(psi, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    r = gamma.shape[0]
    boxes = []
    for cell in partition:
        if r == 1 and np.ndim(cell[0]) == 0:
            boxes.append((tuple(cell),))
        else:
            boxes.append(tuple(tuple(a) for a in cell))
    gamma_inv = product.inverse(gamma)
    masses = np.array([nu.mass_of_box(box) for box in boxes])
    if np.any(masses < min_mass):
        raise PartitionError(
            f"every arc needs nu-mass >= {min_mass}; got min {masses.min():.2e}"
        )
    pulled = []
    centers = []
    for box in boxes:
        arcs_pulled = []
        center = []
        for f, arc in enumerate(box):
            lo, hi = schottky.arc_normalize(arc)
            pts = psl2.point_of_theta(np.array([lo, hi]))
            img = psl2.mobius(gamma_inv[f], pts)
            ang = psl2.theta_of_point(img)
            arcs_pulled.append((float(ang[0]), float(ang[1])))
            center.append(psl2.point_of_theta(schottky.arc_midpoint(arc)))
        pulled.append(tuple(arcs_pulled))
        centers.append(center)
    pulled_mass = np.array([nu.mass_of_box(box) for box in pulled])
    ratios = pulled_mass / masses
    betas = np.array(
        [product.busemann_vector(np.asarray(c), gamma) for c in centers]
    )
    best = None
    for sign in (1, -1):
        predicted = np.exp(sign * (betas @ psi))
        per_arc = np.abs(ratios - predicted)
        res = float(per_arc.max())
        if best is None or res < best[0]:
            best = (res, sign, per_arc)
    return ConformalityResidual(*best)


def br_log_density(psi_v, hopf_point):
    """Log-density of the horospherical-invariant measure at a Hopf point.

    Returns psi_v(beta_xi(e, g)) + Q(beta_eta(e, g)) for the unique g with
    Hopf coordinates (xi, eta, b); Q is the homogeneous-dimension form of
    the abelian horospherical model (all-ones coefficients).
    """
    xi, eta, b = hopf_point
    psi_v = np.asarray(psi_v, dtype=float)
    g = product.from_hopf(xi, eta, b)
    plus, minus, beta_plus = product.hopf(g)
    if not product.general_position(plus, minus):
        raise GeneralPositionError("degenerate Hopf pair")
    beta_minus = product.busemann_vector(minus, g)
    return float(psi_v @ beta_plus + np.sum(beta_minus))
