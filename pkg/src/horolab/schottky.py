"""Schottky systems: ping-pong validation, word enumeration, limit data.

A system holds k generators of the product group together with per-factor
ping-pong data: one attracting and one repelling closed arc per generator
on the circle coordinate theta in [0, pi) of each factor's boundary.
Letters of the symmetric generating set are indexed 0..2k-1 (generators
first, then inverses); signed 1-based letters (+j / -j) appear in the Word
type used by callers.
"""

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import product, psl2
from ._kernels import expand_reduced_words
from .errors import EnumerationLimitError, PingPongError, PreconditionError

HALF_TURN = math.pi  # circumference of the projective circle

WORD_COUNT_GUARD = 10**8


# ----------------------------------------------------------------- arcs


def arc_normalize(arc):
    lo, hi = (float(a) % HALF_TURN for a in arc)
    return lo, hi


def arc_width(arc):
    lo, hi = arc_normalize(arc)
    return (hi - lo) % HALF_TURN


def arc_contains(arc, theta, slack=0.0, closed=True):
    lo, hi = arc_normalize(arc)
    t = (np.asarray(theta) - lo) % HALF_TURN
    width = (hi - lo) % HALF_TURN + slack
    if closed:
        return t <= width
    return t < width


def arc_midpoint(arc):
    lo, _ = arc_normalize(arc)
    return (lo + 0.5 * arc_width(arc)) % HALF_TURN


def arc_gap(a, b):
    """Circular separation of two arcs (0 when they meet)."""
    a_lo, a_hi = arc_normalize(a)
    b_lo, b_hi = arc_normalize(b)
    if np.any(arc_contains(a, [b_lo, b_hi])) or np.any(
        arc_contains(b, [a_lo, a_hi])
    ):
        return 0.0
    fwd = (b_lo - a_hi) % HALF_TURN
    bwd = (a_lo - b_hi) % HALF_TURN
    return min(fwd, bwd)


# --------------------------------------------------------------- system


class Word(NamedTuple):
    """Freely reduced word: nonzero signed 1-based generator indices."""

    letters: tuple

    @property
    def length(self):
        return len(self.letters)


def word_from_letters(letters):
    letters = tuple(int(l) for l in letters)
    for l in letters:
        if l == 0:
            raise PreconditionError("letters are signed nonzero indices")
    for a, b in zip(letters, letters[1:]):
        if a == -b:
            raise PreconditionError(f"word not freely reduced at {a}, {b}")
    return Word(letters)


def reduce_letters(letters):
    out = []
    for l in letters:
        if out and out[-1] == -l:
            out.pop()
        else:
            out.append(int(l))
    return tuple(out)


@dataclass(frozen=True)
class SchottkySystem:
    r: int
    generators: tuple  # k arrays of shape (r, 2, 2)
    pingpong: np.ndarray  # (k, r, 2, 2): [gen, factor, attract/repel, lo/hi]
    tolerance: float = 1e-3

    @property
    def k(self):
        return len(self.generators)

    def letter_matrices(self):
        """(2k, r, 2, 2): generators then inverses."""
        gens = np.stack(self.generators)
        return np.concatenate([gens, product.inverse(gens)], axis=0)

    def letter_index(self, signed):
        return signed - 1 if signed > 0 else self.k + (-signed) - 1

    def signed_letter(self, index):
        return index + 1 if index < self.k else -(index - self.k + 1)

    def letter_arcs(self, index, factor):
        """(attract, repel) arcs of a letter; swapped for inverses."""
        if index < self.k:
            pp = self.pingpong[index, factor]
            return tuple(pp[0]), tuple(pp[1])
        pp = self.pingpong[index - self.k, factor]
        return tuple(pp[1]), tuple(pp[0])


def make_system(generators, pingpong, tolerance=1e-3):
    gens = tuple(psl2.normalize(np.asarray(g, dtype=float)) for g in generators)
    r = gens[0].shape[0]
    for g in gens:
        if g.shape != (r, 2, 2):
            raise PreconditionError("generators must share the factor count")
    pp = np.asarray(pingpong, dtype=float)
    if pp.shape != (len(gens), r, 2, 2):
        raise PreconditionError("pingpong data must have shape (k, r, 2, 2)")
    return SchottkySystem(r, gens, pp, float(tolerance))


def hyperbolic_with_axis(attract, repel, length):
    """Single-factor hyperbolic element with the given axis endpoints."""
    if not math.isfinite(attract) or not math.isfinite(repel):
        if math.isinf(attract) and math.isinf(repel):
            raise PreconditionError("axis endpoints must differ")
        if math.isinf(attract):
            v = np.array([[1.0, repel], [0.0, 1.0]])
        else:
            v = np.array([[attract, -1.0], [1.0, 0.0]])
        return psl2.canonical_sign(
            v @ psl2.a_matrix(length) @ psl2.inverse(v)
        )
    if attract == repel:
        raise PreconditionError("axis endpoints must differ")
    if attract > repel:
        v = np.array([[attract, repel], [1.0, 1.0]])
    else:
        # Negate the second column to keep the determinant positive; the
        # Moebius action of a column-scaled matrix is unchanged.
        v = np.array([[attract, -repel], [1.0, -1.0]])
    v = psl2.normalize(v)
    return psl2.canonical_sign(v @ psl2.a_matrix(length) @ psl2.inverse(v))


# ----------------------------------------------------- ping-pong report


@dataclass
class PingPongReport:
    valid: bool
    margins: np.ndarray  # (r,) smallest arc separation per factor
    violations: list = field(default_factory=list)

    def raise_if_invalid(self):
        if not self.valid:
            raise PingPongError("; ".join(self.violations[:4]))


def _complement_samples(arc, n):
    """Sample points of the complement of a closed arc, ends included."""
    lo, hi = arc_normalize(arc)
    width = (hi - lo) % HALF_TURN
    return (hi + np.linspace(0.0, HALF_TURN - width, n)) % HALF_TURN


def validate_ping_pong(system, samples=1000):
    """Check loxodromy, arc disjointness with margin, and absorption.

    Absorption is validated numerically: each letter must map the sampled
    complement of its repelling arc inside its attracting arc, factor by
    factor.
    """
    viol = []
    margins = np.full(system.r, np.inf)
    letters = system.letter_matrices()
    k = system.k
    for f in range(system.r):
        for j in range(k):
            if abs(psl2.trace(system.generators[j][f])) <= 2.0:
                viol.append(f"generator {j} not loxodromic in factor {f}")
        arcs = [system.letter_arcs(idx, f)[0] for idx in range(2 * k)]
        for a in range(2 * k):
            for b in range(a + 1, 2 * k):
                gap = arc_gap(arcs[a], arcs[b])
                margins[f] = min(margins[f], gap)
                if gap < system.tolerance:
                    viol.append(
                        f"arcs of letters {a} and {b} in factor {f} "
                        f"separated by {gap:.2e} < tolerance"
                    )
        for idx in range(2 * k):
            attract, repel = system.letter_arcs(idx, f)
            theta = _complement_samples(repel, samples)
            xi = psl2.point_of_theta(theta)
            img = psl2.mobius(letters[idx, f], xi)
            img_theta = psl2.theta_of_point(img)
            ok = arc_contains(attract, img_theta)
            if not np.all(ok):
                bad = float(np.asarray(theta)[~ok][0])
                viol.append(
                    f"letter {idx} factor {f}: complement point "
                    f"theta={bad:.4f} escapes the attracting arc"
                )
    return PingPongReport(not viol, margins, viol)


def zariski_density_flags(system, max_len=3):
    """Necessary (not sufficient) numerical conditions for Zariski density."""
    flags = {"two_generators": system.k >= 2}
    pts = []
    for j in range(system.k):
        flags_j = product.fixed_flags(np.stack(system.generators[j]))
        if flags_j is None:
            flags["distinct_fixed_points"] = False
            break
        pts.extend([flags_j[0], flags_j[1]])
    else:
        pts = np.asarray(pts)
        distinct = True
        for f in range(system.r):
            col = pts[:, f]
            distinct &= len(np.unique(col)) == len(col)
        flags["distinct_fixed_points"] = bool(distinct)
    if system.r < 2:
        flags["nonparallel_jordan"] = True
    else:
        _, mats, lengths, _, _ = word_ball(system, min(max_len, 4))
        lam = product.jordan_vector(mats[lengths > 0])
        lam = lam[np.all(lam > 0, axis=1)]
        norm = lam / np.linalg.norm(lam, axis=1, keepdims=True)
        flags["nonparallel_jordan"] = bool(
            norm.shape[0] >= 2
            and np.max(np.ptp(norm, axis=0)) > 1e-9
        )
    return flags


# ---------------------------------------------------------- enumeration


def reduced_word_count(k, max_len):
    total = 1
    for n in range(1, max_len + 1):
        total += 2 * k * (2 * k - 1) ** (n - 1)
    return total


def word_ball(system, max_len):
    """All reduced words of length <= max_len with their products.

    Returns (letter (N,), mats (N, r, 2, 2), lengths (N,), parent (N,),
    letter_count) where letter[i] is the final letter index of word i
    (-1 for the identity) and parent[i] the index of its length-(n-1)
    prefix.  BFS order: lengths ascending, frontier-major within a level.
    """
    if max_len < 0:
        raise PreconditionError("max_len must be >= 0")
    count = reduced_word_count(system.k, max_len)
    if count > WORD_COUNT_GUARD:
        raise EnumerationLimitError(
            f"{count} words exceed the enumeration guard {WORD_COUNT_GUARD}"
        )
    letters = np.ascontiguousarray(system.letter_matrices())
    inv_of = np.concatenate(
        [
            np.arange(system.k, 2 * system.k, dtype=np.int32),
            np.arange(0, system.k, dtype=np.int32),
        ]
    )
    mats = [np.ascontiguousarray(product.identity(system.r)[None])]
    last = [np.array([-1], dtype=np.int32)]
    parents = [np.array([-1], dtype=np.int64)]
    lengths = [np.zeros(1, dtype=np.int64)]
    offset = 0
    for n in range(1, max_len + 1):
        new_mats, new_last, new_parent = expand_reduced_words(
            mats[-1], last[-1], letters, inv_of
        )
        mats.append(new_mats)
        last.append(new_last)
        parents.append(new_parent + offset)
        lengths.append(np.full(new_mats.shape[0], n, dtype=np.int64))
        offset += mats[-2].shape[0]
    return (
        np.concatenate(last),
        np.concatenate(mats),
        np.concatenate(lengths),
        np.concatenate(parents),
        2 * system.k,
    )


def word_letters(index, last, parent, system):
    """Recover the signed letter tuple of word `index` from BFS arrays."""
    out = []
    while index > 0:
        out.append(system.signed_letter(int(last[index])))
        index = int(parent[index])
    return tuple(reversed(out))


def enumerate_words(system, max_len):
    """Yield (Word, product matrix) for every reduced word of length <= L.

    Matrices come on their canonical sign representative.
    """
    last, mats, _, parent, _ = word_ball(system, max_len)
    mats = psl2.canonical_sign(mats)
    for i in range(mats.shape[0]):
        yield Word(word_letters(i, last, parent, system)), mats[i]


def word_matrix(system, letters):
    """Direct product of letter matrices (oracle route; no batching)."""
    mats = system.letter_matrices()
    out = product.identity(system.r)
    for l in letters:
        out = product.compose(out, mats[system.letter_index(int(l))])
    return out


# --------------------------------------------------------- self-joining


def self_joining(rep1, rep2):
    """Join two validated single-factor systems over the same free group."""
    for rep in (rep1, rep2):
        if rep.r != 1:
            raise PreconditionError("self-joining takes single-factor systems")
        validate_ping_pong(rep).raise_if_invalid()
    if rep1.k != rep2.k:
        raise PreconditionError("representations need equal generator counts")
    gens = tuple(
        np.concatenate([rep1.generators[j], rep2.generators[j]], axis=0)
        for j in range(rep1.k)
    )
    pingpong = np.concatenate([rep1.pingpong, rep2.pingpong], axis=1)
    return make_system(gens, pingpong, min(rep1.tolerance, rep2.tolerance))


# ----------------------------------------------------------- limit data


@dataclass
class LimitCone:
    directions: np.ndarray  # (m, r) unit vectors
    angle_range: tuple = None  # r = 2: (min, max) of atan2(l2, l1)
    hull_vertices: np.ndarray = None  # r >= 3: extreme unit directions


def limit_cone(system, max_len):
    """Normalized Jordan vectors of all fully loxodromic words up to L."""
    if max_len < 1:
        raise PreconditionError("max_len must be >= 1")
    _, mats, lengths, _, _ = word_ball(system, max_len)
    lam = product.jordan_vector(mats[lengths > 0])
    lam = lam[np.all(lam > 0.0, axis=1)]
    if lam.shape[0] == 0:
        return LimitCone(np.empty((0, system.r)), None, None)
    dirs = lam / np.linalg.norm(lam, axis=1, keepdims=True)
    if system.r == 1:
        return LimitCone(dirs, (0.0, 0.0), None)
    if system.r == 2:
        ang = np.arctan2(dirs[:, 1], dirs[:, 0])
        return LimitCone(dirs, (float(ang.min()), float(ang.max())), None)
    from scipy.spatial import ConvexHull

    simplex = dirs / dirs.sum(axis=1, keepdims=True)
    try:
        hull = ConvexHull(simplex[:, :-1])
        verts = dirs[hull.vertices]
    except Exception:
        verts = dirs
    return LimitCone(dirs, None, verts)


def limit_point(system, letters, depth):
    """Nested-arc estimate of the limit point of an infinite word.

    Image of the attracting-arc midpoint of the letter after the prefix of
    length `depth` under that prefix; successive depths converge
    geometrically inside the absorbing arcs.
    """
    letters = tuple(int(l) for l in letters)
    if reduce_letters(letters) != letters:
        raise PreconditionError("letter sequence must be freely reduced")
    if depth > len(letters):
        raise PreconditionError("depth exceeds the sequence length")
    seed_idx = system.letter_index(letters[min(depth, len(letters) - 1)])
    target = np.array(
        [
            psl2.point_of_theta(
                arc_midpoint(system.letter_arcs(seed_idx, f)[0])
            )
            for f in range(system.r)
        ]
    )
    prefix = word_matrix(system, letters[:depth])
    return product.act(prefix, target)


# -------------------------------------------------------------- configs


def system_to_dict(system):
    return {
        "r": system.r,
        "generators": [
            [list(map(float, g[f].ravel())) for f in range(system.r)]
            for g in system.generators
        ],
        "pingpong": [
            {
                "gen": j,
                "factor": f,
                "attract": [float(a) for a in system.pingpong[j, f, 0]],
                "repel": [float(a) for a in system.pingpong[j, f, 1]],
            }
            for j in range(system.k)
            for f in range(system.r)
        ],
        "tolerance": system.tolerance,
    }


def system_from_dict(data):
    required = {"r", "generators", "pingpong", "tolerance"}
    unknown = set(data) - required
    if unknown:
        raise PreconditionError(f"unknown system keys: {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise PreconditionError(f"missing system keys: {sorted(missing)}")
    r = int(data["r"])
    gens = [
        np.stack([np.asarray(flat, dtype=float).reshape(2, 2) for flat in g])
        for g in data["generators"]
    ]
    for g in gens:
        if g.shape != (r, 2, 2):
            raise PreconditionError("generator factor count mismatch")
    pingpong = np.zeros((len(gens), r, 2, 2))
    seen = set()
    for entry in data["pingpong"]:
        j, f = int(entry["gen"]), int(entry["factor"])
        pingpong[j, f, 0] = entry["attract"]
        pingpong[j, f, 1] = entry["repel"]
        seen.add((j, f))
    if len(seen) != len(gens) * r:
        raise PreconditionError("pingpong data incomplete")
    return make_system(gens, pingpong, float(data["tolerance"]))


def load_system(path):
    with open(path, "r", encoding="utf-8") as fh:
        return system_from_dict(json.load(fh))


def save_system(system, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_dict(system), fh, indent=1, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------- reference systems


def fuchsian_pair(length=4.0, half_width=math.pi / 16, tolerance=1e-3):
    """Two-generator Fuchsian reference system with orthogonal-ish axes."""
    thetas = [(0.0, math.pi / 2), (math.pi / 4, 3 * math.pi / 4)]
    gens, pingpong = [], []
    for att_t, rep_t in thetas:
        g = hyperbolic_with_axis(
            psl2.point_of_theta(att_t), psl2.point_of_theta(rep_t), length
        )
        gens.append(g[None])
        pingpong.append(
            [
                [
                    [att_t - half_width, att_t + half_width],
                    [rep_t - half_width, rep_t + half_width],
                ]
            ]
        )
    return make_system(gens, np.asarray(pingpong), tolerance)


def perturbed_pair(lengths=(3.6, 4.4), offsets=(0.12, -0.1), **kw):
    """Fuchsian pair with shifted axes and lengths (generic second factor)."""
    base = fuchsian_pair(**kw)
    thetas = [(0.0, math.pi / 2), (math.pi / 4, 3 * math.pi / 4)]
    gens, pingpong = [], []
    for j, (att_t, rep_t) in enumerate(thetas):
        att = (att_t + offsets[j]) % HALF_TURN
        rep = (rep_t + offsets[j]) % HALF_TURN
        g = hyperbolic_with_axis(
            psl2.point_of_theta(att), psl2.point_of_theta(rep), lengths[j]
        )
        gens.append(g[None])
        hw = arc_width(tuple(base.pingpong[j, 0, 0])) / 2.0
        pingpong.append(
            [[[att - hw, att + hw], [rep - hw, rep + hw]]]
        )
    return make_system(gens, np.asarray(pingpong), base.tolerance)
