"""Pure-numpy implementations of the hot kernels.

Each function here is the reference twin of a Cython routine in
``_speedups.pyx``; the two backends must produce bit-identical output, so
arithmetic is written with the same operation order (and the extension is
compiled with FP contraction off).
"""

import math

import numpy as np

BACKEND = "python"


def expand_reduced_words(frontier, last, gens, inv_of):
    """One level of reduced-word expansion.

    frontier: (m, F, 2, 2) products of the current words, last: (m,) index
    of their final letter (-1 for the empty word), gens: (G, F, 2, 2) letter
    matrices, inv_of: (G,) index of each letter's inverse.  Returns
    (products, last letter, parent index) for all one-letter extensions that
    stay reduced, ordered frontier-major then letter-minor.
    """
    m = frontier.shape[0]
    g_count = gens.shape[0]
    keep = last[:, None] != inv_of[None, :]  # (m, G)
    parent = np.repeat(np.arange(m, dtype=np.int64), g_count)[keep.ravel()]
    letter = np.tile(np.arange(g_count, dtype=np.int32), m)[keep.ravel()]
    a = frontier[parent]
    b = gens[letter]
    out = np.empty_like(a)
    a00, a01 = a[..., 0, 0], a[..., 0, 1]
    a10, a11 = a[..., 1, 0], a[..., 1, 1]
    b00, b01 = b[..., 0, 0], b[..., 0, 1]
    b10, b11 = b[..., 1, 0], b[..., 1, 1]
    out[..., 0, 0] = a00 * b00 + a01 * b10
    out[..., 0, 1] = a00 * b01 + a01 * b11
    out[..., 1, 0] = a10 * b00 + a11 * b10
    out[..., 1, 1] = a10 * b01 + a11 * b11
    return out, letter, parent


def _inside(points, center, thr2, axis_start):
    """Mask of points inside the product ball (center, thr2)."""
    n_factors = thr2.shape[0]
    mask = np.ones(points.shape[0], dtype=bool)
    for f in range(n_factors):
        lo, hi = axis_start[f], axis_start[f + 1]
        # Sequential accumulation keeps bit parity with the C loop.
        dist2 = np.zeros(points.shape[0])
        for ax in range(lo, hi):
            diff = points[:, ax] - center[ax]
            dist2 += diff * diff
        mask &= dist2 < thr2[f]
    return mask


def greedy_cover(centers, thr2, axis_start, order):
    """Greedy Besicovitch selection: walk `order`, keep balls whose center
    is not yet covered, mark everything the kept ball covers."""
    n = centers.shape[0]
    covered = np.zeros(n, dtype=bool)
    selected = []
    for idx in order:
        if covered[idx]:
            continue
        selected.append(idx)
        covered |= _inside(centers, centers[idx], thr2[idx], axis_start)
    return np.asarray(selected, dtype=np.int64)


def containment_counts(points, centers, thr2, axis_start):
    """For each point, the number of balls that contain it."""
    counts = np.zeros(points.shape[0], dtype=np.int64)
    for j in range(centers.shape[0]):
        counts += _inside(points, centers[j], thr2[j], axis_start)
    return counts


def walk_stats(inc, vhat, rho, burn, checkpoints):
    """Transverse statistics of one random-walk trial.

    inc: (n, r) increments, vhat: (r,) unit direction, burn: steps excluded
    from return counting (n > burn counts), checkpoints: sorted 1-based step
    indices at which the running max of |q_n| is recorded.  Returns
    (return_count, min_late_distance, running_max_at_checkpoints).
    """
    u = np.cumsum(inc, axis=0)
    r = inc.shape[1]
    proj = np.zeros(u.shape[0])
    for j in range(r):  # sequential for bit parity with the C loop
        proj += u[:, j] * vhat[j]
    q = u - proj[:, None] * vhat[None, :]
    qn2 = np.zeros(u.shape[0])
    for j in range(r):
        qn2 += q[:, j] * q[:, j]
    qn = np.sqrt(qn2)
    late = qn[burn:]
    count = int(np.count_nonzero(late <= rho))
    min_late = float(late.min()) if late.size else float("inf")
    running = np.maximum.accumulate(qn)
    maxes = running[np.asarray(checkpoints, dtype=np.int64) - 1]
    return count, min_late, maxes


def displacement_grid(h, v, ts):
    """Minimum PSL-distance to the identity of chamber-conjugated words.

    h: (w, F, 2, 2) conjugated word matrices, v: (F,) chamber vector,
    ts: (T,) times.  Entry (i, j) of a_{-tv} h a_{tv} is h_ij scaled by
    e^{-tv} (top right) / e^{tv} (bottom left); the PSL distance takes the
    smaller of the distances to +I and -I in max-entry norm.
    """
    h00, h01 = h[:, :, 0, 0], h[:, :, 0, 1]
    h10, h11 = h[:, :, 1, 0], h[:, :, 1, 1]
    out = np.empty(len(ts))
    n_factors = h.shape[1]
    for k, t in enumerate(ts):
        # libm exp (not numpy's vector exp): keeps 1-ulp parity with the
        # compiled kernel.
        e = np.array([math.exp(t * v[f]) for f in range(n_factors)])
        off = np.maximum(np.abs(h01 / e), np.abs(h10 * e))
        dp = np.maximum(np.abs(h00 - 1.0), np.abs(h11 - 1.0))
        dm = np.maximum(np.abs(h00 + 1.0), np.abs(h11 + 1.0))
        d = np.maximum(np.minimum(dp, dm), off)
        out[k] = d.max(axis=1).min()
    return out
