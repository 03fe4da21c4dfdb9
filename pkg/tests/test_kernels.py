"""Bit-compatibility of the compiled kernels with the pure-numpy twins."""

import numpy as np
import pytest

from horolab import _kernels
from horolab._kernels import _pure

try:
    from horolab._kernels import _speedups
except ImportError:
    _speedups = None

needs_native = pytest.mark.skipif(
    _speedups is None, reason="compiled kernels not built"
)


def make_word_inputs(seed=0):
    rng = np.random.default_rng(seed)
    frontier = rng.standard_normal((7, 2, 2, 2))
    last = np.array([-1, 0, 1, 2, 3, 0, 2], dtype=np.int32)
    gens = rng.standard_normal((4, 2, 2, 2))
    inv_of = np.array([2, 3, 0, 1], dtype=np.int32)
    return (
        np.ascontiguousarray(frontier),
        last,
        np.ascontiguousarray(gens),
        inv_of,
    )


def make_cover_inputs(seed=1, n=60):
    rng = np.random.default_rng(seed)
    centers = np.ascontiguousarray(rng.uniform(0, 1, (n, 2)))
    radii = np.exp(rng.uniform(np.log(0.05), np.log(0.4), n))
    thr2 = np.ascontiguousarray(
        np.stack([radii ** 2.0, radii ** 4.0], axis=1)
    )
    axis_start = np.array([0, 1, 2], dtype=np.int64)
    order = np.lexsort((centers[:, 1], centers[:, 0], -radii)).astype(
        np.int64
    )
    return centers, thr2, axis_start, order


@needs_native
def test_expand_words_parity():
    args = make_word_inputs()
    out_n = _speedups.expand_reduced_words(*args)
    out_p = _pure.expand_reduced_words(*args)
    for a, b in zip(out_n, out_p):
        assert a.dtype == b.dtype or a.dtype.kind == b.dtype.kind
        assert np.array_equal(a, b)


@needs_native
def test_greedy_cover_parity():
    centers, thr2, axis_start, order = make_cover_inputs()
    sel_n = _speedups.greedy_cover(centers, thr2, axis_start, order)
    sel_p = _pure.greedy_cover(centers, thr2, axis_start, order)
    assert np.array_equal(sel_n, sel_p)
    cnt_n = _speedups.containment_counts(centers, centers, thr2, axis_start)
    cnt_p = _pure.containment_counts(centers, centers, thr2, axis_start)
    assert np.array_equal(cnt_n, cnt_p)


@needs_native
def test_walk_stats_parity():
    rng = np.random.default_rng(2)
    inc = np.ascontiguousarray(0.3 * rng.standard_normal((5000, 3)) + 0.1)
    vhat = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
    cks = np.unique(np.geomspace(8, 5000, 12).astype(np.int64))
    out_n = _speedups.walk_stats(inc, vhat, 1.0, 500, cks)
    out_p = _pure.walk_stats(inc, vhat, 1.0, 500, cks)
    assert out_n[0] == out_p[0]
    assert out_n[1] == out_p[1]
    assert np.array_equal(out_n[2], out_p[2])


@needs_native
@pytest.mark.parametrize("n_words,n_times", [(40, 33), (5000, 200)])
def test_displacement_grid_parity(n_words, n_times):
    rng = np.random.default_rng(3)
    h = np.ascontiguousarray(rng.standard_normal((n_words, 2, 2, 2)) * 3.0)
    v = np.array([1.0, 2.0])
    ts = np.linspace(0.0, 5.0, n_times)
    out_n = _speedups.displacement_grid(h, v, ts)
    out_p = _pure.displacement_grid(h, v, ts)
    assert np.array_equal(out_n, out_p)


def test_greedy_cover_semantics_against_bruteforce():
    centers, thr2, axis_start, order = make_cover_inputs(seed=4, n=30)
    sel = _kernels.greedy_cover(centers, thr2, axis_start, order)

    def inside(p, j):
        return (
            (p[0] - centers[j, 0]) ** 2 < thr2[j, 0]
            and (p[1] - centers[j, 1]) ** 2 < thr2[j, 1]
        )

    # Brute-force replay of the greedy rule.
    covered = [False] * 30
    expected = []
    for idx in order:
        if covered[idx]:
            continue
        expected.append(idx)
        for q in range(30):
            if not covered[q] and inside(centers[q], idx):
                covered[q] = True
    assert list(sel) == expected


def test_backend_is_reported():
    assert _kernels.BACKEND in ("native", "python")
