"""Timing comparison of the compiled kernels against the numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Both backends are bit-compatible; this script reports wall-time ratios on
workloads shaped like the acceptance suite (word-ball expansion, greedy
covering, walk statistics, displacement scans).
"""

import argparse
import time

import numpy as np

from horolab._kernels import _pure

try:
    from horolab._kernels import _speedups
except ImportError:
    _speedups = None


def _time(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_expand(repeat):
    rng = np.random.default_rng(0)
    frontier = np.ascontiguousarray(rng.standard_normal((30000, 2, 2, 2)))
    last = rng.integers(0, 4, 30000).astype(np.int32)
    gens = np.ascontiguousarray(rng.standard_normal((4, 2, 2, 2)))
    inv_of = np.array([2, 3, 0, 1], dtype=np.int32)
    return "expand_reduced_words (30k frontier)", (
        frontier, last, gens, inv_of), repeat


def bench_cover(repeat):
    rng = np.random.default_rng(1)
    n = 6000
    centers = np.ascontiguousarray(rng.uniform(0, 1, (n, 2)))
    radii = np.exp(rng.uniform(np.log(0.01), np.log(0.2), n))
    thr2 = np.ascontiguousarray(np.stack([radii**2, radii**4], axis=1))
    axis_start = np.array([0, 1, 2], dtype=np.int64)
    order = np.lexsort((centers[:, 1], centers[:, 0], -radii)).astype(
        np.int64)
    return "greedy_cover (6k balls)", (centers, thr2, axis_start, order), \
        repeat


def bench_walk(repeat):
    rng = np.random.default_rng(2)
    inc = np.ascontiguousarray(
        0.017 * rng.standard_normal((100000, 5)) + 0.2)
    vhat = np.full(5, 1.0 / np.sqrt(5.0))
    cks = np.unique(np.geomspace(8, 100000, 24).astype(np.int64))
    return "walk_stats (1e5 x 5 steps)", (inc, vhat, 1.0, 10000, cks), repeat


def bench_displacement(repeat):
    rng = np.random.default_rng(3)
    h = np.ascontiguousarray(rng.standard_normal((13120, 2, 2, 2)) * 5)
    v = np.array([1.0, 1.0])
    ts = np.linspace(0.0, 20.0, 400)
    return "displacement_grid (13k words x 400 times)", (h, v, ts), repeat


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _speedups is None:
        print("compiled kernels not available; nothing to compare")
        return
    benches = [bench_expand, bench_cover, bench_walk, bench_displacement]
    print(f"{'kernel':45s} {'native':>9s} {'python':>9s} {'speedup':>8s}")
    for bench in benches:
        name, call_args, repeat = bench(args.repeat)
        fn = name.split(" ")[0]
        t_nat, out_n = _time(getattr(_speedups, fn), *call_args,
                             repeat=repeat)
        t_pure, out_p = _time(getattr(_pure, fn), *call_args, repeat=repeat)
        first_n = out_n[0] if isinstance(out_n, tuple) else out_n
        first_p = out_p[0] if isinstance(out_p, tuple) else out_p
        match = np.array_equal(np.asarray(first_n), np.asarray(first_p))
        print(
            f"{name:45s} {t_nat*1e3:8.1f}ms {t_pure*1e3:8.1f}ms"
            f" {t_pure/t_nat:7.1f}x  bit-identical: {match}"
        )


if __name__ == "__main__":
    main()
