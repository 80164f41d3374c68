"""Time the numba kernels against their pure-numpy fallbacks.

The active backend is whatever the package imported with (numba unless
``BLOBPLOT_NO_NUMBA=1``); the numpy implementations are called directly so
both paths run in one process. Usage: ``python benchmarks/bench_kernels.py``.
"""

import time

import numpy as np

from blobplot import _kernels as K


def timeit(fn, *args, repeat=3):
    fn(*args)  # warm-up / JIT
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def fmt(seconds):
    return f"{seconds * 1e3:9.2f} ms"


def main():
    rng = np.random.default_rng(0)
    print(f"active backend: {'numba' if K.NUMBA_ENABLED else 'numpy'}")
    print(f"{'kernel':<34}{'active':>12}{'numpy':>12}{'speedup':>9}")

    rows = []

    for n in (2_000, 8_000):
        pts = rng.random((n, 2)) * 100
        groups = np.arange(n, dtype=np.int64)
        a = timeit(K.knn_grid2d, pts, 10)
        b = timeit(K._knn_grid2d_numpy, pts, 10, repeat=1)
        rows.append((f"knn_grid2d n={n} k=10", a, b))
        if n <= 2_000:
            a = timeit(lambda p: K.knn_brute(p, 10), pts)
            b = timeit(lambda p: K._knn_exclude_numpy(p, groups, 10), pts)
            rows.append((f"knn_brute n={n} k=10", a, b))

    hd = rng.normal(size=(2_000, 16))
    g3 = np.arange(2_000, dtype=np.int64)
    a = timeit(lambda p: K.knn_brute(p, 10), hd)
    b = timeit(lambda p: K._knn_exclude_numpy(p, g3, 10), hd)
    rows.append(("knn_brute n=2000 d=16 k=10", a, b))

    t = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    loop = 50 + 40 * np.column_stack([np.cos(t), np.sin(t)])
    probes = rng.random((50_000, 2)) * 100
    verts = np.ascontiguousarray(loop)
    offsets = np.array([0, len(loop)], dtype=np.int64)
    a = timeit(K.points_in_loops, probes, [loop])
    b = timeit(K._points_in_loops_numpy, probes, verts, offsets)
    rows.append(("points_in_loops 50k x 256 edges", a, b))

    subject = rng.random((400, 2)) * 100
    clip = np.array([[10.0, 10.0], [90.0, 10.0], [90.0, 90.0], [10.0, 90.0]])
    out = np.empty((4096, 2))
    a = timeit(K.clip_loop_convex, subject, clip)
    b = timeit(K._clip_loop_convex_numpy, subject, clip, out)
    rows.append(("clip_loop_convex 400-gon", a, b))

    sites = rng.random((60, 2)) * 100
    order = np.argsort(((sites[1:] - sites[0]) ** 2).sum(axis=1)).astype(np.int64)
    rect = np.array([[-10.0, -10.0], [110.0, -10.0], [110.0, 110.0],
                     [-10.0, 110.0]])
    cell_out = np.empty((256, 2))
    a = timeit(K.halfplane_cell, sites[0], sites[1:], order, rect)
    b = timeit(K._halfplane_cell_numpy, sites[0], sites[1:], order, rect,
               cell_out)
    rows.append(("halfplane_cell 60 sites", a, b))

    for name, a, b in rows:
        print(f"{name:<34}{fmt(a):>12}{fmt(b):>12}{b / a:>8.1f}x")


if __name__ == "__main__":
    main()
