"""Compare the compiled core against the numpy fallback.

Times the two hot kernels (brute-force kNN rows and Chebyshev filtering) on
random data and checks that both backends return identical results.

    python3 benchmarks/bench_backends.py [--sizes 1000 4000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from gembed import _backend, graph, spectral


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_knn(n, dim, k, repeat):
    X = np.random.default_rng(0).standard_normal((n, dim))
    rows = {}
    for name, mod in _backend.BACKENDS.items():
        def run(mod=mod):
            idx = np.empty((n, k), dtype=np.intp)
            d2 = np.empty((n, k))
            mod.knn_rows(X, k, 0, n, idx, d2)
            return idx, d2
        rows[name] = best_of(run, repeat)
    return rows


def bench_filter(n, order, cols, repeat):
    L = graph.laplacian(graph.build_knn_graph(np.random.default_rng(1).standard_normal((n, 3)), 10))
    f = spectral.make_filter(L, spectral.HeatKernel(1.0), order)
    X = np.random.default_rng(2).standard_normal((n, cols))
    return {name: best_of(lambda name=name: spectral.filter_signal(L, f, X, backend=name), repeat)
            for name in _backend.BACKENDS}


def report(label, rows):
    base = rows["python"][0]
    names = sorted(rows)
    ref = rows["python"][1]
    for name in names:
        t, out = rows[name]
        same = all(np.array_equal(a, b) for a, b in zip(
            out if isinstance(out, tuple) else (out,), ref if isinstance(ref, tuple) else (ref,)))
        print(f"{label:<28} {name:<7} {t * 1e3:10.2f} ms   x{base / t:6.2f}   identical={same}")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[1000, 4000])
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--order", type=int, default=30)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    print(f"active backend: {_backend.NAME}; available: {', '.join(sorted(_backend.BACKENDS))}")
    if "cython" not in _backend.BACKENDS:
        print("compiled core not built; only the fallback is timed")
    for n in args.sizes:
        report(f"knn N={n} d={args.dim} k={args.k}", bench_knn(n, args.dim, args.k, args.repeat))
        report(f"filter N={n} m={args.order} b={args.cols}",
               bench_filter(n, args.order, args.cols, args.repeat))


if __name__ == "__main__":
    main()
