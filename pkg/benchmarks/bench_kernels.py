#!/usr/bin/env python3
"""Time every kernel on both backends and check the outputs agree.

    python3 benchmarks/bench_kernels.py [--nodes N] [--edges M] [--repeat R]

The first numba call per kernel compiles (or loads the on-disk cache); that
warm-up is excluded from the timings.
"""
import argparse
import random
import string
import time

import numpy as np

from kgfuse import kernels


def workloads(n, m, seed):
    rng = np.random.default_rng(seed)
    src, dst = rng.integers(0, n, m), rng.integers(0, n, m)
    pyrng = random.Random(seed)
    words = ["".join(pyrng.choices(string.ascii_lowercase, k=pyrng.randint(3, 12))) for _ in range(400)]
    pairs = list(zip(words[::2], words[1::2]))
    matrix, query = rng.normal(size=(n, 64)), rng.normal(size=64)

    d, k, s = 32, 20, 20_000
    E0, R0 = rng.normal(scale=0.1, size=(n, d)), rng.normal(scale=0.1, size=(k, d))
    h, r, t = rng.integers(0, n, s), rng.integers(0, k, s), rng.integers(0, n, s)
    ne, ns = rng.integers(0, n, (s, 5)), rng.integers(0, 2, (s, 5))

    def sgd():
        E, R = E0.copy(), R0.copy()
        kernels.sgd_epoch("transe", E, R, h, r, t, ne, ns, 0.01)
        return E

    return {
        "pagerank": lambda: kernels.pagerank_scores(src, dst, n)[0],
        "hits": lambda: kernels.hits_scores(src, dst, n)[0],
        "components": lambda: kernels.connected_components(n, src[: m // 4], dst[: m // 4]),
        "levenshtein x200": lambda: np.array([kernels.levenshtein_distance(a, b) for a, b in pairs]),
        "cosine": lambda: kernels.cosine_scores(matrix, query),
        "sgd_epoch transe": sgd,
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=50_000)
    ap.add_argument("--edges", type=int, default=250_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    jobs = workloads(args.nodes, args.edges, args.seed)
    print(f"nodes {args.nodes}  edges {args.edges}  best of {args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'max |diff|':>12}")
    for name, fn in jobs.items():
        times, outs = {}, {}
        for b in backends:
            with kernels.using_backend(b):
                fn()  # warm-up
                times[b], outs[b] = best_of(fn, args.repeat)
        row = f"{name:<18}" + "".join(f"{times[b] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) == 2:
            diff = float(np.max(np.abs(np.asarray(outs["numpy"], float) - np.asarray(outs["numba"], float))))
            row += f"{times['numpy'] / times['numba']:>9.1f}x{diff:>12.2e}"
        print(row)


if __name__ == "__main__":
    main()
