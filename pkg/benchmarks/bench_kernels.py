#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Covers the hot paths: Heisenberg group primitives (the inner loop of
every dilation composition), generic truncated-BCH products, and the
branch-and-bound correspondence search behind the exact GH distance.
"""
import argparse
import time

import numpy as np

from dilstruct import _pykernels

try:
    from dilstruct import _ckernels
except ImportError:
    _ckernels = None

from dilstruct.spaces.carnot import engel


def timeit(fn, repeat):
    t0 = time.perf_counter()
    fn(repeat)
    return time.perf_counter() - t0


def bench_heis(mod, repeat):
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 3))

    def run(n):
        x = a
        for _ in range(n):
            x = mod.heis_mul(x, b)
            x = mod.heis_dil(0.5, x)
            x = mod.heis_inv(x)
        return x

    return timeit(run, repeat)


def bench_carnot(mod, repeat):
    g = engel()
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 4))
    deg = g.deg.astype(np.int64)

    def run(n):
        x = a
        for _ in range(n):
            x = mod.carnot_mul(x, b, g.bracket, g.step)
            x = mod.carnot_dil(0.7, x, deg)
        return x

    return timeit(run, repeat)


def bench_gh(mod, repeat):
    rng = np.random.default_rng(0)
    instances = []
    for _ in range(16):
        px = rng.uniform(0, 1, (3, 2))
        py = rng.uniform(0, 1, (4, 2))
        dx = np.linalg.norm(px[:, None] - px[None], axis=-1)
        dy = np.linalg.norm(py[:, None] - py[None], axis=-1)
        instances.append((dx, dy))

    def run(n):
        for _ in range(n):
            for dx, dy in instances:
                mod.gh_search(dx, dy, np.inf)

    return timeit(run, repeat)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=20000)
    args = parser.parse_args()

    benches = [
        ("heisenberg primitives", bench_heis, args.repeat),
        ("engel BCH product", bench_carnot, args.repeat),
        ("gh correspondence search", bench_gh, max(1, args.repeat // 1000)),
    ]
    print(f"{'kernel':<28} {'python':>10} {'compiled':>10} {'speedup':>9}")
    for name, bench, repeat in benches:
        t_py = bench(_pykernels, repeat)
        if _ckernels is None:
            print(f"{name:<28} {t_py:>9.3f}s {'n/a':>10} {'n/a':>9}")
            continue
        t_c = bench(_ckernels, repeat)
        print(f"{name:<28} {t_py:>9.3f}s {t_c:>9.3f}s {t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
