#!/usr/bin/env python3
"""
Compare the numba-compiled kernels against the interpreted numpy fallback.

Loads a second, interpreted copy of treespace._kernels with
TREESPACE_BACKEND=numpy and times both on the two hot paths: batched
geodesic distances and the split proximal-point loop.

Run:  python3 benchmarks/bench_backends.py [--pairs 2000] [--steps 20000]
"""

import argparse
import importlib.util
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import treespace._kernels as fast_kernels  # noqa: E402
from treespace import Split, Tree  # noqa: E402
from treespace.splits import universe  # noqa: E402


def load_numpy_kernels():
    spec = importlib.util.spec_from_file_location(
        "treespace._kernels_interp", fast_kernels.__file__
    )
    module = importlib.util.module_from_spec(spec)
    old = os.environ.get("TREESPACE_BACKEND")
    os.environ["TREESPACE_BACKEND"] = "numpy"
    try:
        spec.loader.exec_module(module)
    finally:
        if old is None:
            os.environ.pop("TREESPACE_BACKEND", None)
        else:
            os.environ["TREESPACE_BACKEND"] = old
    return module


def random_tree(rng, r):
    far = []

    def rec(lab):
        if len(lab) < 2:
            return
        perm = rng.permutation(len(lab))
        cut = int(rng.integers(1, len(lab)))
        left = [lab[int(i)] for i in perm[:cut]]
        right = [lab[int(i)] for i in perm[cut:]]
        for side in (left, right):
            if len(side) >= 2:
                far.append(frozenset(side))
                rec(side)

    rec(list(range(1, r + 1)))
    interior = {Split(f, r + 1): float(rng.uniform(0.2, 2.0)) for f in far}
    return Tree(interior, rng.uniform(0.5, 1.5, r + 1))


def bench_distances(kernels, pairs, label):
    t0 = time.perf_counter()
    total = 0.0
    for compat, xa in pairs:
        total += kernels.pair_distance(compat, *xa)
    dt = time.perf_counter() - t0
    print(f"{label:>8}: {dt:8.3f} s  ({dt / len(pairs) * 1e6:8.1f} us/pair)   checksum {total:.6f}")
    return dt


def bench_sturm(kernels, args_pack, steps, label):
    t0 = time.perf_counter()
    ids, lens, pend, done = kernels.sturm_loop(*args_pack)
    dt = time.perf_counter() - t0
    print(f"{label:>8}: {dt:8.3f} s  ({dt / done * 1e6:8.1f} us/step)   steps {done}")
    return dt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--r", type=int, default=6)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    r = args.r
    uni = universe(r + 1)

    pair_data = []
    for _ in range(args.pairs):
        x, t = random_tree(rng, r), random_tree(rng, r)
        x_ids, x_len, x_pend = x._rep
        t_ids, t_len, t_pend = t._rep
        pair_data.append((uni.compat, (x_ids, x_len, x_pend, t_ids, t_len, t_pend)))

    data = [random_tree(rng, r) for _ in range(6)]
    reps = [t._rep for t in data]
    max_e = max(rr[0].shape[0] for rr in reps)
    n = len(data)
    data_ids = np.zeros((n, max_e), dtype=np.int64)
    data_len = np.zeros((n, max_e), dtype=np.float64)
    data_ne = np.zeros(n, dtype=np.int64)
    data_pend = np.zeros((n, r + 1), dtype=np.float64)
    for i, (ids, lens, pend) in enumerate(reps):
        data_ne[i] = len(ids)
        data_ids[i, : len(ids)] = ids
        data_len[i, : len(lens)] = lens
        data_pend[i] = pend
    x_ids, x_len, x_pend = data[0]._rep
    order = np.arange(args.steps, dtype=np.int64) % n
    tsteps = 1.0 / (np.arange(1, args.steps + 1, dtype=np.float64) + 1.0)
    sturm_pack = (
        uni.compat, data_ids, data_ne, data_len, data_pend,
        x_ids, x_len, x_pend, order, tsteps, 0.0, 10**9,
    )

    slow = load_numpy_kernels()
    print(f"backend of installed package: {fast_kernels.BACKEND}")
    if fast_kernels.BACKEND != "numba":
        print("numba unavailable or disabled; both runs are interpreted")

    print(f"\ngeodesic distance, {args.pairs} random pairs (r = {r}):")
    if fast_kernels.BACKEND == "numba":
        fast_kernels.pair_distance(*pair_data[0][0:1], *pair_data[0][1])  # compile
    t_fast = bench_distances(fast_kernels, pair_data, fast_kernels.BACKEND)
    t_slow = bench_distances(slow, pair_data, "numpy")
    print(f"{'speedup':>8}: {t_slow / t_fast:8.1f}x")

    print(f"\nproximal-point loop, {args.steps} steps (n = {n}, r = {r}):")
    t_fast = bench_sturm(fast_kernels, sturm_pack, args.steps, fast_kernels.BACKEND)
    t_slow = bench_sturm(slow, sturm_pack, args.steps, "numpy")
    print(f"{'speedup':>8}: {t_slow / t_fast:8.1f}x")


if __name__ == "__main__":
    main()
