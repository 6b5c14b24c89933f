"""Time the numba and numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Prints the best wall time per kernel and backend plus the speedup, and checks
that both backends return identical arrays.
"""

import argparse
import time

import numpy as np

from symsort import kernels
from symsort.sources import shipped_sources


def best_of(fn, repeat):
    out = fn()  # warm-up, and numba compile on first call
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(scale):
    src = shipped_sources()["markov_3"]
    reps, n, length = max(1, int(200 * scale)), 500, 64
    tab = src.symbol_table(length)
    seeds = np.concatenate([kernels.key_seeds(11, r, n) for r in range(reps)])
    offsets = np.arange(reps + 1, dtype=np.int64) * n
    rng = np.random.default_rng(5)
    perms = np.stack([rng.permutation(int(2000 * scale) or 1) for _ in range(100)])
    sym = kernels.symbol_matrix(seeds[:n * 4], length, tab)
    cps = np.arange(0, sym.shape[0] + 1, 100)
    return {
        f"symbol_matrix ({seeds.size} keys x {length})": lambda: kernels.symbol_matrix(seeds, length, tab),
        f"bst_batch ({reps} reps x {n} keys)": lambda: kernels.bst_batch(seeds, offsets, length, tab),
        f"trajectory ({sym.shape[0]} keys)": lambda: kernels.trajectory(sym, cps),
        f"key_comparisons (100 x {perms.shape[1]})": lambda: kernels.key_comparisons(perms),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplier on problem sizes")
    args = ap.parse_args()

    have = kernels.available_backends()
    if "numba" not in have:
        print("numba not installed; timing the numpy backend only")
    print(f"{'kernel':44s}" + "".join(f"{b:>12s}" for b in have) + ("     speedup" if len(have) > 1 else ""))
    for name, fn in cases(args.scale).items():
        times, outs = {}, {}
        for b in have:
            with kernels.use_backend(b):
                times[b], outs[b] = best_of(fn, args.repeat)
        row = f"{name:44s}" + "".join(f"{times[b] * 1e3:10.2f}ms" for b in have)
        if len(have) > 1:
            row += f"{times['numpy'] / times['numba']:11.1f}x"
            if not same(outs["numba"], outs["numpy"]):
                row += "  MISMATCH"
        print(row)


if __name__ == "__main__":
    main()
