"""Compare the compiled and numpy kernels.

    python3 benchmarks/bench_kernels.py [--n 16] [--runs 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from subgrad import kernels
from subgrad.data import random_cut_weights


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--runs", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    W = random_cut_weights(args.n, rng)
    order = rng.permutation(args.n)
    U = rng.random((args.runs, args.n))
    impls = {"python": kernels.python_impl, "cython": kernels.compiled_impl}
    print(f"backend in use: {kernels.BACKEND}")
    print(f"{'kernel':<28}{'impl':<10}{'seconds':>10}")
    results = {}
    for name, mod in impls.items():
        if mod is None:
            print(f"{'(all)':<28}{name:<10}{'unavailable':>10}")
            continue
        t, vals = best_of(lambda: mod.cut_values_all(W), args.repeat)
        results[("cut_values_all", name)] = vals
        print(f"{'cut_values_all n=' + str(args.n):<28}{name:<10}{t:>10.4f}")
        t, X = best_of(lambda: mod.dgreedy_sample_cut(W, order, kernels.SOFTPLUS_RATIO, 0.1, U), args.repeat)
        results[("sample", name)] = X
        print(f"{'dgreedy_sample_cut r=' + str(args.runs):<28}{name:<10}{t:>10.4f}")
    if impls["cython"] is not None:
        dv = np.abs(results[("cut_values_all", "python")] - results[("cut_values_all", "cython")]).max()
        same = np.array_equal(results[("sample", "python")], results[("sample", "cython")])
        print(f"max |cut table difference| = {dv:.3g}; identical samples: {same}")


if __name__ == "__main__":
    main()
