"""Compare the compiled and pure-Python decomposition kernels.

Generates doubly stochastic matrices as convex combinations of random
permutations, decomposes each with both backends, checks they produce
identical output, and reports throughput.

Run: python benchmarks/kernel_benchmark.py [--sizes 50,100,150] [--repeats 5]
"""

import argparse
import time

import numpy as np

from calibrank.kernels import available_backends


def random_doubly_stochastic(rng, m, num_perms):
    thetas = rng.dirichlet(np.ones(num_perms))
    matrix = np.zeros((m, m))
    for theta in thetas:
        matrix[rng.permutation(m), np.arange(m)] += theta
    return matrix


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="50,100,150,200")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--perms", type=int, default=40, help="permutations mixed per matrix")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = available_backends()
    if "cython" not in backends:
        print("compiled kernel not built; timing the pure-Python backend only")
    rng = np.random.default_rng(args.seed)
    sizes = [int(s) for s in args.sizes.split(",")]

    print(f"{'m':>6}" + "".join(f"{name + ' (ms)':>16}" for name in backends) + f"{'speedup':>10}")
    for m in sizes:
        matrices = [random_doubly_stochastic(rng, m, args.perms) for _ in range(args.repeats)]
        times = {}
        outputs = {}
        for name, module in backends.items():
            start = time.perf_counter()
            outputs[name] = [module.bvn_extract(matrix, 1e-9) for matrix in matrices]
            times[name] = (time.perf_counter() - start) * 1e3 / args.repeats
        if len(backends) == 2:
            for (t1, p1), (t2, p2) in zip(outputs["cython"], outputs["python"]):
                assert np.array_equal(p1, p2) and np.allclose(t1, t2, atol=0), "backends diverged"
            speedup = f"{times['python'] / times['cython']:9.1f}x"
        else:
            speedup = f"{'n/a':>10}"
        print(f"{m:>6}" + "".join(f"{times[name]:>16.2f}" for name in backends) + speedup)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
