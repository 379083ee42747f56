"""Timing comparison of the compiled kernels against the pure-Python fallback.

Run as:  python benchmarks/bench_kernels.py --n 200000 --d 6 --repeat 20
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from negsamp import _kernels_py

try:
    from negsamp import _core
except ImportError:
    _core = None


def time_call(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200_000)
    parser.add_argument("--d", type=int, default=6)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.n, args.d))
    y = (rng.random(args.n) < 0.3).astype(np.float64)
    g = rng.standard_normal(args.n) * 8.0
    w = rng.uniform(0.5, 2.0, args.n)
    l = rng.standard_normal(args.n)
    beta = rng.standard_normal(args.d)

    cases = [
        ("sigmoid", lambda k: (k.sigmoid, (g,))),
        ("log1pexp", lambda k: (k.log1pexp, (g,))),
        ("obj_grad_hess", lambda k: (k.logistic_obj_grad_hess, (x, y, 0.1, beta, w, l))),
        ("weighted_gram", lambda k: (k.weighted_gram, (x, w))),
    ]

    print(f"n={args.n} d={args.d} repeat={args.repeat} (best of, seconds)")
    header = f"{'kernel':<16}{'python':>12}"
    if _core is not None:
        header += f"{'c':>12}{'speedup':>10}"
    print(header)
    for name, pick in cases:
        fn, fnargs = pick(_kernels_py)
        t_py = time_call(fn, fnargs, args.repeat)
        line = f"{name:<16}{t_py:>12.6f}"
        if _core is not None:
            fn_c, cargs = pick(_core)
            t_c = time_call(fn_c, cargs, args.repeat)
            line += f"{t_c:>12.6f}{t_py / t_c:>10.2f}x"
        print(line)
    if _core is None:
        print("compiled backend not built; showing the fallback only")


if __name__ == "__main__":
    main()
