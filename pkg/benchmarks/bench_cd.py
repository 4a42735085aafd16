"""Time the compiled and pure-Python coordinate-descent kernels on the same problems.

    python benchmarks/bench_cd.py [--sizes 100x200 300x600] [--repeat 3]
"""
import argparse
import time

import numpy as np

from knockamp import lasso_solver as ls
from knockamp.se_core import Prior


def make_problem(n, m, seed=0):
    rng = np.random.default_rng(seed)
    X = ls.generate_design(n, m, rng)
    beta = ls.sample_signal(Prior.two_point(0.1, 4.0), m, rng)
    return X.entries, ls.simulate_response(X, beta, 1.0, rng)


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", default=["100x200", "250x500", "500x1000"])
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = sorted(ls._KERNELS)
    print(f"backends available: {', '.join(backends)}")
    print(f"{'size':>10} {'backend':>8} {'seconds':>10} {'sweeps':>7} {'speedup':>8}")
    for spec in args.sizes:
        n, m = (int(v) for v in spec.split("x"))
        X, Y = make_problem(n, m)
        res = {}
        for b in backends:
            res[b] = best_time(lambda: ls.lasso_solve(X, Y, args.lam, backend=b), args.repeat)
        base = res["python"][0]
        for b in backends:
            secs, fit = res[b]
            print(f"{spec:>10} {b:>8} {secs:10.4f} {fit.sweeps:7d} {base / secs:8.1f}x")
        if len(backends) > 1:
            diff = np.abs(res["cython"][1].coefficients - res["python"][1].coefficients).max()
            print(f"{'':>10} max |coef difference| = {diff:.2e}")


if __name__ == "__main__":
    main()
