"""Compare the compiled and numpy assembly of the collocation matrix.

Run with ``python benchmarks/bench_core.py [--repeat R] [--sizes 40,80,160,320]``.
Prints best-of-R wall time per backend, the speed-up, and the largest
relative entry difference between the two matrices.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nlop import dirichlet
from nlop.dirichlet import assemble_matrix, graded_nodes


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--sizes", default="40,80,160,320,640")
    p.add_argument("--s", type=float, default=0.5)
    args = p.parse_args(argv)
    if dirichlet._core_c is None:
        print("compiled core not built; only the numpy path is available")
        return 1
    print(f"{'N':>6} {'numpy [ms]':>12} {'cython [ms]':>12} {'speed-up':>9} {'max rel diff':>13}")
    for N in (int(v) for v in args.sizes.split(",")):
        x = graded_nodes(N)
        tp = best_time(lambda: assemble_matrix(x, args.s, backend="python"), args.repeat)
        tc = best_time(lambda: assemble_matrix(x, args.s, backend="cython"), args.repeat)
        A = assemble_matrix(x, args.s, backend="python")
        B = assemble_matrix(x, args.s, backend="cython")
        diff = float(np.max(np.abs(A - B)) / np.max(np.abs(A)))
        print(f"{N:>6} {1e3 * tp:>12.2f} {1e3 * tc:>12.2f} {tp / tc:>9.1f} {diff:>13.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
