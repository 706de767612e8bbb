"""Compare the compiled and numpy backends on the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--sizes 400 1600] [--repeat 3]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from kernel_lsq import _backend
from kernel_lsq.geometry import candidate_grid, fibonacci_lattice
from kernel_lsq.kernels import SurfaceSplineKernel, sobolev_kernel


def cases(n: int):
    X = fibonacci_lattice(n)
    Y = candidate_grid(8 * n)
    kernel = sobolev_kernel(4.0)
    spline = SurfaceSplineKernel(2)
    t = np.linspace(-1.0, 1.0, 200)
    kernel.table  # build outside the timed region
    return {
        f"zonal table  {8 * n}x{n}": lambda: kernel.matrix(Y, X),
        f"spline log   {8 * n}x{n}": lambda: spline.matrix(Y, X),
        f"clenshaw L={kernel.truncation_degree} x200": lambda: kernel(t),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[400, 1600])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':34s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for n in args.sizes:
        for name, fn in cases(n).items():
            times = {}
            results = {}
            for b in backends:
                _backend.use(b)
                results[b] = np.asarray(fn())
                times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            if len(backends) > 1:
                diff = np.abs(results["compiled"] - results["python"]).max()
                assert diff < 1e-12, f"{name}: backends disagree by {diff:.2e}"
            speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
            print(f"{name:34s}" + "".join(f"{times[b]:11.4f}s" for b in backends) + f"{speed:9.1f}x")
    _backend.use("compiled" if "compiled" in backends else "python")


if __name__ == "__main__":
    main()
