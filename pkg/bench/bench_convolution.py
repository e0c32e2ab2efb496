"""Compare the compiled and numpy sparse convolution kernels.

Usage: python3 bench/bench_convolution.py [--repeat 5] [--sizes 50 200 800 2000]
"""
import argparse
import time

import numpy as np

from convexflow import kernels
from convexflow.spectral import NCOMP, SpectralField, _plan, _split_plan, _ZERO_KEY


def random_field(rng, K, rank, nmodes):
    modes = rng.integers(-K, K + 1, size=(nmodes, 3))
    c = rng.standard_normal((nmodes, NCOMP[rank])) + 1j * rng.standard_normal(
        (nmodes, NCOMP[rank]))
    return SpectralField.from_modes(np.vstack([modes, -modes]), np.vstack([c, c.conj()]), rank)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800, 2000])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        raise SystemExit("compiled extension not available; build with pip install -e .")
    rng = np.random.default_rng(args.seed)
    print(f"{'modes':>7} {'kind':>6} {'python [ms]':>12} {'cython [ms]':>12} {'speedup':>8}"
          f" {'max diff':>9}")
    for m in args.sizes:
        for kind, ra in (("scalar", "scalar"), ("dot", "vector")):
            f = random_field(rng, 16, ra, m)
            g = random_field(rng, 16, "vector", m)
            rows, _ = _plan(kind, f, g)[:2]
            plan, weight = _split_plan(rows)
            nout = 3 if kind == "scalar" else 1
            argv = (f.keys, f.coeffs, g.keys, g.coeffs, plan, weight, nout, _ZERO_KEY,
                    f.nmodes * g.nmodes)
            outs = {}

            def go(b):
                outs[b] = kernels.sparse_convolve(*argv, backend=b)

            tp = best_of(lambda: go("python"), args.repeat)
            tc = best_of(lambda: go("cython"), args.repeat)
            diff = float(np.abs(outs["python"][1] - outs["cython"][1]).max())
            print(f"{f.nmodes:>7} {kind:>6} {1e3 * tp:>12.2f} {1e3 * tc:>12.2f} "
                  f"{tp / tc:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
