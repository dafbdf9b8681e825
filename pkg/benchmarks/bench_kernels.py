"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel and batch size with the best-of-N wall time of
each backend, the speedup and the max absolute difference of the outputs.
"""

import argparse
import timeit

import numpy as np

from shadowlab import _backend
from shadowlab.hamflow import PolyHamiltonian

H = PolyHamiltonian.parse(2, "p1**2*q2 + q1**2*p2 + 0.3*p1*q1*q2 + 0.5*p2**2 + 0.1*q1**4")


def cases(batch):
    x = np.random.default_rng(0).uniform(-1, 1, (batch, 4))
    Y = np.broadcast_to(np.eye(4), (batch, 4, 4)).copy()
    args = (H.exps, H.coeffs, H.term, H.weights)
    return {
        "poly_grad": lambda k: k.poly_grad(H.exps, H.coeffs, x),
        "poly_grad_hess": lambda k: k.poly_grad_hess(H.exps, H.coeffs, x)[1],
        "flow (x only)": lambda k: k.midpoint_flow(*args, x, None, 0.0, 0.01, 10, 4, 1e-13, 100, 1e6)[0],
        "flow (x, Jacobian)": lambda k: k.midpoint_flow(*args, x, Y, 0.0, 0.01, 10, 4, 1e-13, 100, 1e6)[1],
    }


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batches", type=int, nargs="+", default=[1, 64, 4096])
    args = ap.parse_args(argv)
    if "cython" not in _backend.available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    fast, slow = _backend.get("cython"), _backend.get("python")
    print(f"{'kernel':<20} {'batch':>6} {'cython [ms]':>12} {'python [ms]':>12} {'speedup':>8} {'max diff':>9}")
    for batch in args.batches:
        for name, fn in cases(batch).items():
            tc = min(timeit.repeat(lambda: fn(fast), number=1, repeat=args.repeat))
            tp = min(timeit.repeat(lambda: fn(slow), number=1, repeat=args.repeat))
            diff = float(np.max(np.abs(np.asarray(fn(fast)) - np.asarray(fn(slow)))))
            print(f"{name:<20} {batch:>6} {1e3 * tc:>12.3f} {1e3 * tp:>12.3f} {tp / tc:>8.1f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
