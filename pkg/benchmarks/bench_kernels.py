#!/usr/bin/env python3
"""Time the numba and numpy statevector kernels against each other.

    python3 benchmarks/bench_kernels.py [--qubits 8 10 12] [--depth 5]

Checks that the two backends agree, then reports the median time of one
expectation evaluation (the optimiser's unit of work) for each size.
"""

import argparse
import time

import numpy as np

from qaoaml import kernels
from qaoaml.graphs import cut_table, erdos_renyi


def median_time(fn, repeats, inner):
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        samples.append((time.perf_counter() - t0) / inner)
    return float(np.median(samples))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--qubits", type=int, nargs="+", default=[4, 8, 10, 12, 14])
    ap.add_argument("--depth", type=int, default=5)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    names = ["numpy"] + (["numba"] if kernels.NUMBA_AVAILABLE else [])
    backends = {name: kernels.get_backend(name) for name in names}
    print(f"numba available: {kernels.NUMBA_AVAILABLE}; default backend: {kernels.backend.name}")
    rng = np.random.default_rng(0)

    print(f"{'n':>3} {'p':>2} " + " ".join(f"{n + ' [us]':>12}" for n in names) + "  speedup   max|diff|")
    for n in args.qubits:
        cut = cut_table(erdos_renyi(n, 0.5, n)).values
        gam = rng.uniform(0, 2 * np.pi, args.depth)
        bet = rng.uniform(0, np.pi, args.depth)
        vals = {name: b.expectation(cut, gam, bet) for name, b in backends.items()}  # also JIT warm-up
        diff = max(abs(v - vals["numpy"]) for v in vals.values())
        inner = max(1, 20_000 >> n)
        times = {name: median_time(lambda b=b: b.expectation(cut, gam, bet), args.repeats, inner)
                 for name, b in backends.items()}
        speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{n:>3} {args.depth:>2} " + " ".join(f"{1e6 * times[k]:12.1f}" for k in names)
              + f"  {speed:7.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
