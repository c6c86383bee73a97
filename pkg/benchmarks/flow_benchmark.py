"""Benchmark the fused flow kernels: numba against the numpy fallback.

Runs the descent flow on (P^1)^d for a few sizes and energies, reporting
accepted steps per second for each backend plus a trajectory-parity check.
The numba path needs the optional dependency (``pip install
momentflow[accel]``); without it the script reports the numpy path only.

Usage::

    python benchmarks/flow_benchmark.py [--t-max 20] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import momentflow as mfw
from momentflow import _kernels


def run_case(d: int, fname: str, t_max: float, backend: str, z0):
    space = mfw.ProjectivePower(d)
    f = mfw.function_from_name(fname)
    start = time.perf_counter()
    trace = mfw.gradient_flow(space, f, z0, tol=0.0, t_max=t_max,
                              backend=backend)
    elapsed = time.perf_counter() - start
    steps = trace.stats["accepted"] + trace.stats["rejected"]
    return trace, steps, elapsed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-max", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--dims", type=int, nargs="+", default=[3, 8])
    args = ap.parse_args()

    backends = ["numpy"]
    if _kernels.numba_available():
        backends.append("numba")
    else:
        print("numba not installed; benchmarking the numpy path only\n")

    rng = np.random.default_rng(2024)
    print(f"{'case':<28} {'backend':<8} {'steps':>7} {'time[s]':>9} "
          f"{'steps/s':>10}")
    for d in args.dims:
        z0 = mfw.ProjectivePower(d).random_point(rng)
        for fname in ("quadratic", "spectral:cosh"):
            traces = {}
            for backend in backends:
                # warm-up run compiles the numba kernels
                run_case(d, fname, min(1.0, args.t_max), backend, z0)
                best = None
                for _ in range(args.repeat):
                    trace, steps, elapsed = run_case(d, fname, args.t_max,
                                                     backend, z0)
                    rate = steps / elapsed
                    if best is None or rate > best[2]:
                        best = (steps, elapsed, rate)
                traces[backend] = trace
                steps, elapsed, rate = best
                print(f"(P^1)^{d} {fname:<18} {backend:<8} {steps:>7} "
                      f"{elapsed:>9.3f} {rate:>10.0f}")
            if len(traces) == 2:
                a = traces["numpy"].arrays()
                b = traces["numba"].arrays()
                n = min(len(a["t"]), len(b["t"]))
                dev = float(np.max(np.abs(a["energy"][:n] - b["energy"][:n])))
                print(f"{'':28} parity |energy| diff <= {dev:.3e}")
    print("\nNote: per-backend runs are deterministic; the two backends "
          "agree to integrator tolerance, not bitwise.")


if __name__ == "__main__":
    main()
