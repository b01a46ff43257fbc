"""Compare the numba kernels against the pure-numpy fallback.

The fallback is selected by the SWSOS_NO_NUMBA=1 environment flag, which
must be set before swsos is imported; this script therefore re-executes
itself in a subprocess for the fallback half.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
"""

import json
import os
import subprocess
import sys
import time

import numpy as np

REPEATS = 5


def bench_once():
    from swsos import _kernels
    from swsos.poly import Polynomial, monomial_basis
    from swsos.sim import SimConfig, simulate
    from swsos.system import load_system

    rng = np.random.default_rng(0)
    results = {"numba": bool(_kernels.USE_NUMBA)}

    # batch polynomial evaluation at oracle scale
    basis = monomial_basis(3, 6)
    p = Polynomial(3, {m: c for m, c in zip(basis, rng.normal(size=len(basis)))})
    X = rng.uniform(-2, 2, size=(100_000, 3))
    p.eval_many(X[:10])  # warm up (jit compile)
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        p.eval_many(X)
        best = min(best, time.perf_counter() - t0)
    results["eval_poly_batch_100k_s"] = best

    # smooth-segment RK4 run at simulator scale
    here = os.path.dirname(os.path.abspath(__file__))
    sys_ = load_system(os.path.join(here, "..", "systems", "quadrant-cubic.sys"))
    cfg = SimConfig(step=1e-3, t_end=10.0, theta={1: (0.5, 0.5), 2: (1.0,)})
    simulate(sys_, (0.5, 0.5), SimConfig(step=1e-3, t_end=0.01))  # warm up
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        simulate(sys_, (2.0, 2.0), cfg)
        best = min(best, time.perf_counter() - t0)
    results["simulate_t10_s"] = best
    return results


def main():
    if os.environ.get("_SWSOS_BENCH_CHILD"):
        print(json.dumps(bench_once()))
        return

    rows = []
    for no_numba in ("0", "1"):
        env = dict(os.environ,
                   SWSOS_NO_NUMBA=no_numba,
                   _SWSOS_BENCH_CHILD="1")
        out = subprocess.run([sys.executable, os.path.abspath(__file__)],
                             env=env, capture_output=True, text=True,
                             check=True)
        rows.append(json.loads(out.stdout.strip().splitlines()[-1]))

    nb, np_ = rows
    if not nb["numba"]:
        print("warning: numba unavailable; both rows use the numpy fallback")
    print(f"{'kernel':30s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for key in ("eval_poly_batch_100k_s", "simulate_t10_s"):
        ratio = np_[key] / nb[key] if nb[key] > 0 else float("nan")
        print(f"{key:30s} {nb[key]:10.4f} {np_[key]:10.4f} {ratio:7.1f}x")


if __name__ == "__main__":
    main()
