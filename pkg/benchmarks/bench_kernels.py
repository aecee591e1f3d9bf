"""Compare the compiled sampling kernel against the pure-Python fallback.

Runs the same composite-sampling workload through both kernels, asserts
that the outputs are bit-identical (both consume the PCG64 streams draw
for draw), and reports wall-clock timings.

    python3 benchmarks/bench_kernels.py [--m 20000] [--h 5] [--seed 0]
"""
import argparse
import time

import numpy as np
from numpy.random import PCG64, SeedSequence

from idmc import _kernels_py
from idmc.models.infection import build_infection_model, default_infection_params
from idmc.tables import compile_program

try:
    from idmc import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def bitgens(seed, m):
    return [PCG64(c) for c in SeedSequence(seed).spawn(m)]


def run(kernel, flat, m, h, seed):
    t0 = time.perf_counter()
    res = kernel.run_composite(flat, m, h, bitgens(seed, m), 1_000_000, False, False)
    elapsed = time.perf_counter() - t0
    assert res["status"] == 0
    return res, elapsed


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=20000)
    ap.add_argument("--h", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    d = build_infection_model(default_infection_params())
    flat = compile_program(d, {3: 3.0}).flat

    res_py, t_py = run(_kernels_py, flat, args.m, args.h, args.seed)
    print(f"pure-python: {t_py:.3f}s  ({args.m / t_py:,.0f} chains/s)")

    if _kernels_c is None:
        print("compiled kernel not built; skipping comparison")
        return

    res_c, t_c = run(_kernels_c, flat, args.m, args.h, args.seed)
    print(f"compiled:    {t_c:.3f}s  ({args.m / t_c:,.0f} chains/s)")
    print(f"speedup:     {t_py / t_c:.1f}x")

    np.testing.assert_array_equal(
        np.asarray(res_c["states"]), np.asarray(res_py["states"])
    )
    np.testing.assert_array_equal(
        np.asarray(res_c["attempts"]), np.asarray(res_py["attempts"])
    )
    print("outputs bit-identical: yes")


if __name__ == "__main__":
    main()
