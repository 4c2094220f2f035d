"""Compare the numba and pure-numpy interval kernels.

    python3 benchmarks/bench_kernels.py [--repeat N] [--grid]

Times refined enclosures of a random Fourier series and its partials on
random sub-boxes for several refinement levels, then (with ``--grid``)
one full verified-grid construction under each backend.  The grid run
spawns a subprocess with VERIFIEDPH_PURE_NUMPY=1 so that the flag is
read at import time, exactly as a user would set it.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from verifiedph import kernels
from verifiedph.expr import compile_tape, partial
from verifiedph.fourier import generate_fourier

GRID_SNIPPET = """
import time
from verifiedph import kernels
from verifiedph.fourier import generate_fourier
from verifiedph.grid import GridConfig, GridFailure, Verifier, construct_verified_grid
v = Verifier(generate_fourier(2, 0), 2, 7)
try:
    construct_verified_grid(v, 0.3, GridConfig(max_depth=2))  # warm-up / jit
except GridFailure:
    pass
t = time.perf_counter()
tree = construct_verified_grid(v, 0.3)
print(kernels.BACKEND, len(tree.leaves), time.perf_counter() - t)
"""


def time_kernel(fn, tape, boxes, k, repeat):
    fn(tape, boxes[0][0], boxes[0][1], k)  # compile / warm caches
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        for lo, hi in boxes:
            fn(tape, lo, hi, k)
        best = min(best, time.perf_counter() - t)
    return best / len(boxes)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--boxes", type=int, default=50)
    ap.add_argument("--modes", type=int, default=2)
    ap.add_argument("--grid", action="store_true", help="also time one verified grid per backend")
    a = ap.parse_args(argv)

    f = generate_fourier(a.modes, 0)
    tape = compile_tape((f,) + tuple(partial(f, i) for i in range(2)))
    rng = np.random.default_rng(0)
    boxes = []
    for _ in range(a.boxes):
        lo = rng.random(2) * 0.9
        boxes.append((lo, lo + 0.1))

    print(f"tape: {len(tape.op)} nodes, {a.modes} modes, {a.boxes} boxes, best of {a.repeat}")
    print(f"{'k':>3} {'numba [ms]':>12} {'numpy [ms]':>12} {'speedup':>8}")
    for k in (0, 3, 5, 7):
        tn = time_kernel(kernels.hull_eval_numba, tape, boxes, k, a.repeat)
        tp = time_kernel(kernels.hull_eval_numpy, tape, boxes, k, a.repeat)
        print(f"{k:>3} {tn * 1e3:>12.3f} {tp * 1e3:>12.3f} {tp / tn:>8.1f}")

    if a.grid:
        for flag in ("", "1"):
            env = dict(os.environ, VERIFIEDPH_PURE_NUMPY=flag)
            out = subprocess.run([sys.executable, "-c", GRID_SNIPPET], env=env, capture_output=True, text=True, check=True)
            backend, leaves, secs = out.stdout.split()
            print(f"grid at t=0.3 [{backend}]: {leaves} leaves in {float(secs):.2f} s")


if __name__ == "__main__":
    main()
