"""Time the hot kernels on the numba and numpy paths.

Run ``python benchmarks/bench_kernels.py``; each backend is timed in a fresh
interpreter because ``MABUCHI_NUMBA`` is read at import time.
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from mabuchi import _kernels as K

n, reps = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
pts = rng.uniform(-2, 2, size=(n, 2))
es = rng.integers(0, 6, size=(12, 2))
cs = rng.normal(size=12)
A = rng.normal(size=(8, 2))
c = rng.uniform(0.5, 2, size=8)
Y = rng.normal(size=(400, 2))
u = rng.normal(size=400)
jobs = {
    "poly_eval": lambda: K.poly_eval(pts, es, cs),
    "inside_mask": lambda: K.inside_mask(pts, A, c),
    "max_affine": lambda: K.max_affine(pts, Y, u),
}
out = {"backend": K.BACKEND}
for name, f in jobs.items():
    f()  # compile / warm up
    best = min((lambda t0: (f(), time.perf_counter() - t0)[1])(time.perf_counter()) for _ in range(reps))
    out[name] = best
print(json.dumps(out))
"""


def run(flag: str, n: int, reps: int) -> dict:
    env = {**os.environ, "MABUCHI_NUMBA": flag}
    r = subprocess.run([sys.executable, "-c", CHILD, str(n), str(reps)], capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()
    res = [run("0", args.points, args.reps), run("1", args.points, args.reps)]
    print(f"{'kernel':<12} {'numpy [ms]':>11} {res[1]['backend'] + ' [ms]':>11} {'speedup':>8}")
    for k in ("poly_eval", "inside_mask", "max_affine"):
        a, b = res[0][k] * 1e3, res[1][k] * 1e3
        print(f"{k:<12} {a:>11.2f} {b:>11.2f} {a / b:>8.1f}")


if __name__ == "__main__":
    main()
