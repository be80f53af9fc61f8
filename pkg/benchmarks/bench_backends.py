"""Time the compiled and pure-numpy step kernels on ex_simple.

    python benchmarks/bench_backends.py [--grids 64 256 1024] [--steps 2000]

Both backends run the same number of steps from the same initial row; the
final rows are compared so a speedup never hides a divergence.
"""
import argparse
import math
import time

import numpy as np

from pot1d import _accel, kernels
from pot1d.bounds import derive_bounds
from pot1d.densities import catalog
from pot1d.grid_ops import build_grid
from pot1d.stepper import StepConfig, initial_state


def time_backend(backend, entry, db, grid, n_steps, repeats):
    cfg = StepConfig.for_entry(entry)
    row0 = initial_state(entry, grid, cfg).row
    logf = np.log(entry.f.eval(grid.interior))
    kinds, params, breaks = entry.g.kernel_args()
    best, row = math.inf, None
    for _ in range(repeats):
        row = row0.copy()
        dts = np.empty(n_steps)
        t0 = time.perf_counter()
        kernels.advance(row, logf, grid.dx, cfg.c_bc, cfg.d_bc, kinds, params, breaks, n_steps,
                        cfg.r_safety, 0.5 * db.delta1, cfg.max_dt, 0.0, math.inf, dts,
                        backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, row


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[64, 256, 1024])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    entry = catalog("ex_simple")
    db = derive_bounds(entry)
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    if "numba" in backends:  # compile outside the timed region
        time_backend("numba", entry, db, build_grid(-1, 1, 8), 2, 1)
    print(f"{'J':>6} {'backend':>8} {'s/step':>12} {'speedup':>8} {'max|diff|':>10}")
    for J in args.grids:
        grid = build_grid(-1, 1, J)
        res = {b: time_backend(b, entry, db, grid, args.steps, args.repeats) for b in backends}
        base = res["numpy"][0]
        for b, (secs, row) in res.items():
            diff = float(np.abs(row - res["numpy"][1]).max())
            print(f"{J:>6} {b:>8} {secs / args.steps:>12.3e} {base / secs:>8.1f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
