"""Time the compiled and numpy leapfrog backends on the same problems.

    python3 benchmarks/bench_kernels.py [--nx 32 64 128] [--repeat 3]

Prints one row per grid: time of a full 2D solve with each backend, the
speedup and the max difference between the two solutions.
"""

import argparse
import math
import time

import numpy as np

from waveprobe import kernels
from waveprobe.grid import make_grid
from waveprobe.ibvp import IbvpProblem, solve_damped_ibvp, solve_ibvp
from waveprobe.potentials import bump


def _problem(nx):
    grid = make_grid(2, 1.0, 1.0, 2 * nx, nx)
    x, y = grid.space_coords
    u0 = np.sin(math.pi * x) * np.sin(math.pi * y)
    return IbvpProblem(grid, q=bump(grid, radius=0.3), u0=u0)


def _best(fn, repeat):
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nx", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    if len(backends) == 1:
        print("compiled kernels unavailable; timing the numpy backend only")
    print(f"{'solver':<8}{'nx':>6}{'nt':>6}" + "".join(f"{b + ' s':>12}" for b in backends)
          + f"{'speedup':>10}{'max diff':>12}")
    for nx in args.nx:
        prob = _problem(nx)
        for label, solve in (
            ("plain", lambda b: solve_ibvp(prob, backend=b)),
            ("damped", lambda b: solve_damped_ibvp(prob, 4.0, (0.6, 0.8), backend=b)),
        ):
            times, sols = [], []
            for b in backends:
                t, u = _best(lambda: solve(b), args.repeat)
                times.append(t)
                sols.append(u)
            speed = times[0] / times[-1]
            diff = float(np.max(np.abs(sols[0] - sols[-1])))
            print(f"{label:<8}{nx:>6}{prob.grid.nt:>6}" + "".join(f"{t:>12.4f}" for t in times)
                  + f"{speed:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
