"""Time the numba and numpy backends of the marching kernels.

    python3 benchmarks/bench_kernels.py [--nodes 129 513] [--steps 2000] [--repeat 3]

Each kernel runs a fixed number of steps from the same start on both
backends; the table reports the best wall time per step and the largest
difference between the two final states.
"""

import argparse
import time

import numpy as np

from twolocus import _kernels as K
from twolocus.dynamics import AlleleStepper, GameteStepper, SimParams, default_dt, gamete_to_allele
from twolocus.environment import make_environment
from twolocus.equilibria import product_seed
from twolocus.grid import build_grid


def _scenario(n):
    grid = build_grid(1.0, n)
    env = make_environment({"type": "step", "levels": [-1.0, 1.0], "breakpoints": [0.6]},
                           {"type": "step", "levels": [-1.0, 1.0], "breakpoints": [0.7]}, grid)
    params = SimParams(15.0, 1.0)
    return grid, env, params


def _kernels(n):
    grid, env, params = _scenario(n)
    dt = default_dt(env, params)
    p0 = product_seed(env, params.lam).p
    q0 = gamete_to_allele(product_seed(env, params.lam)).stacked
    theta0 = np.full(n, 0.5)
    gs = GameteStepper(env, params, dt)
    als = AlleleStepper(env, params, dt)
    sfac = K.implicit_factor(grid.laplacian_bands, dt)

    def gamete(steps):
        p = p0.copy()
        gs.advance(p, steps)
        return p

    def allele(steps):
        q = q0.copy()
        als.advance(q, steps)
        return q

    def scalar(steps):
        t = theta0.copy()
        K.march_scalar(t, env.alpha, params.lam, dt, sfac, steps)
        return t

    return {"march_gamete": gamete, "march_allele": allele, "march_scalar": scalar}


def _time(fn, steps, repeat):
    fn(2)  # warm-up (JIT compile on the numba path)
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(steps)
        best = min(best, time.perf_counter() - t0)
    return best / steps, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, nargs="+", default=[129, 513])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    print(f"{'kernel':<14}{'N':>6}{'numpy us/step':>16}{'numba us/step':>16}"
          f"{'speedup':>10}{'max diff':>12}")
    for n in args.nodes:
        for name, fn in _kernels(n).items():
            with K.backend("numpy"):
                t_np, out_np = _time(fn, args.steps, args.repeat)
            with K.backend("numba"):
                t_nb, out_nb = _time(fn, args.steps, args.repeat)
            diff = float(np.abs(out_np - out_nb).max())
            print(f"{name:<14}{n:>6}{t_np * 1e6:>16.2f}{t_nb * 1e6:>16.2f}"
                  f"{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
