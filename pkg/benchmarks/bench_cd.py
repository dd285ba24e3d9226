"""Benchmark: compiled vs pure-NumPy coordinate-descent kernel.

Runs identical regularization paths through both sweep implementations and
reports wall time and the maximum coefficient discrepancy.

Usage: python benchmarks/bench_cd.py [--reps 5]
"""

import argparse
import importlib
import time

import numpy as np

import hdvar.solver as solver
from hdvar import mc, var


def time_paths(problem, reps):
    start = time.perf_counter()
    for _ in range(reps):
        betas = []
        for i in range(problem.k):
            path = solver.lasso_path(problem.X, problem.ys[i], n_lambda=100)
            betas.append(path[-1][1].beta)
    return (time.perf_counter() - start) / reps, np.vstack(betas)


def with_backend(name):
    module = importlib.import_module(f"hdvar.{name}")
    solver._kernel = module


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=3)
    args = parser.parse_args()

    configs = [("A", 10, 500), ("A", 50, 100), ("B", 10, 500)]
    compiled_available = True
    try:
        importlib.import_module("hdvar._cd_kernel")
    except ImportError:
        compiled_available = False
        print("compiled kernel not built; benchmarking the fallback against itself")

    print(f"{'config':<16}{'cython (s)':>12}{'numpy (s)':>12}{'speedup':>9}{'max |diff|':>12}")
    for exp, k, T in configs:
        model, _ = mc.make_dgp(exp, k)
        data = var.simulate(model, T, seed=0)
        problem = var.stack(data)
        if compiled_available:
            with_backend("_cd_kernel")
            t_cy, b_cy = time_paths(problem, args.reps)
        else:
            t_cy, b_cy = float("nan"), None
        with_backend("_cd_numpy")
        t_np, b_np = time_paths(problem, args.reps)
        diff = float(np.abs(b_cy - b_np).max()) if b_cy is not None else float("nan")
        speedup = t_np / t_cy if compiled_available else float("nan")
        print(f"{exp}/k={k}/T={T:<6}{t_cy:>12.3f}{t_np:>12.3f}{speedup:>9.1f}{diff:>12.2e}")
    if compiled_available:
        with_backend("_cd_kernel")


if __name__ == "__main__":
    main()
