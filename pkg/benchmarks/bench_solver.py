"""Time the compiled dual coordinate descent backend against the numpy twin.

Trains the same binary problems through ``train_binary_linear`` and
``train_binary_kernel`` with each backend swapped in, then reports wall
time, speedup, and the relative gap between the dual objectives (kernel
sweeps are bit-identical across backends; linear sweeps may differ in the
last float bits because the dot products associate differently).

Run from a checkout:  python benchmarks/bench_solver.py [--rows N] [--dim D]
"""

import argparse
import importlib
import time

import numpy as np

import rffsvm.solver as solver_mod
from rffsvm import KernelSpec, SvmConfig, gram_matrix
from rffsvm.solver import train_binary_kernel, train_binary_linear


def binary_blobs(rows, dim, seed):
    rng = np.random.default_rng(seed)
    half = rows // 2
    X = np.vstack(
        [
            rng.normal(size=(half, dim)) - 1.0,
            rng.normal(size=(rows - half, dim)) + 1.0,
        ]
    )
    y = np.concatenate([np.ones(half), -np.ones(rows - half)])
    return X, y


def load_backends():
    backends = []
    try:
        backends.append(("compiled", importlib.import_module("rffsvm._dcd")))
    except ImportError:
        print("compiled extension not built; timing the numpy backend only")
    backends.append(("python", importlib.import_module("rffsvm._dcd_py")))
    return backends


def time_solve(backend, fn, *args, repeats=3):
    saved = solver_mod._backend
    solver_mod._backend = backend
    try:
        best = float("inf")
        model = None
        for _ in range(repeats):
            start = time.perf_counter()
            model = fn(*args)
            best = min(best, time.perf_counter() - start)
        return best, model
    finally:
        solver_mod._backend = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=3000, help="training rows")
    parser.add_argument("--dim", type=int, default=512, help="explicit feature width")
    parser.add_argument("--kernel-rows", type=int, default=1200, help="gram side")
    parser.add_argument("--repeats", type=int, default=3, help="best-of timing runs")
    args = parser.parse_args()

    config = SvmConfig(regularization_c=10.0, tolerance=1e-4, max_iterations=200)
    backends = load_backends()

    X, y = binary_blobs(args.rows, args.dim, seed=3)
    linear_problems = ("linear %dx%d" % (args.rows, args.dim), train_binary_linear, (X, y, config))

    Xk, yk = binary_blobs(args.kernel_rows, 32, seed=4)
    spec = KernelSpec("gaussian", 0.02)
    K = gram_matrix(spec, Xk)
    kernel_problems = (
        "kernel %dx%d gram" % (args.kernel_rows, args.kernel_rows),
        train_binary_kernel,
        (K, yk, config, spec),
    )

    print("backends: " + ", ".join(name for name, _ in backends))
    header = "%-22s %12s %12s %9s %12s" % ("problem", "compiled", "python", "speedup", "obj rel gap")
    print(header)
    print("-" * len(header))
    for label, fn, fn_args in (linear_problems, kernel_problems):
        times = {}
        objectives = {}
        for name, backend in backends:
            seconds, model = time_solve(backend, fn, *fn_args, repeats=args.repeats)
            times[name] = seconds
            objectives[name] = model.dual_objective
        if "compiled" in times:
            gap = abs(objectives["compiled"] - objectives["python"]) / abs(objectives["python"])
            print(
                "%-22s %11.3fs %11.3fs %8.1fx %12.2e"
                % (label, times["compiled"], times["python"], times["python"] / times["compiled"], gap)
            )
        else:
            print("%-22s %12s %11.3fs %9s %12s" % (label, "n/a", times["python"], "n/a", "n/a"))


if __name__ == "__main__":
    main()
