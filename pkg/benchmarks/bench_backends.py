"""Benchmark the numba-compiled kernels against the pure-NumPy fallback.

Runs the hot steppers on representative workloads and times the compiled
dispatcher against its uncompiled ``py_func`` source (the exact code the
LEAKYDIMER_BACKEND=numpy path executes).  Under the numpy backend only
that single path is timed.

Usage:  python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from leakydimer import backend, build_hamiltonian, coherent_state, kernels
from leakydimer.fock import split_hamiltonian
from leakydimer.params import ModelParams


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    params = ModelParams(epsilon=0.0, v=1.0, g=0.1, gamma=0.01)
    n = 20
    ham = build_hamiltonian(params, n)
    hr, off, loss = split_hamiltonian(ham)
    state = coherent_state(0.0, 1.0, n)
    t_eval = np.linspace(0.0, 10.0, 201)
    fock_args = (hr, off, loss, state.direction, 0.0, 0.0, t_eval, 1e-9, 1e-12, 10_000_000)

    t_eval_b = np.linspace(0.0, 50.0, 501)
    bloch_args = (0.0, 1.0, 2.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.0, t_eval_b, 1e-9, 1e-12, 10_000_000)
    spinor_args = (0.0, 1.0, 2.0, 0.5, True, 1.0 + 0.0j, 0.0j, 0.0, 0.0, 0.0,
                   t_eval_b, 1e-9, 1e-12, 10_000_000)
    return [
        ("fock_dopri5   N=20, t<=10", kernels.fock_dopri5, fock_args),
        ("bloch_dopri5  t<=50", kernels.bloch_dopri5, bloch_args),
        ("spinor_dopri5 t<=50", kernels.spinor_dopri5, spinor_args),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    print(f"active backend: {backend.BACKEND}")
    rows = []
    for name, fn, fn_args in workloads():
        if backend.NUMBA_ENABLED:
            fn(*fn_args)  # trigger compilation outside the timing loop
            t_jit = _time(fn, fn_args, args.repeat)
            t_py = _time(fn.py_func, fn_args, max(1, args.repeat // 2))
            rows.append((name, t_py, t_jit, t_py / t_jit))
        else:
            t_py = _time(fn, fn_args, args.repeat)
            rows.append((name, t_py, None, None))

    header = f"{'kernel':<28} {'numpy [s]':>12} {'numba [s]':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, t_py, t_jit, speed in rows:
        if t_jit is None:
            print(f"{name:<28} {t_py:12.4f} {'-':>12} {'-':>9}")
        else:
            print(f"{name:<28} {t_py:12.4f} {t_jit:12.4f} {speed:8.1f}x")


if __name__ == "__main__":
    main()
