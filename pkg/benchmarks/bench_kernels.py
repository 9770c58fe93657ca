"""Compare the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--size 100000]

Times each kernel on random data, then full solves on the synthetic
families, under both backends. Prints one line per case with the median
wall time and the compiled/numpy speedup.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from rlsd import kernels
from rlsd.bench import BenchSpec, generate
from rlsd.solver import SolverConfig, solve


def _median_time(fn, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return statistics.median(out)


def kernel_cases(n, rng):
    v = rng.standard_normal(n)
    s = rng.standard_normal(n)
    lam = rng.standard_normal(n)
    w = (rng.random(n) < 0.5).astype(float)
    o = rng.standard_normal(n)
    x0 = np.zeros(n)
    return {
        "soft_threshold": lambda k: k.soft_threshold(v, 0.3),
        "clamp": lambda k: k.clamp(v, -0.5, 0.5),
        "prox_separable(l1+box)": lambda k: k.prox_separable(kernels.KIND_L1, v, 0.5, 0.3, -1.0, 1.0),
        "canonical_x3_dual": lambda k: k.canonical_x3_dual(lam, s, 0.8),
        "apg_diag(l1, mask)": lambda k: k.apg_diag(kernels.KIND_L1, 0.1, -np.inf, np.inf, w, o, x0,
                                                   2.0, 1e-10, 500),
    }


SOLVES = [
    BenchSpec("spcp", m=30, n=30),
    BenchSpec("background", m=40, n=30),
    BenchSpec("lasso", n=200, p=80),
    BenchSpec("cpcp", m=20, n=20, density=0.6),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=100_000)
    ap.add_argument("--gamma", type=float, default=0.8)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the numpy fallback is available")
    mods = {name: kernels.backend_module(name) for name in backends}
    rng = np.random.default_rng(0)
    cases = kernel_cases(args.size, rng)

    print(f"kernels (n={args.size}, median of {args.repeat})")
    for label, fn in cases.items():
        times = {b: _median_time(lambda: fn(m), args.repeat) for b, m in mods.items()}
        _report(label, times)

    print(f"full solves (gamma={args.gamma}, tol 1e-8)")
    original = kernels.BACKEND
    try:
        for spec in SOLVES:
            p, _ = generate(spec)
            cfg = SolverConfig(gamma=args.gamma, max_iter=20000, tol_kkt=1e-8)
            times = {}
            for b in backends:
                kernels.set_backend(b)
                times[b] = _median_time(lambda: solve(p, cfg), max(1, args.repeat // 2))
            _report(f"{spec.family} {spec.m}x{spec.n}" if spec.family != "lasso"
                    else f"lasso {spec.n}x{spec.p}", times)
    finally:
        kernels.set_backend(original)


def _report(label, times):
    parts = " ".join(f"{b}={t * 1e3:9.3f}ms" for b, t in times.items())
    speed = ""
    if "cython" in times and "python" in times and times["cython"] > 0:
        speed = f" speedup={times['python'] / times['cython']:.2f}x"
    print(f"  {label:<26} {parts}{speed}")


if __name__ == "__main__":
    main()
