from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rlsd import kernels
from rlsd.bench import BenchSpec, generate
from rlsd.diagnostics import compute_reference
from rlsd.problem import Block, BlockMap, RlsdProblem
from rlsd.regularizers import Regularizer
from rlsd.solver import SolverConfig, solve

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")

# Benchmarks used by the certificate tests.
BENCH_SPECS = {
    "spcp": BenchSpec("spcp", m=30, n=30),
    "background": BenchSpec("background", m=20, n=15),
    "lasso": BenchSpec("lasso", n=50, p=20),
}

ACCEPTANCE_LINES: list[str] = []


def lasso_1d(a=1.0, b=3.0, beta=1.0):
    """min beta|x| + (a x - b)^2 / 2 as a one-block problem."""
    return RlsdProblem(
        Block(BlockMap.dense([[a]]), Regularizer("l1", beta)),
        Block(BlockMap.empty(1), None),
        [b],
    )


class RunCache:
    """Solves and reference solutions shared across the session."""

    def __init__(self):
        self.problems = {k: generate(s)[0] for k, s in BENCH_SPECS.items()}
        self._runs = {}
        self._refs = {}

    def run(self, name, gamma, tol=1e-8, max_iter=20000):
        key = (name, gamma, tol)
        if key not in self._runs:
            cfg = SolverConfig(gamma=gamma, max_iter=max_iter, tol_kkt=tol, record_trace=True)
            self._runs[key] = solve(self.problems[name], cfg)
        return self._runs[key]

    def reference(self, name):
        if name not in self._refs:
            self._refs[name] = compute_reference(self.problems[name])
        return self._refs[name]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    original = kernels.BACKEND
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(original)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
