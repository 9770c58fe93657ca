"""Unmodified 3-block ADMM for RLSD problems.

One sweep updates ``x1 -> x2 -> x3`` in Gauss-Seidel order on the augmented
Lagrangian and then takes the multiplier step ``lam <- lam - gamma * r``.
With the canonical third block the x3 step is closed form; with a quadratic
``f3`` it is a single linear solve.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from . import kernels
from .errors import InvalidInputError, NumericalError
from .problem import (
    BlockMap,
    RlsdProblem,
    augmented_lagrangian,
    kkt_residual,
    objective,
)
from .regularizers import StronglyConvexSmooth, feasible_start, prox, separable_code


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``inner_tol`` may be a single tolerance or a per-outer-iteration schedule
    (the last entry repeats). The run is fully deterministic; there is no seed.
    """

    gamma: float
    max_iter: int = 10000
    tol_kkt: float = 1e-8
    inner_tol: float | Sequence[float] = 1e-10
    inner_max_iter: int = 2000
    record_trace: bool = False
    store_iterates: bool = True

    def __post_init__(self):
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidInputError("gamma must be a finite positive number")
        if int(self.max_iter) < 1 or int(self.inner_max_iter) < 1:
            raise InvalidInputError("iteration limits must be positive")
        if not self.tol_kkt > 0:
            raise InvalidInputError("tol_kkt must be positive")
        tols = self.inner_tol if isinstance(self.inner_tol, Sequence) else [self.inner_tol]
        if len(tols) == 0 or not all(t > 0 for t in tols):
            raise InvalidInputError("inner tolerances must be positive")
        object.__setattr__(self, "gamma", float(self.gamma))

    def inner_tol_at(self, k):
        if isinstance(self.inner_tol, Sequence):
            return float(self.inner_tol[min(k, len(self.inner_tol) - 1)])
        return float(self.inner_tol)


@dataclass(frozen=True, eq=False)
class IterateState:
    """``(x1, x2, x3, lam)`` at iteration ``k`` with cached block images."""

    k: int
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    lam: np.ndarray
    a1x1: np.ndarray
    a2x2: np.ndarray
    r: np.ndarray


TRACE_COLUMNS = (
    "k", "objective", "lagrangian", "primal_residual", "kkt_max",
    "d_x1", "d_x2", "d_x3", "d_lambda",
)


@dataclass
class Trace:
    """Per-iteration scalars and (optionally) iterates.

    Row ``k`` describes ``w^k``; the step columns hold ``||A1(x1^k - x1^{k-1})||``,
    ``||A2(x2^k - x2^{k-1})||``, ``||x3^k - x3^{k-1}||`` and
    ``||lam^k - lam^{k-1}||`` (zero on row 0). ``iterates[k]`` is a ``(4, p)``
    array stacking ``A1 x1, A2 x2, x3, lam``.
    """

    gamma: float
    rows: list = field(default_factory=list)
    iterates: list | None = None

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        j = TRACE_COLUMNS.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def iterate_array(self):
        if self.iterates is None:
            return None
        return np.stack(self.iterates)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for row in self.rows:
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])

    def save_iterates(self, path):
        if self.iterates is None:
            raise InvalidInputError("trace has no stored iterates")
        with open(path, "wb") as fh:
            np.save(fh, self.iterate_array(), allow_pickle=False)

    @classmethod
    def from_csv(cls, path, gamma, iterates_path=None):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != TRACE_COLUMNS:
                raise InvalidInputError(
                    f"trace header must be {','.join(TRACE_COLUMNS)}, got {header}"
                )
            rows = [tuple([int(r[0])] + [float(v) for v in r[1:]]) for r in reader if r]
        iterates = None
        if iterates_path is not None:
            arr = np.load(iterates_path, allow_pickle=False)
            if arr.ndim != 3 or arr.shape[0] != len(rows) or arr.shape[1] != 4:
                raise InvalidInputError("iterate file does not match the trace")
            iterates = list(arr)
        return cls(gamma=float(gamma), rows=rows, iterates=iterates)


@dataclass(eq=False)
class SolveResult:
    state: IterateState
    status: Status
    iterations: int
    kkt: object
    gamma: float
    trace: Trace | None = None
    certificate: object = None
    message: str = ""

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    def summary(self, p):
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "objective": objective(p, self.state.x1, self.state.x2, self.state.x3),
            "kkt_max": self.kkt.max,
            "gamma": self.gamma,
        }


# ---------------------------------------------------------------------------
# subproblem updates


def update_x3_closed_form(lam, s, gamma):
    """Canonical x3 step ``(lam - gamma * s) / (gamma + 1)``.

    ``s = A1 x1 + A2 x2 - b`` at the freshly updated blocks.
    """
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    return (np.asarray(lam, dtype=float) - gamma * np.asarray(s, dtype=float)) / (gamma + 1.0)


def update_x3_general(f3, lam, s, gamma, factor=None):
    """Minimizer of ``f3(x) + (gamma/2)||s + x - lam/gamma||^2`` for quadratic f3.

    Solves ``(Q + gamma I) x = lam - gamma * s - q``. ``factor`` may carry a
    precomputed Cholesky factorization of ``Q + gamma I``.
    """
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    rhs = np.asarray(lam, dtype=float) - gamma * np.asarray(s, dtype=float) - f3.q
    try:
        if factor is None:
            factor = scipy.linalg.cho_factor(f3.Q + gamma * np.eye(f3.dim))
        return scipy.linalg.cho_solve(factor, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"x3 linear solve failed: {exc}") from exc


def dual_update(lam, r, gamma):
    return lam - gamma * r


def _apg_general(bmap, reg, others, gamma, tol, max_iter, x0):
    """FISTA with adaptive restart on ``f(x) + (gamma/2)||Ax + others||^2``."""
    lip = gamma * bmap.norm_sq
    t = 1.0 / lip
    x = np.array(x0, dtype=float)
    y = x.copy()
    theta = 1.0
    gap = math.inf
    for it in range(1, max_iter + 1):
        g = gamma * bmap.adjoint(bmap.apply(y) + others)
        xn = prox(reg, y - t * g, t)
        gn = gamma * bmap.adjoint(bmap.apply(xn) + others)
        pn = prox(reg, xn - t * gn, t)
        gap = float(np.linalg.norm(xn - pn))
        if gap <= tol:
            return xn, gap, it
        if float(np.dot(y - xn, xn - x)) > 0.0:
            theta = 1.0
            y = xn.copy()
        else:
            theta_n = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
            y = xn + ((theta - 1.0) / theta_n) * (xn - x)
            theta = theta_n
        x = xn
    return x, gap, max_iter


def update_block(bmap: BlockMap, reg, others, gamma, inner_tol=1e-10,
                 inner_max_iter=2000, warm=None):
    """Minimize ``f(x) + (gamma/2)||A x + others||^2`` over the block's box.

    ``others`` collects every other term of the penalty,
    ``A_other x_other + x3 - b - lam/gamma``. When ``A'A = cI`` the minimizer
    is the prox of ``f/(gamma c)`` at ``-A' others / c``; otherwise an
    accelerated proximal-gradient loop runs until the prox-gradient gap is at
    most ``inner_tol``, warm-started at ``warm``.
    """
    if bmap.is_empty:
        return np.zeros(0)
    c = bmap.orthogonal_scale
    if c is not None:
        return prox(reg, -bmap.adjoint(others) / c, 1.0 / (gamma * c))
    x0 = feasible_start(reg, bmap.input_dim) if warm is None else warm
    code = separable_code(reg)
    diag = bmap.diagonal
    if code is not None and diag is not None:
        if reg.box is not None:
            lo, hi = reg.box.lo, reg.box.hi
        else:
            lo, hi = -np.inf, np.inf
        x, gap, _ = kernels.apg_diag(code, reg.beta, lo, hi, diag, others, x0,
                                     float(gamma), float(inner_tol), int(inner_max_iter))
    else:
        x, gap, _ = _apg_general(bmap, reg, others, gamma, inner_tol, inner_max_iter, x0)
    if not gap <= inner_tol:
        raise NumericalError(
            f"inner solver for {bmap.kind} block stopped at gap {gap:.3e} "
            f"after {inner_max_iter} iterations", gap=gap
        )
    return x


# ---------------------------------------------------------------------------
# outer loop


class _Workspace:
    """Per-(problem, gamma) cached data: the x3 factorization."""

    def __init__(self, p, gamma):
        self.factor = None
        if isinstance(p.f3, StronglyConvexSmooth):
            try:
                self.factor = scipy.linalg.cho_factor(p.f3.Q + gamma * np.eye(p.dim))
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"factorizing Q + gamma I failed: {exc}") from exc


def initial_state(p: RlsdProblem):
    """Blocks at the projection of the origin onto their sets; x3 = lam = 0."""
    x1 = feasible_start(p.block1.reg, p.block1.dim)
    x2 = feasible_start(p.block2.reg, p.block2.dim)
    x3 = np.zeros(p.dim)
    lam = np.zeros(p.dim)
    a1 = p.block1.map.apply(x1)
    a2 = p.block2.map.apply(x2)
    return IterateState(0, x1, x2, x3, lam, a1, a2, a1 + a2 + x3 - p.b)


def step(p: RlsdProblem, cfg: SolverConfig, state: IterateState, _ws=None):
    """One Gauss-Seidel sweep ``x1, x2, x3`` followed by the multiplier step."""
    gamma = cfg.gamma
    tol = cfg.inner_tol_at(state.k)
    shift = state.x3 - p.b - state.lam / gamma
    x1 = update_block(p.block1.map, p.block1.reg, state.a2x2 + shift, gamma,
                      tol, cfg.inner_max_iter, state.x1)
    a1 = p.block1.map.apply(x1)
    x2 = update_block(p.block2.map, p.block2.reg, a1 + shift, gamma,
                      tol, cfg.inner_max_iter, state.x2)
    a2 = p.block2.map.apply(x2)
    s = a1 + a2 - p.b
    if p.canonical:
        x3, r, lam = kernels.canonical_x3_dual(state.lam, s, gamma)
    else:
        factor = _ws.factor if _ws is not None else None
        x3 = update_x3_general(p.f3, state.lam, s, gamma, factor)
        r = s + x3
        lam = dual_update(state.lam, r, gamma)
    return IterateState(state.k + 1, x1, x2, x3, lam, a1, a2, r)


def _record(p, gamma, st, prev, kkt):
    L = augmented_lagrangian(p, st.x1, st.x2, st.x3, st.lam, gamma)
    obj = objective(p, st.x1, st.x2, st.x3)
    if prev is None:
        steps = (0.0, 0.0, 0.0, 0.0)
    else:
        steps = (
            float(np.linalg.norm(st.a1x1 - prev.a1x1)),
            float(np.linalg.norm(st.a2x2 - prev.a2x2)),
            float(np.linalg.norm(st.x3 - prev.x3)),
            float(np.linalg.norm(st.lam - prev.lam)),
        )
    return (st.k, obj, L, float(np.linalg.norm(st.r)), kkt.max) + steps


def _stack(st):
    return np.stack([st.a1x1, st.a2x2, st.x3, st.lam])


def solve(p: RlsdProblem, cfg: SolverConfig, state: IterateState | None = None):
    """Run ADMM until ``kkt_residual.max <= cfg.tol_kkt`` or ``cfg.max_iter``.

    At least one sweep is always taken. Returns a :class:`SolveResult`;
    numerical failures are reported through its status, not raised.
    """
    ws = _Workspace(p, cfg.gamma)
    st = initial_state(p) if state is None else state
    kkt = kkt_residual(p, st.x1, st.x2, st.x3, st.lam)
    trace = None
    if cfg.record_trace:
        trace = Trace(gamma=cfg.gamma, iterates=[] if cfg.store_iterates else None)
        trace.rows.append(_record(p, cfg.gamma, st, None, kkt))
        if trace.iterates is not None:
            trace.iterates.append(_stack(st))
    status = Status.MAX_ITERATIONS
    message = ""
    start_k = st.k
    for _ in range(cfg.max_iter):
        try:
            new = step(p, cfg, st, ws)
        except NumericalError as exc:
            status = Status.NUMERICAL_FAILURE
            message = str(exc)
            break
        if not (np.all(np.isfinite(new.lam)) and np.all(np.isfinite(new.x3))):
            status = Status.NUMERICAL_FAILURE
            message = f"non-finite iterate at k={new.k}"
            break
        kkt = kkt_residual(p, new.x1, new.x2, new.x3, new.lam)
        if trace is not None:
            trace.rows.append(_record(p, cfg.gamma, new, st, kkt))
            if trace.iterates is not None:
                trace.iterates.append(_stack(new))
        st = new
        if kkt.max <= cfg.tol_kkt:
            status = Status.CONVERGED
            break
    return SolveResult(
        state=st, status=status, iterations=st.k - start_k, kkt=kkt,
        gamma=cfg.gamma, trace=trace, message=message,
    )
