"""Deterministic synthetic RLSD instances.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``; draws are
made in a fixed order (low-rank factors, sparse support, sparse values,
noise, then any mask), so a :class:`BenchSpec` fully determines its instance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError
from .problem import Block, BlockMap, RlsdProblem
from .regularizers import Box, Regularizer

FAMILIES = ("spcp", "background", "cpcp", "lasso")


@dataclass(frozen=True)
class BenchSpec:
    """Parameters of a synthetic instance.

    ``m, n`` are the matrix dimensions for the matrix families; for ``lasso``
    the design is ``n x p``. Weights left as None take family defaults:
    ``beta1 = 0.25`` and ``beta2 = 0.25 / sqrt(max(m, n))`` for the
    low-rank-plus-sparse families, ``beta = 1`` for background extraction and
    ``beta = 0.1`` for lasso.
    """

    family: str
    m: int = 30
    n: int = 30
    p: int = 20
    rank: int = 2
    sparsity: float = 0.05
    noise: float = 1e-3
    beta1: float | None = None
    beta2: float | None = None
    beta: float | None = None
    density: float = 0.5
    box_lo: float = 0.0
    box_hi: float = 255.0
    orthonormal: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown family {self.family!r}")
        if self.m < 1 or self.n < 1 or self.p < 1:
            raise InvalidInputError("dimensions must be at least 1")
        if not 0.0 <= self.sparsity <= 1.0:
            raise InvalidInputError("sparsity must lie in [0, 1]")
        if self.noise < 0:
            raise InvalidInputError("noise level must be nonnegative")
        if self.rank < 0 or self.rank > min(self.m, self.n):
            raise InvalidInputError("rank must lie in [0, min(m, n)]")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        if self.family == "cpcp" and not 0.0 < self.density <= 1.0:
            raise InvalidInputError("mask density must lie in (0, 1]")
        if self.family == "lasso" and self.p > self.n:
            raise InvalidInputError("lasso needs p <= n for a full-column-rank design")
        if self.family == "background" and self.box_lo > self.box_hi:
            raise InvalidInputError("background box needs lo <= hi")
        for name in ("beta1", "beta2", "beta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvalidInputError(f"{name} must be positive")

    def to_json(self):
        return asdict(self)

    @property
    def weights(self):
        if self.family in ("spcp", "cpcp"):
            b1 = 0.25 if self.beta1 is None else self.beta1
            b2 = 0.25 / math.sqrt(max(self.m, self.n)) if self.beta2 is None else self.beta2
            return b1, b2
        if self.family == "background":
            return (1.0 if self.beta is None else self.beta,)
        return (0.1 if self.beta is None else self.beta,)


def _rng(spec):
    return np.random.Generator(np.random.PCG64(int(spec.seed)))


def _low_rank_sparse(spec, rng):
    m, n, r = spec.m, spec.n, spec.rank
    L0 = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
    k = int(round(spec.sparsity * m * n))
    S0 = np.zeros(m * n)
    support = rng.choice(m * n, size=k, replace=False)
    S0[support] = rng.uniform(-5.0, 5.0, size=k)
    noise = spec.noise * rng.standard_normal((m, n))
    return L0, S0.reshape(m, n), noise


def _require(spec, family):
    if spec.family != family:
        raise InvalidInputError(f"spec family is {spec.family!r}, expected {family!r}")


def gen_spcp(spec):
    """Low-rank + sparse + noise; nuclear and l1 blocks on identity maps."""
    _require(spec, "spcp")
    rng = _rng(spec)
    L0, S0, noise = _low_rank_sparse(spec, rng)
    M = L0 + S0 + noise
    b1, b2 = spec.weights
    mn = spec.m * spec.n
    p = RlsdProblem(
        Block(BlockMap.identity(mn), Regularizer("nuclear", b1, shape=(spec.m, spec.n))),
        Block(BlockMap.identity(mn), Regularizer("l1", b2)),
        M.reshape(-1),
    )
    return p, {"L0": L0, "S0": S0}


def gen_background(spec):
    """Static background ``u e'`` in a box plus a sparse foreground."""
    _require(spec, "background")
    rng = _rng(spec)
    m, n = spec.m, spec.n
    u0 = rng.uniform(spec.box_lo, spec.box_hi, size=m)
    k = int(round(spec.sparsity * m * n))
    S0 = np.zeros(m * n)
    support = rng.choice(m * n, size=k, replace=False)
    S0[support] = rng.uniform(0.0, 255.0, size=k) - u0[support // n]
    noise = spec.noise * rng.standard_normal((m, n))
    M = np.outer(u0, np.ones(n)) + S0.reshape(m, n) + noise
    (beta,) = spec.weights
    p = RlsdProblem(
        Block(BlockMap.rank_one_column(m, n),
              Regularizer("zero", 0.0, box=Box(spec.box_lo, spec.box_hi))),
        Block(BlockMap.identity(m * n), Regularizer("l1", beta)),
        M.reshape(-1),
    )
    return p, {"u0": u0, "S0": S0.reshape(m, n)}


def gen_cpcp(spec):
    """Low-rank + sparse observed through an entry mask shared by both blocks.

    With ``density = 1`` the draws (and the problem data) coincide with
    :func:`gen_spcp` for the same spec.
    """
    _require(spec, "cpcp")
    rng = _rng(spec)
    L0, S0, noise = _low_rank_sparse(spec, rng)
    m, n = spec.m, spec.n
    k = int(round(spec.density * m * n))
    if k < 1:
        raise InvalidInputError("mask density keeps no entries")
    flat = np.sort(rng.choice(m * n, size=k, replace=False))
    idx = np.stack([flat // n, flat % n], axis=1)
    mask = BlockMap.entry_mask((m, n), idx)
    M = (L0 + S0 + noise).reshape(-1) * mask.mask
    b1, b2 = spec.weights
    p = RlsdProblem(
        Block(mask, Regularizer("nuclear", b1, shape=(m, n))),
        Block(mask, Regularizer("l1", b2)),
        M,
    )
    return p, {"L0": L0, "S0": S0, "mask": idx}


def gen_lasso(spec):
    """``beta ||x||_1 + 0.5 ||Ax - b||^2`` with the residual as the third block."""
    _require(spec, "lasso")
    rng = _rng(spec)
    n, p = spec.n, spec.p
    A = rng.standard_normal((n, p))
    if spec.orthonormal:
        A, _ = np.linalg.qr(A)
    k = max(1, int(round(spec.sparsity * p)))
    x0 = np.zeros(p)
    x0[rng.choice(p, size=k, replace=False)] = rng.standard_normal(k)
    b = A @ x0 + spec.noise * rng.standard_normal(n)
    (beta,) = spec.weights
    prob = RlsdProblem(
        Block(BlockMap.dense(A), Regularizer("l1", beta)),
        Block(BlockMap.empty(n), None),
        b,
    )
    return prob, {"x0": x0}


GENERATORS = {
    "spcp": gen_spcp,
    "background": gen_background,
    "cpcp": gen_cpcp,
    "lasso": gen_lasso,
}


def generate(spec):
    return GENERATORS[spec.family](spec)
