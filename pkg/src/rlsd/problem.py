"""Problem container, linear block maps, and objective/KKT evaluation.

An RLSD instance is::

    minimize    f1(x1) + f2(x2) + f3(x3)
    subject to  A1 x1 + A2 x2 + x3 = b,   x1 in X1,  x2 in X2

Everything lives in flattened (row-major) vector spaces; matrix-valued
blocks keep their structure through the :class:`BlockMap` kind.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .regularizers import Canonical, Regularizer, StronglyConvexSmooth, prox

RANK_TOL = 1e-10
ORTHO_TOL = 1e-8


class BlockMap:
    """A linear map ``A`` from a block variable into the data space.

    Use the constructors :meth:`dense`, :meth:`identity`,
    :meth:`rank_one_column`, :meth:`entry_mask` and :meth:`empty`.

    Attributes
    ----------
    kind : str
        One of ``dense``, ``identity``, ``rank_one_column``, ``entry_mask``,
        ``empty``.
    input_dim, output_dim : int
        Dimensions of the (flattened) domain and codomain.
    orthogonal_scale : float or None
        ``c`` such that ``A'A = c I``, when such a ``c > 0`` exists.
    """

    __slots__ = ("kind", "input_dim", "output_dim", "orthogonal_scale", "_A", "_mn", "_mask", "_indices")

    def __init__(self, kind, input_dim, output_dim, orthogonal_scale=None,
                 A=None, mn=None, mask=None, indices=None):
        self.kind = kind
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)
        self.orthogonal_scale = orthogonal_scale
        self._A = A
        self._mn = mn
        self._mask = mask
        self._indices = indices

    # -- constructors -----------------------------------------------------

    @classmethod
    def dense(cls, A):
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[1] == 0:
            raise InvalidInputError("dense block map needs a non-empty 2-D matrix")
        if not np.all(np.isfinite(A)):
            raise InvalidInputError("dense block map has non-finite entries")
        p, n = A.shape
        if n > p:
            raise InvalidInputError(f"{p}x{n} matrix cannot have full column rank")
        smin = np.linalg.svd(A, compute_uv=False)[-1]
        if smin <= RANK_TOL:
            raise InvalidInputError(
                f"dense block map is not full column rank (sigma_min={smin:.3g})"
            )
        G = A.T @ A
        c = float(np.trace(G)) / n
        scale = None
        if np.max(np.abs(G - c * np.eye(n))) <= ORTHO_TOL * max(1.0, c):
            scale = c
        A.setflags(write=False)
        return cls("dense", n, p, scale, A=A)

    @classmethod
    def identity(cls, dim):
        dim = int(dim)
        if dim < 1:
            raise InvalidInputError("identity map needs dim >= 1")
        return cls("identity", dim, dim, 1.0)

    @classmethod
    def rank_one_column(cls, m, n):
        """``u -> u e'`` for ``u`` of length m and ``e`` the all-ones n-vector."""
        m, n = int(m), int(n)
        if m < 1 or n < 1:
            raise InvalidInputError("rank-one column map needs m, n >= 1")
        return cls("rank_one_column", m, m * n, float(n), mn=(m, n))

    @classmethod
    def entry_mask(cls, shape, indices):
        """Keep the entries ``(row, col)`` in ``indices`` of an m x n matrix."""
        m, n = (int(s) for s in shape)
        idx = np.asarray(indices, dtype=np.int64).reshape(-1, 2)
        if idx.shape[0] == 0:
            raise InvalidInputError("entry mask must keep at least one entry")
        if np.any(idx < 0) or np.any(idx[:, 0] >= m) or np.any(idx[:, 1] >= n):
            raise InvalidInputError("entry mask index out of range")
        mask = np.zeros(m * n)
        flat = idx[:, 0] * n + idx[:, 1]
        mask[flat] = 1.0
        order = np.unique(flat)
        idx = np.stack([order // n, order % n], axis=1)
        mask.setflags(write=False)
        idx.setflags(write=False)
        return cls("entry_mask", m * n, m * n, None, mn=(m, n), mask=mask, indices=idx)

    @classmethod
    def empty(cls, output_dim):
        return cls("empty", 0, output_dim, None)

    # -- properties -------------------------------------------------------

    @property
    def is_empty(self):
        return self.kind == "empty"

    @property
    def matrix(self):
        return self._A

    @property
    def shape2d(self):
        return self._mn

    @property
    def mask(self):
        return self._mask

    @property
    def indices(self):
        return self._indices

    @property
    def full_column_rank(self):
        if self.kind == "entry_mask":
            return bool(np.all(self._mask == 1.0))
        return not self.is_empty

    @property
    def diagonal(self):
        """Diagonal of ``A`` for maps that are diagonal, else None."""
        if self.kind == "entry_mask":
            return self._mask
        if self.kind == "identity":
            return np.ones(self.input_dim)
        return None

    @property
    def norm_sq(self):
        """Squared spectral norm ``||A||^2``."""
        if self.orthogonal_scale is not None:
            return self.orthogonal_scale
        if self.kind == "entry_mask":
            return 1.0
        if self.kind == "dense":
            return float(np.linalg.norm(self._A, 2) ** 2)
        return 0.0

    # -- action -----------------------------------------------------------

    def apply(self, x):
        k = self.kind
        if k == "identity":
            return np.asarray(x, dtype=float)
        if k == "dense":
            return self._A @ x
        if k == "rank_one_column":
            m, n = self._mn
            return np.repeat(np.asarray(x, dtype=float), n)
        if k == "entry_mask":
            return self._mask * x
        return np.zeros(self.output_dim)

    def adjoint(self, y):
        k = self.kind
        if k == "identity":
            return np.asarray(y, dtype=float)
        if k == "dense":
            return self._A.T @ y
        if k == "rank_one_column":
            m, n = self._mn
            return np.asarray(y, dtype=float).reshape(m, n).sum(axis=1)
        if k == "entry_mask":
            return self._mask * y
        return np.zeros(0)

    def to_dense(self):
        """Materialize ``A`` as an explicit matrix (testing and small problems)."""
        k = self.kind
        if k == "dense":
            return np.array(self._A)
        if k == "identity":
            return np.eye(self.input_dim)
        if k == "rank_one_column":
            m, n = self._mn
            return np.kron(np.eye(m), np.ones((n, 1)))
        if k == "entry_mask":
            return np.diag(self._mask)
        return np.zeros((self.output_dim, 0))

    def __repr__(self):
        return f"BlockMap({self.kind}, {self.input_dim}->{self.output_dim})"


@dataclass(frozen=True)
class Block:
    map: BlockMap
    reg: Regularizer | None

    def __post_init__(self):
        if self.map.is_empty:
            object.__setattr__(self, "reg", None)
            return
        if self.reg is None:
            raise InvalidInputError("a non-empty block needs a regularizer")
        self.reg.check_dim(self.map.input_dim)

    @property
    def dim(self):
        return self.map.input_dim

    def value(self, x):
        return 0.0 if self.map.is_empty else self.reg.value(x)


@dataclass(frozen=True)
class KktResidual:
    stationarity1: float
    stationarity2: float
    dual3: float
    primal: float

    @property
    def max(self):
        return max(self.stationarity1, self.stationarity2, self.dual3, self.primal)


@dataclass(frozen=True, eq=False)
class RlsdProblem:
    """Immutable RLSD instance. ``f3`` is :class:`Canonical` by default."""

    block1: Block
    block2: Block
    b: np.ndarray
    f3: Canonical | StronglyConvexSmooth = Canonical()

    def __post_init__(self):
        b = np.array(self.b, dtype=float).reshape(-1)
        if not np.all(np.isfinite(b)):
            raise InvalidInputError("b has non-finite entries")
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        for name, blk in (("block1", self.block1), ("block2", self.block2)):
            if blk.map.output_dim != b.shape[0]:
                raise InvalidInputError(
                    f"{name} maps into dimension {blk.map.output_dim}, b has {b.shape[0]}"
                )
        if self.block1.map.is_empty and self.block2.map.is_empty:
            raise InvalidInputError("at most one block may be empty")
        if isinstance(self.f3, StronglyConvexSmooth) and self.f3.dim != b.shape[0]:
            raise InvalidInputError("f3 dimension does not match b")

    @property
    def dim(self):
        return self.b.shape[0]

    @property
    def canonical(self):
        return isinstance(self.f3, Canonical)

    @property
    def full_column_rank(self):
        """Whether every non-empty block map has full column rank."""
        return all(
            blk.map.full_column_rank for blk in (self.block1, self.block2) if not blk.map.is_empty
        )

    @property
    def lower_bound(self):
        """Sum of the lower bounds of f1, f2 (and f3 for the general case)."""
        total = 0.0
        for blk in (self.block1, self.block2):
            if not blk.map.is_empty:
                total += blk.reg.lower_bound
        if not self.canonical:
            total += self.f3.lower_bound
        return total


def _check_dims(p, x1, x2, x3, lam=None):
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    x3 = np.asarray(x3, dtype=float).reshape(-1)
    if x1.shape[0] != p.block1.dim or x2.shape[0] != p.block2.dim:
        raise InvalidInputError(
            f"block variables have lengths ({x1.shape[0]}, {x2.shape[0]}), "
            f"expected ({p.block1.dim}, {p.block2.dim})"
        )
    if x3.shape[0] != p.dim:
        raise InvalidInputError(f"x3 has length {x3.shape[0]}, expected {p.dim}")
    if lam is None:
        return x1, x2, x3
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape[0] != p.dim:
        raise InvalidInputError(f"lambda has length {lam.shape[0]}, expected {p.dim}")
    return x1, x2, x3, lam


def residual(p, x1, x2, x3):
    """``A1 x1 + A2 x2 + x3 - b``."""
    x1, x2, x3 = _check_dims(p, x1, x2, x3)
    return p.block1.map.apply(x1) + p.block2.map.apply(x2) + x3 - p.b


def objective(p, x1, x2, x3):
    x1, x2, x3 = _check_dims(p, x1, x2, x3)
    return p.block1.value(x1) + p.block2.value(x2) + p.f3.value(x3)


def constraint_violation(p, x1, x2, x3):
    return float(np.linalg.norm(residual(p, x1, x2, x3)))


def augmented_lagrangian(p, x1, x2, x3, lam, gamma):
    """``f(u) - lam'r + (gamma/2)||r||^2`` with ``r`` the constraint residual."""
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    x1, x2, x3, lam = _check_dims(p, x1, x2, x3, lam)
    r = residual(p, x1, x2, x3)
    return objective(p, x1, x2, x3) - float(lam @ r) + 0.5 * gamma * float(r @ r)


def _stationarity(blk, x, lam):
    if blk.map.is_empty:
        return 0.0
    z = prox(blk.reg, x + blk.map.adjoint(lam), 1.0)
    return float(np.linalg.norm(x - z))


def kkt_residual(p, x1, x2, x3, lam):
    """Residuals of the optimality system; all zero exactly at solutions.

    Block stationarity is measured as the unit-step prox fixed-point gap
    ``||x_i - prox_{f_i + 1_{X_i}}(x_i + A_i' lam)||``.
    """
    x1, x2, x3, lam = _check_dims(p, x1, x2, x3, lam)
    return KktResidual(
        stationarity1=_stationarity(p.block1, x1, lam),
        stationarity2=_stationarity(p.block2, x2, lam),
        dual3=float(np.linalg.norm(p.f3.grad(x3) - lam)),
        primal=constraint_violation(p, x1, x2, x3),
    )
