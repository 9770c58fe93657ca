"""Proximal-friendly regularizers and the strongly convex third-block term.

Every regularizer in the catalog has an exact proximal map::

    prox(reg, v, tau) = argmin_{z in X}  tau * f(z) + 0.5 * ||z - v||^2

where ``X`` is the (optional) box attached to the regularizer. Supported
kinds are ``l1`` (``beta * ||z||_1``), ``nuclear`` (``beta * ||Z||_*``),
``zero`` (the zero function, only with a bounded box) and ``squared_l2``
(``beta/2 * ||z||^2``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    InfeasiblePointError,
    InvalidInputError,
    NumericalError,
    UnsupportedCombinationError,
)

KINDS = ("l1", "nuclear", "zero", "squared_l2")
FEASIBILITY_TOL = 1e-9

_SEPARABLE_CODE = {
    "l1": kernels.KIND_L1,
    "zero": kernels.KIND_ZERO,
    "squared_l2": kernels.KIND_SQUARED_L2,
}


def _finite(a, what):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{what} contains non-finite entries")
    return a


@dataclass(frozen=True)
class Box:
    """Coordinatewise bounds ``lo <= z <= hi``; scalars broadcast."""

    lo: np.ndarray | float
    hi: np.ndarray | float

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidInputError("box bounds must not be NaN")
        if lo.ndim > 1 or hi.ndim > 1:
            raise InvalidInputError("box bounds must be scalars or vectors")
        if lo.ndim == 1 and hi.ndim == 1 and lo.shape != hi.shape:
            raise InvalidInputError("box lo and hi have different lengths")
        if np.any(lo > hi):
            raise InvalidInputError("box requires lo <= hi coordinatewise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        """Length of the bound vectors, or None when both are scalars."""
        for a in (self.lo, self.hi):
            if a.ndim == 1:
                return a.shape[0]
        return None

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def contains(self, z, tol=FEASIBILITY_TOL):
        z = np.asarray(z, dtype=float).reshape(-1)
        return bool(np.all(z >= self.lo - tol) and np.all(z <= self.hi + tol))

    def to_json(self):
        def enc(a):
            return float(a) if a.ndim == 0 else [float(x) for x in a]

        return {"lo": enc(self.lo), "hi": enc(self.hi)}

    @classmethod
    def from_json(cls, d):
        return cls(lo=d["lo"], hi=d["hi"])


@dataclass(frozen=True)
class Regularizer:
    """A prox-capable regularizer with an optional box constraint.

    Coercivity of ``f + indicator(box)`` is enforced at construction: norm
    kinds need ``beta > 0``, ``squared_l2`` needs ``beta > 0``, and ``zero``
    needs a bounded box. ``shape`` is required for ``nuclear`` and gives the
    matrix shape of the (row-major) flattened variable.
    """

    kind: str
    beta: float = 1.0
    box: Box | None = None
    shape: tuple[int, int] | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown regularizer kind {self.kind!r}")
        beta = float(self.beta)
        if not np.isfinite(beta) or beta < 0:
            raise InvalidInputError("beta must be a finite nonnegative number")
        object.__setattr__(self, "beta", beta)
        if self.box is not None and not isinstance(self.box, Box):
            object.__setattr__(self, "box", Box(*self.box))
        if self.kind == "nuclear":
            if self.shape is None or len(self.shape) != 2 or min(self.shape) < 1:
                raise InvalidInputError("nuclear regularizer needs a 2-D shape")
            object.__setattr__(self, "shape", (int(self.shape[0]), int(self.shape[1])))
        elif self.shape is not None:
            object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.box is not None and self.kind in ("l1", "nuclear"):
            raise UnsupportedCombinationError(
                f"{self.kind} regularizer cannot be combined with a box constraint"
            )
        coercive = (
            (self.kind in ("l1", "nuclear", "squared_l2") and beta > 0)
            or (self.box is not None and self.box.bounded)
        )
        if not coercive:
            raise InvalidInputError(
                f"{self.kind} with beta={beta} and box={self.box} is not coercive"
            )

    @property
    def lower_bound(self):
        return lower_bound(self)

    def check_dim(self, dim):
        """Raise unless this regularizer can act on vectors of length ``dim``."""
        if self.kind == "nuclear" and self.shape[0] * self.shape[1] != dim:
            raise InvalidInputError(
                f"nuclear shape {self.shape} does not match block dimension {dim}"
            )
        if self.box is not None and self.box.dim not in (None, dim):
            raise InvalidInputError(
                f"box has {self.box.dim} entries, block dimension is {dim}"
            )

    def value(self, z):
        """``f(z)``; raises InfeasiblePointError outside the box."""
        z = np.asarray(z, dtype=float)
        if self.box is not None and not self.box.contains(z):
            raise InfeasiblePointError("point violates the box constraint")
        if self.kind == "l1":
            return self.beta * float(np.sum(np.abs(z)))
        if self.kind == "nuclear":
            s = _singular_values(z.reshape(self.shape))
            return self.beta * float(np.sum(s))
        if self.kind == "squared_l2":
            return 0.5 * self.beta * float(np.dot(z.ravel(), z.ravel()))
        return 0.0

    def to_json(self):
        d = {
            "kind": self.kind,
            "beta": self.beta,
            "box": None if self.box is None else self.box.to_json(),
        }
        if self.shape is not None:
            d["shape"] = list(self.shape)
        return d

    @classmethod
    def from_json(cls, d):
        box = d.get("box")
        shape = d.get("shape")
        return cls(
            kind=d["kind"],
            beta=d.get("beta", 1.0),
            box=None if box is None else Box.from_json(box),
            shape=None if shape is None else tuple(shape),
        )


def _singular_values(V):
    try:
        return np.linalg.svd(V, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(_svd_report(V, exc)) from exc


def _svd_report(V, exc):
    finite = bool(np.all(np.isfinite(V)))
    return (
        f"SVD failed on {V.shape[0]}x{V.shape[1]} matrix "
        f"(finite={finite}, max|entry|={np.max(np.abs(V)) if finite else 'n/a'}, "
        f"frobenius={np.linalg.norm(V) if finite else 'n/a'}): {exc}"
    )


def prox_l1(v, tau):
    """Soft-thresholding: ``sign(v) * max(|v| - tau, 0)``."""
    if not tau > 0:
        raise InvalidInputError("tau must be positive")
    v = _finite(v, "v")
    return kernels.soft_threshold(v, float(tau))


def prox_nuclear(V, tau):
    """Singular value thresholding of a matrix."""
    if not tau > 0:
        raise InvalidInputError("tau must be positive")
    V = _finite(V, "V")
    if V.ndim != 2:
        raise InvalidInputError("prox_nuclear expects a matrix")
    try:
        U, s, Wt = np.linalg.svd(V, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(_svd_report(V, exc)) from exc
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    if k == 0:
        return np.zeros_like(V)
    return (U[:, :k] * s[:k]) @ Wt[:k]


def project_box(v, lo, hi):
    """Euclidean projection onto ``{z : lo <= z <= hi}``."""
    v = _finite(v, "v")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    for name, a in (("lo", lo), ("hi", hi)):
        if a.ndim > 0 and a.shape != v.shape:
            raise InvalidInputError(f"{name} has shape {a.shape}, v has {v.shape}")
    if np.any(lo > hi):
        raise InvalidInputError("project_box requires lo <= hi")
    return kernels.clamp(v, lo, hi)


def prox(reg, v, tau):
    """Exact minimizer of ``tau*f(z) + 0.5*||z - v||^2`` over the box of ``reg``."""
    if not tau > 0:
        raise InvalidInputError("tau must be positive")
    if reg.kind == "nuclear":
        v = np.asarray(v, dtype=float)
        return prox_nuclear(v.reshape(reg.shape), tau * reg.beta).reshape(v.shape)
    v = _finite(v, "v")
    if reg.kind == "l1":
        return kernels.soft_threshold(v, tau * reg.beta)
    if reg.box is not None:
        lo, hi = reg.box.lo, reg.box.hi
    else:
        lo, hi = -np.inf, np.inf
    return kernels.prox_separable(_SEPARABLE_CODE[reg.kind], v, float(tau), reg.beta, lo, hi)


def separable_code(reg):
    """Kernel code for separable kinds, or None for ``nuclear``."""
    return _SEPARABLE_CODE.get(reg.kind)


def lower_bound(reg):
    """A finite lower bound of ``f`` on its constraint set.

    Every kind in the catalog is nonnegative, so 0 is valid regardless of box.
    """
    return 0.0


def feasible_start(reg, dim):
    """The projection of the origin onto the constraint set of ``reg``."""
    z = np.zeros(dim)
    if reg is not None and reg.box is not None:
        z = kernels.clamp(z, reg.box.lo, reg.box.hi)
    return z


# ---------------------------------------------------------------------------
# third-block term


@dataclass(frozen=True)
class Canonical:
    """``f3(x) = 0.5 * ||x||^2`` (strong convexity and smoothness both 1)."""

    sigma: float = 1.0
    L: float = 1.0

    @property
    def lower_bound(self):
        return 0.0

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(np.dot(x, x))

    def grad(self, x):
        return np.asarray(x, dtype=float)

    def to_json(self):
        return {"kind": "canonical"}


EIG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StronglyConvexSmooth:
    """Quadratic ``f3(x) = 0.5 x'Qx + q'x`` with ``sigma*I <= Q <= L*I``.

    Construct with explicit ``sigma``/``L`` bounds, or use
    :meth:`from_quadratic` to take them from the extreme eigenvalues of Q.
    """

    Q: np.ndarray
    q: np.ndarray
    sigma: float
    L: float

    def __post_init__(self):
        Q = _finite(self.Q, "Q")
        q = _finite(self.q, "q").reshape(-1)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] != q.shape[0]:
            raise InvalidInputError("Q must be square and match the length of q")
        if not np.allclose(Q, Q.T, rtol=0, atol=EIG_TOL * max(1.0, np.abs(Q).max())):
            raise InvalidInputError("Q must be symmetric")
        Q = 0.5 * (Q + Q.T)
        sigma, L = float(self.sigma), float(self.L)
        if not (sigma > 0 and L > 0 and sigma <= L):
            raise InvalidInputError("need 0 < sigma <= L")
        eig = np.linalg.eigvalsh(Q)
        if eig[0] < sigma - EIG_TOL or eig[-1] > L + EIG_TOL:
            raise InvalidInputError(
                f"eigenvalues of Q span [{eig[0]:.6g}, {eig[-1]:.6g}], "
                f"outside [sigma, L] = [{sigma:.6g}, {L:.6g}]"
            )
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "L", L)

    @classmethod
    def from_quadratic(cls, Q, q):
        eig = np.linalg.eigvalsh(0.5 * (np.asarray(Q) + np.asarray(Q).T))
        return cls(Q=Q, q=q, sigma=float(eig[0]), L=float(eig[-1]))

    @property
    def dim(self):
        return self.q.shape[0]

    @property
    def lower_bound(self):
        return -0.5 * float(self.q @ np.linalg.solve(self.Q, self.q))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self.Q @ x)) + float(self.q @ x)

    def grad(self, x):
        return self.Q @ np.asarray(x, dtype=float) + self.q

    def to_json(self):
        return {"kind": "quadratic", "sigma": self.sigma, "L": self.L}
