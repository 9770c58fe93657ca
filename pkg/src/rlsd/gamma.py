"""Admissible penalty parameters.

For a quadratic-like third block with strong convexity ``sigma`` and gradient
Lipschitz constant ``L``, three-block ADMM is certified for every ``gamma`` in
the union of a small-gamma interval (governed by ``eta2``), a middle interval
(governed by ``eta1``) and a large-gamma half line. With the canonical third
block the three certified ranges cover all of ``(0, inf)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError

SQRT2_M1 = math.sqrt(2.0) - 1.0


@dataclass(frozen=True)
class Interval:
    """``lo < hi`` with flags for open endpoints; ``hi`` may be ``inf``."""

    lo: float
    hi: float
    lo_open: bool = True
    hi_open: bool = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InvalidInputError(f"empty interval ({self.lo}, {self.hi})")
        if math.isinf(self.hi) and not self.hi_open:
            raise InvalidInputError("an infinite endpoint must be open")

    def contains(self, x):
        above = x > self.lo if self.lo_open else x >= self.lo
        below = x < self.hi if self.hi_open else x <= self.hi
        return above and below

    def display(self):
        left = "(" if self.lo_open else "["
        right = ")" if self.hi_open else "]"
        return f"{left}{_fmt(self.lo)},{_fmt(self.hi)}{right}"

    def to_json(self):
        return {
            "lo": self.lo,
            "hi": "inf" if math.isinf(self.hi) else self.hi,
            "lo_open": self.lo_open,
            "hi_open": self.hi_open,
        }


def _fmt(x):
    if math.isinf(x):
        return "+inf"
    s = f"{x:.4f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class IntervalUnion:
    """Sorted, disjoint, merged union of intervals."""

    def __init__(self, intervals=()):
        self.intervals = tuple(_normalize(list(intervals)))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __eq__(self, other):
        return isinstance(other, IntervalUnion) and self.intervals == other.intervals

    def __repr__(self):
        return f"IntervalUnion({self.display()})"

    def contains(self, x):
        return any(iv.contains(x) for iv in self.intervals)

    def display(self):
        if not self.intervals:
            return "{}"
        return "∪".join(iv.display() for iv in self.intervals)

    def to_json(self):
        return [iv.to_json() for iv in self.intervals]


def _normalize(ivs):
    ivs = sorted(ivs, key=lambda iv: (iv.lo, iv.lo_open))
    out = []
    for iv in ivs:
        if out:
            cur = out[-1]
            overlap = iv.lo < cur.hi
            touch = iv.lo == cur.hi and not (iv.lo_open and cur.hi_open)
            if overlap or touch:
                if iv.hi > cur.hi:
                    hi, hi_open = iv.hi, iv.hi_open
                elif iv.hi == cur.hi:
                    hi, hi_open = cur.hi, cur.hi_open and iv.hi_open
                else:
                    hi, hi_open = cur.hi, cur.hi_open
                lo_open = cur.lo_open and not (iv.lo == cur.lo and not iv.lo_open)
                out[-1] = Interval(cur.lo, hi, lo_open, hi_open)
                continue
        out.append(iv)
    return out


@dataclass(frozen=True)
class GammaRangeParams:
    sigma: float
    L: float
    eta1: float
    eta2: float

    def __post_init__(self):
        for name in ("sigma", "L", "eta1", "eta2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise InvalidInputError(f"{name} must be a finite number")
        if not self.sigma > 0 or not self.L > 0:
            raise InvalidInputError("sigma and L must be positive")
        if self.sigma > self.L:
            raise InvalidInputError("sigma must not exceed L")
        if not self.eta1 > 2:
            raise InvalidInputError("eta1 must exceed 2")
        if not self.eta2 > 2:
            raise InvalidInputError("eta2 must exceed 2")

    def to_json(self):
        return {"sigma": self.sigma, "L": self.L, "eta1": self.eta1, "eta2": self.eta2}


def low_upper(sigma, eta2):
    """Right end of the small-gamma interval (open)."""
    a = sigma * (eta2 - 2.0) / (4.0 * eta2)
    root = a + math.sqrt(a * a + sigma * sigma * (eta2 - 2.0) / (4.0 * eta2))
    return min(4.0 * sigma / eta2, root)


def mid_bounds(sigma, L, eta1):
    """``(lo, hi)`` of the middle interval ``(lo, hi]``; may be empty."""
    lo = math.sqrt(sigma * sigma + 2.0 * L * L / (eta1 - 2.0)) - sigma
    return lo, 4.0 * sigma / eta1


def high_lower(sigma, L):
    """Left end of the large-gamma half line (open)."""
    return (math.sqrt(sigma * sigma + 8.0 * L * L) - sigma) / 2.0


def admissible_pieces(params: GammaRangeParams):
    """The defining intervals before union, as ``{name: Interval}``."""
    s, L = params.sigma, params.L
    pieces = {"low": Interval(0.0, low_upper(s, params.eta2))}
    lo, hi = mid_bounds(s, L, params.eta1)
    if lo < hi:
        pieces["mid"] = Interval(lo, hi, lo_open=True, hi_open=False)
    pieces["high"] = Interval(high_lower(s, L), math.inf)
    return pieces


def admissible_gamma_range(params: GammaRangeParams) -> IntervalUnion:
    return IntervalUnion(admissible_pieces(params).values())


def canonical_regime_coverage(gamma):
    """Certified regimes for the canonical third block: subset of high/mid/low."""
    if not gamma > 0:
        raise InvalidInputError("gamma must be positive")
    out = set()
    if gamma > 1.0:
        out.add("high")
    if SQRT2_M1 < gamma <= 1.0:
        out.add("mid")
    if gamma <= 0.5:
        out.add("low")
    return out


# name used by the public operation list
canonical_theorem_coverage = canonical_regime_coverage


def range_to_json(params, rng):
    return {"params": params.to_json(), "range": rng.to_json(), "display": rng.display()}
