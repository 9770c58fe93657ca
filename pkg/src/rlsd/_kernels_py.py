"""Pure-numpy implementations of the elementwise kernels.

This module is the fallback used when the compiled ``_kernels`` extension is
unavailable. Every function here has an identically named counterpart in
``_kernels.pyx`` with the same argument order and return values.
"""

import math

import numpy as np

KIND_ZERO = 0
KIND_L1 = 1
KIND_SQUARED_L2 = 2


def soft_threshold(v, tau):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def clamp(v, lo, hi):
    return np.minimum(np.maximum(np.asarray(v, dtype=float), lo), hi)


def prox_separable(kind, v, tau, beta, lo, hi):
    """Prox of ``tau * h`` over the box ``[lo, hi]`` for a separable ``h``."""
    if kind == KIND_L1:
        z = soft_threshold(v, tau * beta)
    elif kind == KIND_SQUARED_L2:
        z = np.asarray(v, dtype=float) / (1.0 + tau * beta)
    elif kind == KIND_ZERO:
        z = np.asarray(v, dtype=float)
    else:
        raise ValueError(f"unknown separable kind {kind}")
    return clamp(z, lo, hi)


def canonical_x3_dual(lam, s, gamma):
    """Closed-form x3 step followed by the multiplier step.

    Returns ``(x3, r, lam_new)`` where ``r = s + x3`` is the constraint residual
    and ``lam_new = lam - gamma * r``.
    """
    x3 = (lam - gamma * s) / (gamma + 1.0)
    r = s + x3
    lam_new = lam - gamma * r
    return x3, r, lam_new


def apg_diag(kind, beta, lo, hi, w, o, x0, gamma, tol, max_iter):
    """Accelerated proximal gradient for a diagonal coupling.

    Minimizes ``h(x) + (gamma/2) * ||w * x + o||^2`` over ``lo <= x <= hi``
    with adaptive (gradient-based) momentum restart. Stops once the unit-step
    prox-gradient fixed-point gap drops to ``tol``.

    Returns ``(x, gap, iterations)``; ``iterations == max_iter`` with
    ``gap > tol`` signals non-convergence.
    """
    w = np.asarray(w, dtype=float)
    o = np.asarray(o, dtype=float)
    lip = gamma * float(np.max(w * w)) if w.size else 0.0
    t = 1.0 / lip if lip > 0.0 else 1.0 / gamma
    x = np.array(x0, dtype=float, copy=True)
    y = x.copy()
    theta = 1.0
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = gamma * w * (w * y + o)
        xn = prox_separable(kind, y - t * g, t, beta, lo, hi)
        gn = gamma * w * (w * xn + o)
        pn = prox_separable(kind, xn - t * gn, t, beta, lo, hi)
        gap = math.sqrt(float(np.dot(xn - pn, xn - pn)))
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
    return x, gap, it
