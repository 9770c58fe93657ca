"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize_scalar

CLARABEL_TIGHT = dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)


def golden_prox_abs(v, tau):
    """argmin_z tau|z| + (z - v)^2 / 2 by golden-section search, one coordinate at a time."""
    out = np.empty(len(v))
    for j, vj in enumerate(v):
        fun = lambda z, vj=vj: tau * abs(z) + 0.5 * (z - vj) ** 2
        res = minimize_scalar(fun, bracket=(vj - tau - 1.0, vj + tau + 1.0), method="golden",
                              options={"xtol": 1e-12})
        out[j] = res.x
    return out


def cvx_prox_nuclear(V, tau):
    Z = cp.Variable(V.shape)
    prob = cp.Problem(cp.Minimize(tau * cp.normNuc(Z) + 0.5 * cp.sum_squares(Z - V)))
    prob.solve(solver=cp.CLARABEL, **CLARABEL_TIGHT)
    return Z.value


def nuclear_prox_certificate(V, Z, tau):
    """How far ``Z`` is from satisfying ``V - Z in tau * subdiff ||Z||_*``.

    Returns ``(spectral excess, duality gap)``: ``||V - Z||_2 <= tau`` and
    ``<V - Z, Z> = tau ||Z||_*`` together characterize the prox point.
    """
    G = V - Z
    spec = np.linalg.norm(G, 2) - tau
    gap = abs(np.sum(G * Z) - tau * np.linalg.norm(Z, "nuc"))
    return max(spec, 0.0), gap


def clamp_by_cases(v, lo, hi):
    """Per-coordinate minimizer of (z - v)^2 on [lo, hi], by explicit case analysis."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    lo = np.broadcast_to(lo, v.shape)
    hi = np.broadcast_to(hi, v.shape)
    out = []
    for vj, l, h in zip(v, lo, hi):
        if vj < l:
            out.append(l)
        elif vj > h:
            out.append(h)
        else:
            out.append(vj)
    return np.array(out, dtype=float)


def soft_threshold(v, t):
    v = np.asarray(v, dtype=float)
    return np.where(v > t, v - t, np.where(v < -t, v + t, 0.0))


def materialize(bmap):
    """Dense matrix of a block map, built column by column from ``apply``."""
    cols = [bmap.apply(e) for e in np.eye(bmap.input_dim)]
    return np.array(cols).T if cols else np.zeros((bmap.output_dim, 0))


def catalog_value(kind, beta, z, shape=None):
    z = np.asarray(z, dtype=float)
    if kind == "l1":
        return beta * sum(abs(t) for t in z)
    if kind == "nuclear":
        return beta * float(np.sum(np.linalg.svd(z.reshape(shape), compute_uv=False)))
    if kind == "squared_l2":
        return 0.5 * beta * sum(t * t for t in z)
    return 0.0


def cvx_block_update(A, kind, beta, others, gamma, shape=None):
    """argmin_x beta f(x) + gamma/2 ||A x + others||^2 with a conic solver."""
    n = A.shape[1]
    x = cp.Variable(n)
    if kind == "l1":
        reg = beta * cp.norm1(x)
    elif kind == "nuclear":
        reg = beta * cp.normNuc(cp.reshape(x, shape, order="C"))
    else:
        raise ValueError(kind)
    prob = cp.Problem(cp.Minimize(reg + 0.5 * gamma * cp.sum_squares(A @ x + others)))
    prob.solve(solver=cp.CLARABEL, **CLARABEL_TIGHT)
    return x.value


def cvx_rlsd(A1, kind1, beta1, A2, kind2, beta2, b, shape=None, Q=None, q=None):
    """Solve the full decomposition problem directly with a conic solver."""
    x1 = cp.Variable(A1.shape[1])
    x2 = cp.Variable(A2.shape[1])
    r = b - A1 @ x1 - A2 @ x2

    def reg(kind, beta, x):
        if kind == "l1":
            return beta * cp.norm1(x)
        if kind == "nuclear":
            return beta * cp.normNuc(cp.reshape(x, shape, order="C"))
        raise ValueError(kind)

    fit = 0.5 * cp.sum_squares(r) if Q is None else 0.5 * cp.quad_form(r, Q) + q @ r
    prob = cp.Problem(cp.Minimize(reg(kind1, beta1, x1) + reg(kind2, beta2, x2) + fit))
    prob.solve(solver=cp.CLARABEL, **CLARABEL_TIGHT)
    return prob.value, x1.value, x2.value
