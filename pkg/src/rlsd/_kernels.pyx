# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elementwise kernels.

Mirrors ``_kernels_py`` function for function. Loops are fused so each call
makes a single pass over its inputs without numpy temporaries.
"""

import numpy as np

from libc.math cimport copysign, fabs, fmax, fmin, sqrt, INFINITY

cdef enum:
    KIND_ZERO = 0
    KIND_L1 = 1
    KIND_SQUARED_L2 = 2


cdef inline double _soft(double v, double tau) noexcept nogil:
    return copysign(fmax(fabs(v) - tau, 0.0), v)


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    return fmin(fmax(v, lo), hi)


cdef inline double _prox1(int kind, double v, double tau, double beta,
                          double lo, double hi) noexcept nogil:
    cdef double z
    if kind == KIND_L1:
        z = _soft(v, tau * beta)
    elif kind == KIND_SQUARED_L2:
        z = v / (1.0 + tau * beta)
    else:
        z = v
    return _clamp(z, lo, hi)


_ONE = np.zeros(1)


def _bound(a, Py_ssize_t n):
    """``(vector, is_scalar, scalar)``; scalars avoid an n-length allocation."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 0:
        return _ONE, True, float(arr)
    arr = np.ascontiguousarray(arr.reshape(-1))
    if arr.shape[0] != n:
        raise ValueError("bound length does not match the input")
    return arr, False, 0.0


def soft_threshold(v, double tau):
    arr = np.asarray(v, dtype=np.float64)
    shape = arr.shape
    cdef const double[::1] vv = np.ascontiguousarray(arr.reshape(-1))
    cdef Py_ssize_t n = vv.shape[0], i
    out = np.empty(n)
    cdef double[::1] oo = out
    with nogil:
        for i in range(n):
            oo[i] = _soft(vv[i], tau)
    return out.reshape(shape)


def clamp(v, lo, hi):
    arr = np.asarray(v, dtype=np.float64)
    shape = arr.shape
    cdef const double[::1] vv = np.ascontiguousarray(arr.reshape(-1))
    cdef Py_ssize_t n = vv.shape[0], i
    lv, ls, lsc = _bound(lo, n)
    hv, hs, hsc = _bound(hi, n)
    cdef const double[::1] ll = lv
    cdef const double[::1] hh = hv
    cdef bint l_s = ls, h_s = hs
    cdef double l_c = lsc, h_c = hsc
    out = np.empty(n)
    cdef double[::1] oo = out
    with nogil:
        for i in range(n):
            oo[i] = _clamp(vv[i], (l_c if l_s else ll[i]), (h_c if h_s else hh[i]))
    return out.reshape(shape)


def prox_separable(int kind, v, double tau, double beta, lo, hi):
    if kind not in (KIND_ZERO, KIND_L1, KIND_SQUARED_L2):
        raise ValueError(f"unknown separable kind {kind}")
    arr = np.asarray(v, dtype=np.float64)
    shape = arr.shape
    cdef const double[::1] vv = np.ascontiguousarray(arr.reshape(-1))
    cdef Py_ssize_t n = vv.shape[0], i
    lv, ls, lsc = _bound(lo, n)
    hv, hs, hsc = _bound(hi, n)
    cdef const double[::1] ll = lv
    cdef const double[::1] hh = hv
    cdef bint l_s = ls, h_s = hs
    cdef double l_c = lsc, h_c = hsc
    out = np.empty(n)
    cdef double[::1] oo = out
    with nogil:
        for i in range(n):
            oo[i] = _prox1(kind, vv[i], tau, beta, (l_c if l_s else ll[i]), (h_c if h_s else hh[i]))
    return out.reshape(shape)


def canonical_x3_dual(lam, s, double gamma):
    cdef const double[::1] ll = np.ascontiguousarray(lam, dtype=np.float64)
    cdef const double[::1] ss = np.ascontiguousarray(s, dtype=np.float64)
    cdef Py_ssize_t n = ll.shape[0], i
    if ss.shape[0] != n:
        raise ValueError("lam and s must have the same length")
    x3 = np.empty(n)
    r = np.empty(n)
    lam_new = np.empty(n)
    cdef double[::1] xx = x3
    cdef double[::1] rr = r
    cdef double[::1] nn = lam_new
    cdef double denom = gamma + 1.0
    with nogil:
        for i in range(n):
            xx[i] = (ll[i] - gamma * ss[i]) / denom
            rr[i] = ss[i] + xx[i]
            nn[i] = ll[i] - gamma * rr[i]
    return x3, r, lam_new


def apg_diag(int kind, double beta, lo, hi, w, o, x0, double gamma,
             double tol, int max_iter):
    if kind not in (KIND_ZERO, KIND_L1, KIND_SQUARED_L2):
        raise ValueError(f"unknown separable kind {kind}")
    cdef const double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef const double[::1] oo = np.ascontiguousarray(o, dtype=np.float64)
    cdef Py_ssize_t n = ww.shape[0], i
    lv, ls, lsc = _bound(lo, n)
    hv, hs, hsc = _bound(hi, n)
    cdef const double[::1] ll = lv
    cdef const double[::1] hh = hv
    cdef bint l_s = ls, h_s = hs
    cdef double l_c = lsc, h_c = hsc
    x_arr = np.array(x0, dtype=np.float64, copy=True).reshape(-1)
    y_arr = x_arr.copy()
    xn_arr = np.empty(n)
    cdef double[::1] x = x_arr
    cdef double[::1] y = y_arr
    cdef double[::1] xn = xn_arr
    cdef double lip = 0.0, t, g, gn, pn, d, dot, gap2, theta = 1.0, theta_n, mom
    cdef double gap = INFINITY
    cdef int it = 0
    for i in range(n):
        if ww[i] * ww[i] > lip:
            lip = ww[i] * ww[i]
    lip *= gamma
    t = 1.0 / lip if lip > 0.0 else 1.0 / gamma
    with nogil:
        for it in range(1, max_iter + 1):
            gap2 = 0.0
            dot = 0.0
            for i in range(n):
                g = gamma * ww[i] * (ww[i] * y[i] + oo[i])
                xn[i] = _prox1(kind, y[i] - t * g, t, beta, (l_c if l_s else ll[i]), (h_c if h_s else hh[i]))
                gn = gamma * ww[i] * (ww[i] * xn[i] + oo[i])
                pn = _prox1(kind, xn[i] - t * gn, t, beta, (l_c if l_s else ll[i]), (h_c if h_s else hh[i]))
                d = xn[i] - pn
                gap2 += d * d
                dot += (y[i] - xn[i]) * (xn[i] - x[i])
            gap = sqrt(gap2)
            if gap <= tol:
                break
            if dot > 0.0:
                theta = 1.0
                for i in range(n):
                    y[i] = xn[i]
                    x[i] = xn[i]
            else:
                theta_n = 0.5 * (1.0 + sqrt(1.0 + 4.0 * theta * theta))
                mom = (theta - 1.0) / theta_n
                for i in range(n):
                    y[i] = xn[i] + mom * (xn[i] - x[i])
                    x[i] = xn[i]
                theta = theta_n
    if gap <= tol:
        return xn_arr, gap, it
    return x_arr, gap, it
