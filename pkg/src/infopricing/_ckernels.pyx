# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np

from libc.math cimport sqrt, exp, log1p


def whk_poly_eval(x, tau, W, s_nodes, hz, hw, coeffs):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(tau, dtype=np.float64)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s_nodes, dtype=np.float64)
    cdef const double[::1] hzv = np.ascontiguousarray(hz, dtype=np.float64)
    cdef const double[::1] hwv = np.ascontiguousarray(hw, dtype=np.float64)
    cdef const double[::1] cv = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], nl = sv.shape[0], nh = hzv.shape[0]
    cdef Py_ssize_t nc = cv.shape[0]
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, k, p
    cdef double acc, inner, m, sd, y, fy
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(nl):
                m = (1.0 - sv[j]) * xv[i]
                sd = sqrt(tv[i] * sv[j] * (1.0 - sv[j]))
                inner = 0.0
                for k in range(nh):
                    y = m + sd * hzv[k]
                    fy = cv[nc - 1]
                    for p in range(nc - 2, -1, -1):
                        fy = fy * y + cv[p]
                    inner = inner + hwv[k] * fy
                acc = acc + Wv[i, j] * inner
            ov[i] = acc
    return out


def bridge_fill(z, grid, double horizon, double start_t, start_val):
    cdef const double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t npath = zv.shape[0], nstep = zv.shape[1]
    prev_arr = np.ascontiguousarray(
        np.broadcast_to(np.asarray(start_val, dtype=np.float64), (npath,)), dtype=np.float64).copy()
    cdef double[::1] pv = prev_arr
    out = np.empty((npath, nstep))
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, k
    cdef double prev_t, tk, left, ratio, sd, var, cur
    with nogil:
        for i in range(npath):
            prev_t = start_t
            cur = pv[i]
            for k in range(nstep):
                tk = gv[k]
                left = horizon - prev_t
                if left <= 0.0:
                    cur = 0.0
                else:
                    ratio = (horizon - tk) / left
                    var = (tk - prev_t) * (horizon - tk) / left
                    if var < 0.0:
                        var = 0.0
                    cur = ratio * cur + sqrt(var) * zv[i, k]
                ov[i, k] = cur
                prev_t = tk
    return out


cdef inline double _softplus(double v) nogil:
    # log(1 + exp(v)) without overflow
    if v > 0.0:
        return v + log1p(exp(-v))
    return log1p(exp(v))


def digital_spreads(xi, times, double T, double sigma, double x0, double x1,
                    double log_odds, double cap):
    cdef const double[:, ::1] xv = np.ascontiguousarray(xi, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t npath = xv.shape[0], nstep = xv.shape[1]
    spread = np.empty((npath, nstep))
    capped = np.zeros((npath, nstep), dtype=np.uint8)
    cdef double[:, ::1] sv = spread
    cdef unsigned char[:, ::1] cv = capped
    cdef Py_ssize_t i, k
    cdef double ratio, logit, s, a = sigma * (x1 - x0), b = 0.5 * sigma * sigma * (x1 * x1 - x0 * x0)
    with nogil:
        for i in range(npath):
            for k in range(nstep):
                ratio = T / (T - tv[k])
                logit = log_odds + ratio * (a * xv[i, k] - b * tv[k])
                s = _softplus(-logit) / (T - tv[k])
                if s <= cap:
                    sv[i, k] = s
                else:
                    sv[i, k] = cap
                    cv[i, k] = 1
    return spread, capped
