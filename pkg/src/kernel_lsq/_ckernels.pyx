"""Compiled inner loops: zonal matrix fills and Legendre summation.

Every function here has a numpy twin in ``_purekernels`` with the same
signature; ``_backend`` picks one at import time.
"""
import numpy as np

from libc.math cimport log, pow, sqrt


def zonal_table_matrix(const double[:, ::1] X, const double[:, ::1] Y,
                       const double[:, ::1] coef):
    """Fill ``out[i, j] = kappa(X[i] . Y[j])`` from a cubic table in w.

    ``coef`` has one row per interval of the uniform grid on w in [0, 1],
    with w = ((1 - t) / 2) ** 0.25, highest power first.
    """
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n = Y.shape[0]
    cdef Py_ssize_t nint = coef.shape[0]
    cdef double fn = <double>nint
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double x0, x1, x2, t, w, dx
    for i in range(m):
        x0 = X[i, 0]
        x1 = X[i, 1]
        x2 = X[i, 2]
        for j in range(n):
            t = x0 * Y[j, 0] + x1 * Y[j, 1] + x2 * Y[j, 2]
            if t > 1.0:
                t = 1.0
            elif t < -1.0:
                t = -1.0
            w = sqrt(sqrt(0.5 * (1.0 - t)))
            k = <Py_ssize_t>(w * fn)
            if k >= nint:
                k = nint - 1
            dx = w - k / fn
            o[i, j] = ((coef[k, 0] * dx + coef[k, 1]) * dx + coef[k, 2]) * dx + coef[k, 3]
    return out


def surface_spline_matrix(const double[:, ::1] X, const double[:, ::1] Y,
                          double power, bint log_branch):
    """Fill ``out[i, j] = (1 - t)^power [log(1 - t)]`` with t = X[i] . Y[j]."""
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n = Y.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, e
    cdef double u, v, x0, x1, x2
    # integer and half-integer powers avoid pow()
    cdef int twice = <int>(2.0 * power)
    cdef bint exact = twice == 2.0 * power and twice <= 16
    cdef int whole = twice // 2
    cdef bint half = twice % 2 == 1
    for i in range(m):
        x0 = X[i, 0]
        x1 = X[i, 1]
        x2 = X[i, 2]
        for j in range(n):
            u = 1.0 - (x0 * Y[j, 0] + x1 * Y[j, 1] + x2 * Y[j, 2])
            if u <= 0.0:
                o[i, j] = 0.0
                continue
            if u > 2.0:
                u = 2.0
            if exact:
                v = sqrt(u) if half else 1.0
                for e in range(whole):
                    v *= u
            else:
                v = pow(u, power)
            if log_branch:
                v *= log(u)
            o[i, j] = v
    return out


def legendre_clenshaw(const double[::1] c, const double[::1] t):
    """Evaluate sum_l c[l] P_l(t) by backward recurrence."""
    cdef Py_ssize_t nt = t.shape[0]
    cdef Py_ssize_t deg = c.shape[0] - 1
    out = np.empty(nt, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, k
    cdef double x, b0, b1, b2
    for i in range(nt):
        x = t[i]
        if deg == 0:
            o[i] = c[0]
            continue
        b1 = 0.0
        b2 = 0.0
        for k in range(deg, 0, -1):
            b0 = c[k] + (2.0 * k + 1.0) / (k + 1.0) * x * b1 - (k + 1.0) / (k + 2.0) * b2
            b2 = b1
            b1 = b0
        o[i] = c[0] + x * b1 - 0.5 * b2
    return out
