# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the dual coordinate descent solvers.

Each function runs one sweep over the given coordinate order and returns the
largest projected-gradient magnitude seen during the sweep. State (alpha and
the maintained primal/decision vector) is updated in place. No reordering of
the floating-point operations is permitted here; the pure-python twin in
``_dcd_py`` performs the same updates.
"""

from libc.stdint cimport int64_t


def linear_epoch(const double[:, ::1] X, const double[::1] y,
                 const double[::1] qdiag, double[::1] alpha, double[::1] w,
                 const int64_t[::1] order, double C):
    """One sweep for the explicit-feature dual; w tracks sum_i alpha_i y_i X[i]."""
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double g, pg, a_old, a_new, delta
    cdef double maxpg = 0.0
    with nogil:
        for k in range(n):
            i = order[k]
            g = 0.0
            for j in range(d):
                g += w[j] * X[i, j]
            g = y[i] * g - 1.0
            a_old = alpha[i]
            if a_old == 0.0:
                pg = g if g < 0.0 else 0.0
            elif a_old == C:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if pg != 0.0:
                a_new = a_old - g / qdiag[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > C:
                    a_new = C
                alpha[i] = a_new
                delta = (a_new - a_old) * y[i]
                if delta != 0.0:
                    for j in range(d):
                        w[j] += delta * X[i, j]
            if pg < 0.0:
                pg = -pg
            if pg > maxpg:
                maxpg = pg
    return maxpg


def kernel_epoch(const double[:, ::1] Kp, const double[::1] y,
                 double[::1] alpha, double[::1] u,
                 const int64_t[::1] order, double C):
    """One sweep for the precomputed-kernel dual; u tracks Kp @ (alpha * y).

    Kp is the kernel matrix with the bias fold (K + 1), symmetric, so row i
    doubles as column i.
    """
    cdef Py_ssize_t n = Kp.shape[0]
    cdef Py_ssize_t nord = order.shape[0]
    cdef Py_ssize_t k, i, j
    cdef double g, pg, a_old, a_new, delta
    cdef double maxpg = 0.0
    with nogil:
        for k in range(nord):
            i = order[k]
            g = y[i] * u[i] - 1.0
            a_old = alpha[i]
            if a_old == 0.0:
                pg = g if g < 0.0 else 0.0
            elif a_old == C:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            if pg != 0.0:
                a_new = a_old - g / Kp[i, i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > C:
                    a_new = C
                alpha[i] = a_new
                delta = (a_new - a_old) * y[i]
                if delta != 0.0:
                    for j in range(n):
                        u[j] += delta * Kp[i, j]
            if pg < 0.0:
                pg = -pg
            if pg > maxpg:
                maxpg = pg
    return maxpg
