# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled cyclic coordinate-descent sweep for weighted L1 least squares.

Objective convention: (1/T)||y - X b||^2 + 2 sum_j lam_w[j] |b_j|.
X must be Fortran-ordered so each column is contiguous.
"""

from libc.math cimport INFINITY, fabs


def sweep(const double[::1, :] X, double[::1] r, double[::1] beta,
          const double[::1] col_nsq, const double[::1] lam_w):
    """One full cyclic sweep; updates ``beta`` and the residual ``r`` in place.

    Coordinates with a zero column or an infinite weight are pinned to zero.
    Returns the largest absolute coefficient change of the sweep.
    """
    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t m = X.shape[1]
    cdef Py_ssize_t j, t
    cdef double z, bj, nj, gamma, new, delta, adelta
    cdef double max_delta = 0.0
    with nogil:
        for j in range(m):
            nj = col_nsq[j]
            gamma = lam_w[j]
            bj = beta[j]
            if nj == 0.0 or gamma == INFINITY:
                if bj != 0.0:
                    for t in range(T):
                        r[t] += X[t, j] * bj
                    beta[j] = 0.0
                    adelta = fabs(bj)
                    if adelta > max_delta:
                        max_delta = adelta
                continue
            z = 0.0
            for t in range(T):
                z += X[t, j] * r[t]
            z = z / T + nj * bj
            if z > gamma:
                new = (z - gamma) / nj
            elif z < -gamma:
                new = (z + gamma) / nj
            else:
                new = 0.0
            if new != bj:
                delta = new - bj
                for t in range(T):
                    r[t] -= X[t, j] * delta
                beta[j] = new
                adelta = fabs(delta)
                if adelta > max_delta:
                    max_delta = adelta
    return max_delta
