# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled cyclic coordinate descent for 0.5 ||y - X b||^2 + lam ||b||_1."""
import numpy as np

from libc.math cimport fabs


cdef inline double _soft(double x, double t) noexcept nogil:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


cdef double _update(const double[::1, :] X, double[::1] beta, double[::1] resid,
                    const double[::1] col_sq, double lam, Py_ssize_t j) noexcept nogil:
    cdef Py_ssize_t i, n = X.shape[0]
    cdef double g = 0.0, old = beta[j], new, d
    if col_sq[j] == 0.0:
        return 0.0
    for i in range(n):
        g += X[i, j] * resid[i]
    new = _soft(g + col_sq[j] * old, lam) / col_sq[j]
    d = new - old
    if d != 0.0:
        beta[j] = new
        for i in range(n):
            resid[i] -= d * X[i, j]
    return fabs(d)


def cd_lasso(const double[::1, :] X, double[::1] beta, double[::1] resid,
             const double[::1] col_sq, double lam, double tol, long max_sweeps):
    """Run coordinate descent in place.

    ``resid`` must equal ``y - X @ beta`` on entry and is kept in sync.
    Alternates one full sweep with sweeps restricted to the nonzero set until
    a full sweep moves no coefficient by more than ``tol``.
    Returns ``(sweeps, converged)``.
    """
    cdef Py_ssize_t m = X.shape[1], j, k, n_active
    cdef long sweeps = 0
    cdef bint converged = False
    cdef double change, d
    cdef Py_ssize_t[::1] active = np.empty(m, dtype=np.intp)
    with nogil:
        while sweeps < max_sweeps:
            change = 0.0
            n_active = 0
            for j in range(m):
                d = _update(X, beta, resid, col_sq, lam, j)
                if d > change:
                    change = d
                if beta[j] != 0.0:
                    active[n_active] = j
                    n_active += 1
            sweeps += 1
            if change <= tol:
                converged = True
                break
            while sweeps < max_sweeps:
                change = 0.0
                for k in range(n_active):
                    d = _update(X, beta, resid, col_sq, lam, active[k])
                    if d > change:
                        change = d
                sweeps += 1
                if change <= tol:
                    break
    return sweeps, converged
