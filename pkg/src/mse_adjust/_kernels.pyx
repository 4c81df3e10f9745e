# cython: language_level=3
"""Compiled twins of the kernels in ``_kernels_py``.

Same contract, same Gram-matrix formulation; the bootstrap kernel
accumulates the weighted Gram in one pass over the rows, skipping zero
counts, and factorizes the small matrix with an in-place Cholesky.
"""

import numpy as np

from libc.math cimport isfinite
from libc.stdlib cimport calloc, free

BACKEND_NAME = "compiled"

cdef double RANK_RTOL = 1e-12


cdef bint _cholesky(double* m, int p) noexcept nogil:
    """In-place lower Cholesky of the symmetric p x p matrix m."""
    cdef int i, j, t
    cdef double acc
    for j in range(p):
        acc = m[j * p + j]
        for t in range(j):
            acc -= m[j * p + t] * m[j * p + t]
        if not (acc > 0.0 and isfinite(acc)):
            return False
        m[j * p + j] = acc ** 0.5
        for i in range(j + 1, p):
            acc = m[i * p + j]
            for t in range(j):
                acc -= m[i * p + t] * m[j * p + t]
            m[i * p + j] = acc / m[j * p + j]
    return True


cdef void _chol_solve(double* l, double* x, int p) noexcept nogil:
    """Solve L L' v = x in place, L lower triangular."""
    cdef int i, t
    cdef double acc
    for i in range(p):
        acc = x[i]
        for t in range(i):
            acc -= l[i * p + t] * x[t]
        x[i] = acc / l[i * p + i]
    for i in range(p - 1, -1, -1):
        acc = x[i]
        for t in range(i + 1, p):
            acc -= l[t * p + i] * x[t]
        x[i] = acc / l[i * p + i]


def ols_tau_rss(double[:, ::1] cov, double[::1] a, double[::1] y):
    """Return (tau, rss_y, rss_a, ok) for the intercept-included fit."""
    cdef int n = cov.shape[0]
    cdef int k = cov.shape[1]
    cdef int p = k + 1
    cdef int i, j, t
    cdef double saa = 0.0, say = 0.0, syy = 0.0, acc

    cdef double* m = <double*> calloc(p * p, sizeof(double))
    cdef double* sa = <double*> calloc(p, sizeof(double))
    cdef double* sy = <double*> calloc(p, sizeof(double))
    cdef double* va = <double*> calloc(p, sizeof(double))
    cdef double* vy = <double*> calloc(p, sizeof(double))
    if m == NULL or sa == NULL or sy == NULL or va == NULL or vy == NULL:
        free(m); free(sa); free(sy); free(va); free(vy)
        raise MemoryError()

    cdef bint ok
    cdef double r_aa = 0.0, r_ay = 0.0, r_yy = 0.0, tau = 0.0, rss_y = 0.0
    with nogil:
        m[0] = n
        for i in range(n):
            sa[0] += a[i]
            sy[0] += y[i]
            saa += a[i] * a[i]
            say += a[i] * y[i]
            syy += y[i] * y[i]
            for j in range(k):
                m[j + 1] += cov[i, j]
                sa[j + 1] += cov[i, j] * a[i]
                sy[j + 1] += cov[i, j] * y[i]
                for t in range(j, k):
                    m[(j + 1) * p + (t + 1)] += cov[i, j] * cov[i, t]
        for j in range(p):
            for t in range(j + 1, p):
                m[t * p + j] = m[j * p + t]
        for j in range(p):
            va[j] = sa[j]
            vy[j] = sy[j]
        ok = _cholesky(m, p)
        if ok:
            _chol_solve(m, va, p)
            _chol_solve(m, vy, p)
            r_aa = saa
            r_ay = say
            r_yy = syy
            for j in range(p):
                r_aa -= sa[j] * va[j]
                r_ay -= sy[j] * va[j]
                r_yy -= sy[j] * vy[j]
            if not (isfinite(r_aa) and r_aa > RANK_RTOL * (saa if saa > 1.0 else 1.0)):
                ok = False
            else:
                tau = r_ay / r_aa
                rss_y = r_yy - r_ay * r_ay / r_aa
                if rss_y < 0.0:
                    rss_y = 0.0
                if r_aa < 0.0:
                    r_aa = 0.0
    free(m); free(sa); free(sy); free(va); free(vy)
    if not ok:
        return float("nan"), float("nan"), float("nan"), False
    return tau, rss_y, r_aa, True


def boot_taus(double[:, ::1] cov, double[::1] a, double[::1] y,
              double[:, ::1] counts):
    """Treatment coefficients under row weightings; (taus, ok) per resample."""
    cdef int n = cov.shape[0]
    cdef int k = cov.shape[1]
    cdef int p = k + 1
    cdef int nb = counts.shape[0]
    cdef int b, i, j, t
    cdef double w, wa, saa, say, acc

    taus_arr = np.full(nb, np.nan)
    ok_arr = np.zeros(nb, dtype=np.uint8)
    cdef double[::1] taus = taus_arr
    cdef unsigned char[::1] okv = ok_arr

    cdef double* m = <double*> calloc(p * p, sizeof(double))
    cdef double* sa = <double*> calloc(p, sizeof(double))
    cdef double* sy = <double*> calloc(p, sizeof(double))
    cdef double* va = <double*> calloc(p, sizeof(double))
    if m == NULL or sa == NULL or sy == NULL or va == NULL:
        free(m); free(sa); free(sy); free(va)
        raise MemoryError()

    cdef bint good
    cdef double r_aa, r_ay
    with nogil:
        for b in range(nb):
            for j in range(p * p):
                m[j] = 0.0
            for j in range(p):
                sa[j] = 0.0
                sy[j] = 0.0
            saa = 0.0
            say = 0.0
            for i in range(n):
                w = counts[b, i]
                if w == 0.0:
                    continue
                m[0] += w
                wa = w * a[i]
                sa[0] += wa
                sy[0] += w * y[i]
                saa += wa * a[i]
                say += wa * y[i]
                for j in range(k):
                    m[j + 1] += w * cov[i, j]
                    sa[j + 1] += w * cov[i, j] * a[i]
                    sy[j + 1] += w * cov[i, j] * y[i]
                    for t in range(j, k):
                        m[(j + 1) * p + (t + 1)] += w * cov[i, j] * cov[i, t]
            for j in range(p):
                for t in range(j + 1, p):
                    m[t * p + j] = m[j * p + t]
            for j in range(p):
                va[j] = sa[j]
            good = _cholesky(m, p)
            if good:
                _chol_solve(m, va, p)
                r_aa = saa
                r_ay = say
                for j in range(p):
                    r_aa -= sa[j] * va[j]
                    r_ay -= sy[j] * va[j]
                if isfinite(r_aa) and r_aa > RANK_RTOL * (saa if saa > 1.0 else 1.0):
                    taus[b] = r_ay / r_aa
                    okv[b] = 1
    free(m); free(sa); free(sy); free(va)
    return taus_arr, ok_arr.astype(bool)
