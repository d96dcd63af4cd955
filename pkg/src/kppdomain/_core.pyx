# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: CSR products, IC(0) factorization and preconditioned CG.

Every routine here has a NumPy twin in ``_fallback.py`` with the same
signature and the same floating-point operation order per row.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()

ctypedef cnp.int64_t idx_t


cdef inline void _matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
                         const double[::1] data, const double[::1] x,
                         double[::1] out, double shift) noexcept nogil:
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double acc
    for i in range(n):
        acc = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            acc += data[k] * x[indices[k]]
        out[i] = acc - shift * x[i]


def csr_matvec(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, const double[::1] x, double shift=0.0):
    """Return (A - shift*I) @ x, summing each row in stored order."""
    out = np.empty(indptr.shape[0] - 1, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        _matvec(indptr, indices, data, x, o, shift)
    return out


def ic0_factor(const idx_t[::1] indptr, const idx_t[::1] indices,
               const double[::1] data, double shift=0.0):
    """Zero-fill incomplete Cholesky of A - shift*I.

    A must be symmetric with sorted column indices. Returns the lower factor
    as CSR arrays (indptr, indices, data); the last entry of each row holds
    the reciprocal of the pivot. Raises ``ArithmeticError`` on a nonpositive
    pivot.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k, p, q, j, col, cnt = 0
    lptr_np = np.zeros(n + 1, dtype=np.int64)
    cdef idx_t[::1] lptr = lptr_np
    for i in range(n):
        for k in range(indptr[i], indptr[i + 1]):
            if indices[k] <= i:
                cnt += 1
        lptr[i + 1] = cnt
    lidx_np = np.empty(cnt, dtype=np.int64)
    ldat_np = np.empty(cnt, dtype=np.float64)
    cdef idx_t[::1] lidx = lidx_np
    cdef double[::1] ldat = ldat_np
    cdef double s, piv
    cdef bint bad = False
    with nogil:
        p = 0
        for i in range(n):
            for k in range(indptr[i], indptr[i + 1]):
                if indices[k] <= i:
                    lidx[p] = indices[k]
                    ldat[p] = data[k]
                    if indices[k] == i:
                        ldat[p] -= shift
                    p += 1
        for i in range(n):
            for k in range(lptr[i], lptr[i + 1] - 1):
                col = lidx[k]
                # dot of row i and row col over columns < col
                s = ldat[k]
                p = lptr[i]
                q = lptr[col]
                while p < k and q < lptr[col + 1] - 1:
                    if lidx[p] == lidx[q]:
                        s -= ldat[p] * ldat[q]
                        p += 1
                        q += 1
                    elif lidx[p] < lidx[q]:
                        p += 1
                    else:
                        q += 1
                ldat[k] = s * ldat[lptr[col + 1] - 1]
            j = lptr[i + 1] - 1
            piv = ldat[j]
            for k in range(lptr[i], j):
                piv -= ldat[k] * ldat[k]
            if piv <= 0.0:
                bad = True
                break
            ldat[j] = 1.0 / sqrt(piv)
    if bad:
        raise ArithmeticError("nonpositive pivot in IC(0)")
    return lptr_np, lidx_np, ldat_np


cdef inline void _ic0_apply(const idx_t[::1] lptr, const idx_t[::1] lidx,
                            const double[::1] ldat, const double[::1] r,
                            double[::1] z) noexcept nogil:
    cdef Py_ssize_t n = lptr.shape[0] - 1
    cdef Py_ssize_t i, k, d
    cdef double acc
    for i in range(n):
        acc = r[i]
        d = lptr[i + 1] - 1
        for k in range(lptr[i], d):
            acc -= ldat[k] * z[lidx[k]]
        z[i] = acc * ldat[d]
    for i in range(n - 1, -1, -1):
        d = lptr[i + 1] - 1
        z[i] = z[i] * ldat[d]
        for k in range(lptr[i], d):
            z[lidx[k]] -= ldat[k] * z[i]


def ic0_apply(const idx_t[::1] lptr, const idx_t[::1] lidx,
              const double[::1] ldat, const double[::1] r):
    """Return (L L^T)^{-1} r."""
    z = np.empty(lptr.shape[0] - 1, dtype=np.float64)
    cdef double[::1] zz = z
    with nogil:
        _ic0_apply(lptr, lidx, ldat, r, zz)
    return z


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


def pcg(const idx_t[::1] indptr, const idx_t[::1] indices,
        const double[::1] data, const double[::1] b, double[::1] x,
        double shift, const idx_t[::1] lptr, const idx_t[::1] lidx,
        const double[::1] ldat, double rtol, Py_ssize_t maxiter):
    """IC(0)-preconditioned CG on (A - shift*I) x = b, updating x in place.

    Stops when ||r||_2 <= rtol * ||b||_2. Returns (iterations, final ||r||_2).
    """
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, it = 0
    r_np = np.empty(n)
    z_np = np.empty(n)
    p_np = np.empty(n)
    q_np = np.empty(n)
    cdef double[::1] r = r_np, z = z_np, p = p_np, q = q_np
    cdef double bnorm, rnorm, rz, rz_new, alpha, beta, pq
    with nogil:
        bnorm = sqrt(_dot(b, b))
        _matvec(indptr, indices, data, x, q, shift)
        for i in range(n):
            r[i] = b[i] - q[i]
        rnorm = sqrt(_dot(r, r))
        if bnorm == 0.0:
            for i in range(n):
                x[i] = 0.0
            rnorm = 0.0
        else:
            _ic0_apply(lptr, lidx, ldat, r, z)
            for i in range(n):
                p[i] = z[i]
            rz = _dot(r, z)
            while rnorm > rtol * bnorm and it < maxiter:
                _matvec(indptr, indices, data, p, q, shift)
                pq = _dot(p, q)
                if pq <= 0.0:
                    break
                alpha = rz / pq
                for i in range(n):
                    x[i] += alpha * p[i]
                    r[i] -= alpha * q[i]
                it += 1
                rnorm = sqrt(_dot(r, r))
                _ic0_apply(lptr, lidx, ldat, r, z)
                rz_new = _dot(r, z)
                beta = rz_new / rz
                rz = rz_new
                for i in range(n):
                    p[i] = z[i] + beta * p[i]
    return it, rnorm
