"""Pure NumPy/SciPy versions of the kernels in ``_core.pyx``.

Used when the compiled extension is unavailable or when
``KPPDOMAIN_PURE_PYTHON=1`` is set. Results agree with the compiled kernels
to solver tolerance, not bitwise: SciPy's triangular solves and BLAS dots do
not promise the same summation order.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular


def csr_matvec(indptr, indices, data, x, shift=0.0):
    n = len(indptr) - 1
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    out = A @ x
    if shift:
        out -= shift * x
    return out


def ic0_factor(indptr, indices, data, shift=0.0):
    n = len(indptr) - 1
    rows = []
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        keep = cols <= i
        vals = np.array(data[lo:hi][keep], dtype=np.float64)
        cols = np.array(cols[keep], dtype=np.int64)
        vals[-1] -= shift
        rows.append((cols, vals))

    for i in range(n):
        cols, vals = rows[i]
        for k in range(len(cols) - 1):
            c = cols[k]
            ccols, cvals = rows[c]
            common, pi, pc = np.intersect1d(
                cols[:k], ccols[:-1], assume_unique=True, return_indices=True
            )
            s = vals[k]
            for a, b in zip(pi, pc):
                s -= vals[a] * cvals[b]
            vals[k] = s * cvals[-1]
        piv = vals[-1] - np.dot(vals[:-1], vals[:-1])
        if piv <= 0.0:
            raise ArithmeticError("nonpositive pivot in IC(0)")
        vals[-1] = 1.0 / np.sqrt(piv)

    lptr = np.zeros(n + 1, dtype=np.int64)
    lptr[1:] = np.cumsum([len(c) for c, _ in rows])
    lidx = np.concatenate([c for c, _ in rows]) if n else np.empty(0, np.int64)
    ldat = np.concatenate([v for _, v in rows]) if n else np.empty(0)
    return lptr, lidx, ldat


def _lower(lptr, lidx, ldat):
    # diagonal slots hold reciprocal pivots
    n = len(lptr) - 1
    vals = np.array(ldat, dtype=np.float64)
    diag = np.asarray(lptr[1:]) - 1
    vals[diag] = 1.0 / vals[diag]
    return sp.csr_matrix((vals, lidx, lptr), shape=(n, n))


def ic0_apply(lptr, lidx, ldat, r):
    L = _lower(lptr, lidx, ldat)
    y = spsolve_triangular(L, r, lower=True)
    return spsolve_triangular(L.T.tocsr(), y, lower=False)


def pcg(indptr, indices, data, b, x, shift, lptr, lidx, ldat, rtol, maxiter):
    n = len(b)
    A = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    L = _lower(lptr, lidx, ldat)
    LT = L.T.tocsr()

    def apply_m(r):
        return spsolve_triangular(LT, spsolve_triangular(L, r, lower=True), lower=False)

    bnorm = np.sqrt(np.dot(b, b))
    if bnorm == 0.0:
        x[:] = 0.0
        return 0, 0.0
    r = b - (A @ x - shift * x)
    rnorm = np.sqrt(np.dot(r, r))
    z = apply_m(r)
    p = z.copy()
    rz = np.dot(r, z)
    it = 0
    while rnorm > rtol * bnorm and it < maxiter:
        q = A @ p - shift * p
        pq = np.dot(p, q)
        if pq <= 0.0:
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        it += 1
        rnorm = np.sqrt(np.dot(r, r))
        z = apply_m(r)
        rz_new = np.dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return it, rnorm
