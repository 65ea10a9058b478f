# cython: language_level=3
"""Compiled hot loops: exact kNN search and the CSR Chebyshev recurrence.

Both routines perform their floating-point operations in exactly the order used
by :mod:`gembed._fallback` so the two backends agree bit for bit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def knn_rows(const double[:, ::1] X, Py_ssize_t k, Py_ssize_t start, Py_ssize_t stop,
             cnp.intp_t[:, ::1] out_idx, double[:, ::1] out_d2):
    """Fill rows ``start:stop`` of the k-nearest-neighbour tables.

    Neighbours are sorted by squared distance, ties broken toward the lower index.
    """
    cdef Py_ssize_t n = X.shape[0], dim = X.shape[1]
    cdef Py_ssize_t i, j, f, pos
    cdef double acc, diff
    with nogil:
        for i in range(start, stop):
            for pos in range(k):
                out_d2[i, pos] = INFINITY
                out_idx[i, pos] = -1
            for j in range(n):
                if j == i:
                    continue
                acc = 0.0
                for f in range(dim):
                    diff = X[i, f] - X[j, f]
                    acc = acc + diff * diff
                # j grows monotonically, so an equal distance never displaces an earlier index
                if acc < out_d2[i, k - 1]:
                    pos = k - 1
                    while pos > 0 and out_d2[i, pos - 1] > acc:
                        out_d2[i, pos] = out_d2[i, pos - 1]
                        out_idx[i, pos] = out_idx[i, pos - 1]
                        pos -= 1
                    out_d2[i, pos] = acc
                    out_idx[i, pos] = j


cdef void _csr_cheb_step(const cnp.intp_t[::1] indptr, const cnp.intp_t[::1] indices,
                         const double[::1] data, double scale,
                         double[:, ::1] cur, double[:, ::1] prev, double[:, ::1] nxt,
                         bint first) noexcept nogil:
    cdef Py_ssize_t n = cur.shape[0], nb = cur.shape[1]
    cdef Py_ssize_t i, jj, b
    cdef double acc, t
    for i in range(n):
        for b in range(nb):
            acc = 0.0
            for jj in range(indptr[i], indptr[i + 1]):
                acc = acc + data[jj] * cur[indices[jj], b]
            t = scale * acc - cur[i, b]
            if first:
                nxt[i, b] = t
            else:
                nxt[i, b] = 2.0 * t - prev[i, b]


def cheb_apply(const cnp.intp_t[::1] indptr, const cnp.intp_t[::1] indices,
               const double[::1] data, const double[:, ::1] X,
               const double[::1] coeffs, double scale):
    """Return ``sum_j c_j T_j(scale * L - I) X`` with the first coefficient halved."""
    cdef Py_ssize_t n = X.shape[0], nb = X.shape[1], m = coeffs.shape[0] - 1
    cdef Py_ssize_t i, b, j
    cdef double c
    out_arr = np.empty((n, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, ::1] t0 = np.array(X, dtype=np.float64, copy=True)
    cdef double[:, ::1] t1 = np.empty((n, nb), dtype=np.float64)
    cdef double[:, ::1] t2 = np.empty((n, nb), dtype=np.float64)
    cdef double[:, ::1] tmp
    with nogil:
        c = 0.5 * coeffs[0]
        for i in range(n):
            for b in range(nb):
                out[i, b] = c * t0[i, b]
        if m >= 1:
            _csr_cheb_step(indptr, indices, data, scale, t0, t0, t1, True)
            c = coeffs[1]
            for i in range(n):
                for b in range(nb):
                    out[i, b] = out[i, b] + c * t1[i, b]
        for j in range(2, m + 1):
            _csr_cheb_step(indptr, indices, data, scale, t1, t0, t2, False)
            c = coeffs[j]
            for i in range(n):
                for b in range(nb):
                    out[i, b] = out[i, b] + c * t2[i, b]
            tmp = t0
            t0 = t1
            t1 = t2
            t2 = tmp
    return out_arr
