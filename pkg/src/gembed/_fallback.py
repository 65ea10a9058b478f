"""Pure numpy/scipy versions of the routines in ``_core.pyx``.

Arithmetic is ordered exactly as in the compiled kernels so both backends return
identical bits on the same input.
"""

import numpy as np
import scipy.sparse as sp

_BLOCK = 256


def knn_rows(X, k, start, stop, out_idx, out_d2):
    """Fill rows ``start:stop`` of the kNN tables (ties toward lower index)."""
    n, dim = X.shape
    for lo in range(start, stop, _BLOCK):
        hi = min(lo + _BLOCK, stop)
        acc = np.zeros((hi - lo, n))
        for f in range(dim):
            diff = X[lo:hi, f, None] - X[None, :, f]
            acc = acc + diff * diff
        rows = np.arange(hi - lo)
        acc[rows, np.arange(lo, hi)] = np.inf
        kth = np.partition(acc, k - 1, axis=1)[:, k - 1]
        for r in range(hi - lo):
            cand = np.flatnonzero(acc[r] <= kth[r])
            order = np.argsort(acc[r, cand], kind="stable")[:k]
            out_idx[lo + r] = cand[order]
            out_d2[lo + r] = acc[r, cand[order]]


def cheb_apply(indptr, indices, data, X, coeffs, scale):
    """Return ``sum_j c_j T_j(scale * L - I) X`` with the first coefficient halved."""
    n = X.shape[0]
    L = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    m = len(coeffs) - 1
    t0 = np.array(X, dtype=np.float64, copy=True)
    out = (0.5 * coeffs[0]) * t0
    if m >= 1:
        t1 = scale * (L @ t0) - t0
        out = out + coeffs[1] * t1
        for j in range(2, m + 1):
            t2 = 2.0 * (scale * (L @ t1) - t1) - t0
            out = out + coeffs[j] * t2
            t0, t1 = t1, t2
    return out
