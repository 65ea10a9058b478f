"""Distances between graph vertices built from localized atoms.

``lkd`` (localized kernel distance) is one minus the cosine similarity of two
atoms. ``kdd`` (kernelized diffusion distance) is the Euclidean distance between
them. Both accept either a :class:`~gembed.spectral.ChebyshevFilter` (sparse
path) or, with ``mode="dense"``, compute the spectral sums directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import spectral
from .errors import DegenerateKernel, InvalidParameter

MODES = ("chebyshev", "dense")
LKD_TOL = 1e-8


@dataclass(frozen=True)
class PairwiseDistanceRequest:
    i: int
    j: int
    kernel: object
    mode: str = "chebyshev"

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameter(f"mode must be one of {MODES}")


def _kernel_of(filt):
    return filt.kernel if isinstance(filt, spectral.ChebyshevFilter) else filt


def _atoms(L, filt, vertices, mode):
    """``N x len(vertices)`` atom matrix on either path."""
    if mode == "dense":
        lam, U = spectral.dense_spectrum(L)
        g = spectral.on_spectrum(_kernel_of(filt), lam)
        return (U * g) @ U[vertices].T
    if mode != "chebyshev":
        raise InvalidParameter(f"mode must be one of {MODES}")
    if not isinstance(filt, spectral.ChebyshevFilter):
        filt = spectral.make_filter(L, filt, spectral.ORACLE_ORDER)
    return spectral.localize_many(L, filt, vertices)


def lkd(L, filt, i, j, mode="chebyshev", clamp=True, norms2=None):
    """Localized kernel distance ``1 - <T_i g, T_j g> / (||T_i g|| ||T_j g||)``.

    ``norms2`` may carry precomputed ``||T_v g||^2`` (e.g. stochastic estimates)
    indexed by vertex; otherwise the norms come from the atoms themselves.
    With ``clamp=False`` the raw value (possibly a hair outside ``[0, 1]``) is
    returned.
    """
    for v in (i, j):
        spectral._check_vertex(L, v)
    A = _atoms(L, filt, [i, j], mode)
    ai, aj = A[:, 0], A[:, 1]
    if norms2 is None:
        ni, nj = float(ai @ ai), float(aj @ aj)
    else:
        ni, nj = float(norms2[i]), float(norms2[j])
    if ni <= 0 or nj <= 0:
        raise DegenerateKernel(f"zero atom norm at vertex {i if ni <= 0 else j}")
    d = 1.0 - float(ai @ aj) / np.sqrt(ni * nj)
    if not clamp:
        return d
    return float(min(1.0, max(0.0, d)))


def kdd(L, filt, i, j, mode="chebyshev"):
    """Kernelized diffusion distance ``||T_i g - T_j g||``.

    The dense mode evaluates ``sqrt(sum_l g(l)^2 (u_l[i] - u_l[j])^2)``.
    """
    for v in (i, j):
        spectral._check_vertex(L, v)
    if mode == "dense":
        lam, U = spectral.dense_spectrum(L)
        g = spectral.on_spectrum(_kernel_of(filt), lam)
        diff = U[i] - U[j]
        return float(np.sqrt(np.sum((g * diff) ** 2)))
    A = _atoms(L, filt, [i, j], mode)
    return float(np.linalg.norm(A[:, 0] - A[:, 1]))


def kdd_matrix(L, filt, vertices, mode="chebyshev"):
    """All pairwise ``kdd`` values among ``vertices``; exact zero diagonal."""
    vertices = np.asarray(vertices, dtype=np.intp)
    if vertices.size == 1:
        return np.zeros((1, 1))
    A = _atoms(L, filt, vertices, mode)
    return squareform(pdist(A.T))
