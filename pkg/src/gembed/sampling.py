"""Random vertex sampling and sample-count bounds.

Two schemes: uniform (``p_i = 1/N``) and adapted (``p_i`` proportional to the
energy ``||T_i g||^2`` of the atom at ``i``). Draws are i.i.d. with replacement.
The bound calculators return the number of draws that guarantees, with
probability ``1 - eps``, either energy preservation of ``g(L) x`` or a minimum
captured energy at each node; ``energy_ratios`` and friends are the harness used
to check those guarantees empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import InvalidInput, InvalidParameter


@dataclass(frozen=True)
class SamplingDistribution:
    p: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise InvalidInput("distribution must be a non-empty vector")
        if (p < 0).any() or not np.all(np.isfinite(p)):
            raise InvalidInput("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvalidInput(f"probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return self.p.size


@dataclass(frozen=True)
class SampleSet:
    """``M`` i.i.d. draws ``omega`` from ``dist`` (repetitions kept).

    ``(M x)_j = x[omega_j]``: the downsampling operator is an index gather.
    """

    omega: np.ndarray
    dist: SamplingDistribution

    @property
    def M(self):
        return self.omega.size

    def unique(self):
        """Distinct vertices in order of first draw."""
        _, first = np.unique(self.omega, return_index=True)
        return self.omega[np.sort(first)]

    def downsample(self, x):
        return np.asarray(x)[self.omega]


def uniform_distribution(n):
    if n < 1:
        raise InvalidParameter("N must be >= 1")
    return SamplingDistribution(np.full(n, 1.0 / n), "uniform")


def adapted_distribution(atom_norms2, total2=None):
    """``p_i = ||T_i g||^2 / sum_j ||T_j g||^2``.

    The empirical sum is used as normalizer; it equals ``||g(lambda)||_2^2``
    (``total2``) when the norms are exact, and keeps ``p`` a distribution when they
    are stochastic estimates.
    """
    a = np.asarray(atom_norms2, dtype=np.float64)
    if (a < 0).any() or not np.all(np.isfinite(a)):
        raise InvalidInput("atom norms must be finite and nonnegative")
    if total2 is not None and not total2 > 0:
        raise InvalidInput("total kernel energy must be positive")
    s = a.sum()
    if s <= 0:
        raise InvalidInput("all atom norms are zero")
    p = a / s
    # absorb rounding so that the 1e-12 normalization check cannot fail
    p[np.argmax(p)] += 1.0 - p.sum()
    return SamplingDistribution(p, "adapted")


def draw_samples(dist, M, seed=None):
    if M < 1:
        raise InvalidParameter("M must be >= 1")
    rng = np.random.default_rng(seed)
    omega = rng.choice(dist.n, size=int(M), replace=True, p=dist.p)
    return SampleSet(omega.astype(np.intp), dist)


# -- bounds ------------------------------------------------------------------


@dataclass(frozen=True)
class BoundInputs:
    """Parameters of the sample-count bounds.

    ``delta`` is the accuracy, ``eps`` the failure probability, ``k`` the kernel
    rank ``||g(lambda)||_0``, ``ratio2`` the concentration
    ``||g||_2^2 / ||g||_inf^2`` and ``a_factor`` the node factor (``>= 1``).
    """

    delta: float
    eps: float
    k: int
    ratio2: float | None = None
    a_factor: float | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise InvalidParameter("delta must lie in (0, 1)")
        if not 0 < self.eps < 1:
            raise InvalidParameter("eps must lie in (0, 1)")
        if self.k < 1:
            raise InvalidParameter("kernel rank k must be >= 1")
        if self.ratio2 is not None and not 1 - 1e-12 <= self.ratio2 <= self.k * (1 + 1e-12):
            raise InvalidParameter(f"ratio2 = {self.ratio2} outside [1, k = {self.k}]")
        if self.a_factor is not None and self.a_factor < 1 - 1e-9:
            raise InvalidParameter("a_factor must be >= 1")


def _ceil(x):
    # guards against 495.0000000000001-style float noise above an exact integer
    r = round(x)
    if abs(x - r) < 1e-9 * max(1.0, abs(x)):
        return max(1, int(r))
    return max(1, math.ceil(x))


def bound_samples_embedding(inputs):
    """Draws needed so that ``M P^-1/2 g(L)`` preserves the energy of every ``g(L)x``."""
    d = inputs.delta
    ratio2 = inputs.k if inputs.ratio2 is None else inputs.ratio2
    return _ceil(2.0 / d**2 * ratio2 * (1 + d / 3) * math.log(2 * inputs.k / inputs.eps))


def bound_samples_node(inputs):
    """Draws needed so every node keeps at least ``1 - delta`` of its atom energy.

    Without an ``a_factor`` the rectangle-kernel value ``a = k`` is used (heuristic).
    """
    d = inputs.delta
    a = inputs.k if inputs.a_factor is None else inputs.a_factor
    return _ceil(2.0 * a / d**2 * (1 + d / 3) * math.log(inputs.k / inputs.eps))


def _support_energy(U, support):
    # ||U_k^* delta_i||^2 for every i
    return (U[:, support] ** 2).sum(axis=1)


def node_a_factors(L, kernel):
    """Node factors ``a_i`` computed on the dense spectrum (one per vertex)."""
    lam, U = spectral.dense_spectrum(L)
    g = spectral.on_spectrum(kernel, lam)
    support = g != 0
    ginf2 = float(np.max(g * g))
    g22 = float(g @ g)
    e_sup = _support_energy(U, support)
    t2 = (U * U) @ (g * g)
    return g22 * ginf2 * e_sup**2 / t2**2


def kernel_stats(L, kernel):
    """``(k, ratio2)``: rank and concentration of ``kernel`` over the spectrum of ``L``."""
    lam, _ = spectral.dense_spectrum(L)
    g = spectral.on_spectrum(kernel, lam)
    k = int(np.count_nonzero(g))
    if k == 0:
        raise InvalidInput("kernel vanishes on the whole spectrum")
    return k, float(g @ g) / float(np.max(g * g))


def bound_samples_node_lowrank(inputs, L, kernel, truncated, nodes=None):
    """Node bound using a low-rank truncation ``g'`` of ``g``.

    The factor uses ``g'`` for the kernel norms and support but ``||T_i g||`` of the
    full kernel; ``k`` is the rank of ``g'``. Returns ``(M, offsets)`` where
    ``offsets[i] = ||T_i(|g'| - |g|)||^2 / ||T_i g||^2`` is how much the guarantee
    degrades at node ``i``.
    """
    lam, U = spectral.dense_spectrum(L)
    g = spectral.on_spectrum(kernel, lam)
    gp = spectral.on_spectrum(truncated, lam)
    if not np.all((gp == 0) | np.isclose(gp, g, rtol=1e-12, atol=0.0)):
        raise InvalidInput("g' is not a truncation of g on this spectrum")
    support = gp != 0
    k = int(support.sum())
    if k == 0:
        raise InvalidInput("truncated kernel has rank 0")
    nodes = np.arange(L.n) if nodes is None else np.asarray(nodes, dtype=np.intp)
    U2 = U[nodes] ** 2
    t2 = U2 @ (g * g)
    a = float(gp @ gp) * float(np.max(gp * gp)) * _support_energy(U[nodes], support) ** 2 / t2**2
    diff = np.abs(gp) - np.abs(g)
    offsets = (U2 @ (diff * diff)) / t2
    M = bound_samples_node(
        BoundInputs(inputs.delta, inputs.eps, k, a_factor=max(1.0, float(a.max())))
    )
    return M, offsets


# -- verification harness ----------------------------------------------------


def energy_ratios(G, dist, omega):
    """``(1/M) ||M P^-1/2 T_i g||^2 / ||T_i g||^2`` for every row ``i`` of ``G``.

    ``G`` holds atoms as rows (``G = g(L)`` for all nodes, or a subset of rows).
    """
    omega = np.asarray(omega, dtype=np.intp)
    p = dist.p[omega]
    if (p == 0).any():
        raise InvalidInput("sample set contains a vertex with zero probability")
    S = G[:, omega] ** 2
    num = (S / p).sum(axis=1) / omega.size
    return num / np.einsum("ij,ij->i", G, G)


def empirical_energy_ratio(L, kernel_or_filter, dist, sample_set, i):
    """Captured-energy ratio at node ``i`` for one sample set.

    A :class:`~gembed.spectral.ChebyshevFilter` localizes by filtering; a kernel
    uses the dense oracle.
    """
    if isinstance(kernel_or_filter, spectral.ChebyshevFilter):
        atom = spectral.localize(L, kernel_or_filter, i).values
    else:
        delta = np.zeros(L.n)
        delta[i] = 1.0
        atom = spectral.exact_filter_dense(L, kernel_or_filter, delta)
    return float(energy_ratios(atom[None, :], dist, sample_set.omega)[0])


def embedding_deviation(gx, dist, omega, ginf2):
    """``|(1/M)||M P^-1/2 g(L)x||^2 - ||g(L)x||^2| / ||g||_inf^2`` for ``gx = g(L)x``."""
    omega = np.asarray(omega, dtype=np.intp)
    est = float((gx[omega] ** 2 / dist.p[omega]).sum()) / omega.size
    return abs(est - float(gx @ gx)) / ginf2
