"""Spectral kernels, Chebyshev graph filtering and the localization operator.

A kernel ``g`` acts on the graph spectrum; ``g(L) = U g(Lambda) U^T`` is never
formed. Instead ``g`` is interpolated by a Chebyshev series on
``[0, lambda_max_bound]`` and applied with the three-term recurrence, which only
needs sparse matrix products. Dense eigendecomposition helpers (``dense_*``) are
exact oracles for small graphs (N <= 2000).
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from . import _backend
from .errors import GuardExceeded, InvalidKernel, InvalidParameter

DEFAULT_ORDER = 30
ORACLE_ORDER = 100
DENSE_GUARD = 2000
_CHOP = 4 * np.finfo(float).eps  # per interpolation node


# -- kernels -----------------------------------------------------------------


class SpectralKernel:
    """Base class: a function of the Laplacian eigenvalues, vectorized over ``lam``."""

    name = "kernel"

    def __call__(self, lam):
        raise NotImplementedError

    def spec(self):
        """Compact string form accepted by :func:`parse_kernel` (when available)."""
        return self.name

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec()}>"


class HeatKernel(SpectralKernel):
    name = "heat"

    def __init__(self, tau):
        self.tau = float(tau)

    def __call__(self, lam):
        return np.exp(-self.tau * np.asarray(lam, dtype=float))

    def spec(self):
        return f"heat:tau={self.tau:g}"


def smooth_step(x, a=1.0):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``, logistic-like in between."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    # e^{-a/x} / (e^{-a/x} + e^{-a/(1-x)}) rewritten to avoid underflow
    with np.errstate(over="ignore"):
        out[mid] = 1.0 / (1.0 + np.exp(a / xm - a / (1.0 - xm)))
    return out


class ExpWindowKernel(SpectralKernel):
    """Low-pass window ``s((1 - lam) / b_max)`` built on :func:`smooth_step`."""

    name = "window"

    def __init__(self, b_max, a=1.0):
        if b_max <= 0:
            raise InvalidParameter("b_max must be positive")
        self.a = float(a)
        self.b_max = float(b_max)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return smooth_step((1.0 - lam) / self.b_max, self.a)

    def spec(self):
        return f"window:a={self.a:g},bmax={self.b_max:g}"


class RectangleKernel(SpectralKernel):
    name = "rect"

    def __init__(self, cutoff, height=1.0):
        self.cutoff = float(cutoff)
        self.height = float(height)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return np.where(lam <= self.cutoff, self.height, 0.0)

    def spec(self):
        return f"rect:cutoff={self.cutoff:g},height={self.height:g}"


class ConstantKernel(SpectralKernel):
    """``g = c`` everywhere, i.e. ``g(L) = c I``."""

    name = "const"

    def __init__(self, c=1.0):
        self.c = float(c)

    def __call__(self, lam):
        return np.full(np.shape(lam), self.c)

    def spec(self):
        return f"const:c={self.c:g}"


class TabulatedKernel(SpectralKernel):
    """Piecewise-linear kernel through ``(points, values)``; constant beyond the ends."""

    name = "tab"

    def __init__(self, points, values):
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float)
        if points.shape != values.shape or points.ndim != 1 or points.size == 0:
            raise InvalidKernel("tabulated kernel needs matching 1-D points and values")
        order = np.argsort(points, kind="stable")
        self.points = points[order]
        self.values = values[order]

    def __call__(self, lam):
        return np.interp(np.asarray(lam, dtype=float), self.points, self.values)

    def spec(self):
        return f"tab:n={self.points.size}"


class FunctionKernel(SpectralKernel):
    """Wrap an arbitrary vectorized callable."""

    def __init__(self, func, name="func"):
        self.func = func
        self.name = name

    def __call__(self, lam):
        return np.asarray(self.func(np.asarray(lam, dtype=float)), dtype=float) * np.ones(np.shape(lam))


class SquaredKernel(SpectralKernel):
    """``g^2``; its localization gives atom inner products ``<T_i g, T_j g>``."""

    def __init__(self, base):
        self.base = base
        self.name = f"({base.spec()})^2"

    def __call__(self, lam):
        v = self.base(lam)
        return v * v


class TruncatedKernel(TabulatedKernel):
    """Rank-k truncation of ``source`` on a given spectrum (zero off the kept set)."""

    name = "trunc"

    def __init__(self, source, spectrum, keep):
        spectrum = np.asarray(spectrum, dtype=float)
        vals = np.where(keep, source(spectrum), 0.0)
        super().__init__(spectrum, vals)
        self.source = source
        self.spectrum = spectrum
        self.keep = np.asarray(keep, dtype=bool)
        self.exact_values = vals

    @property
    def rank(self):
        return int(np.count_nonzero(self.exact_values))

    def spec(self):
        return f"trunc:k={self.rank}"


def kernel_eval(kernel, lam):
    """Evaluate a kernel at ``lam >= 0`` (scalar in, scalar out)."""
    out = kernel(np.asarray(lam, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def on_spectrum(kernel, lam):
    """``g(lambda_l)`` for every eigenvalue; truncated kernels return their exact table."""
    lam = np.asarray(lam, dtype=float)
    if isinstance(kernel, TruncatedKernel) and kernel.spectrum.shape == lam.shape and np.array_equal(
        kernel.spectrum, lam
    ):
        return kernel.exact_values.copy()
    return np.asarray(kernel(lam), dtype=float)


def parse_kernel(text):
    """Parse CLI kernel strings such as ``heat:tau=5`` or ``window:a=1,bmax=0.2``."""
    name, _, rest = text.strip().partition(":")
    params = {}
    for part in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = part.partition("=")
        if not eq:
            raise InvalidKernel(f"malformed kernel parameter {part!r} in {text!r}")
        try:
            params[key.strip().lower()] = float(val)
        except ValueError:
            raise InvalidKernel(f"kernel parameter {key!r} is not a number") from None
    name = name.lower()
    builders = {
        "heat": (HeatKernel, ("tau",), {}),
        "window": (ExpWindowKernel, ("bmax",), {"a": 1.0}),
        "exp_window": (ExpWindowKernel, ("bmax",), {"a": 1.0}),
        "rect": (RectangleKernel, ("cutoff",), {"height": 1.0}),
        "rectangle": (RectangleKernel, ("cutoff",), {"height": 1.0}),
        "const": (ConstantKernel, (), {"c": 1.0}),
        "constant": (ConstantKernel, (), {"c": 1.0}),
    }
    if name in builders:
        cls, required, optional = builders[name]
        missing = [key for key in required if key not in params]
        unknown = sorted(set(params) - set(required) - set(optional))
        if missing:
            raise InvalidKernel(f"kernel {name!r} is missing parameter {missing[0]!r}")
        if unknown:
            raise InvalidKernel(f"unknown parameters {unknown} for kernel {name!r}")
        args = [params[key] for key in required] + [params.get(key, d) for key, d in optional.items()]
        return cls(*args)
    raise InvalidKernel(f"unknown kernel {name!r}")


# -- Chebyshev filters -------------------------------------------------------


@dataclass(frozen=True)
class ChebyshevFilter:
    """Chebyshev interpolant of ``kernel`` on ``[0, upper]``.

    The series is ``c_0 / 2 + sum_{j>=1} c_j T_j(2 lam / upper - 1)``.
    ``max_error`` is the largest deviation from the kernel on a 1000-point grid.
    """

    coeffs: np.ndarray
    upper: float
    kernel: SpectralKernel
    max_error: float

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def interval(self):
        return (0.0, self.upper)

    def __call__(self, lam):
        x = 2.0 * np.asarray(lam, dtype=float) / self.upper - 1.0
        c = self.coeffs.copy()
        c[0] *= 0.5
        return npcheb.chebval(x, c)


def chebyshev_coeffs(kernel, order=DEFAULT_ORDER, interval=2.0):
    """Interpolate ``kernel`` at ``order + 1`` Chebyshev points of ``[0, upper]``.

    ``interval`` is either the upper bound or a ``(0, upper)`` pair.
    """
    upper = float(interval[1] if np.ndim(interval) else interval)
    if order < 1:
        raise InvalidParameter("Chebyshev order must be >= 1")
    if not upper > 0:
        raise InvalidParameter("interval upper bound must be positive")
    n = order + 1
    theta = np.pi * (np.arange(n) + 0.5) / n
    lam = (np.cos(theta) + 1.0) * (upper / 2.0)
    g = np.asarray(kernel(lam), dtype=float)
    if not np.all(np.isfinite(g)):
        raise InvalidKernel(f"kernel {kernel!r} is not finite on [0, {upper:g}]")
    coeffs = (2.0 / n) * (np.cos(np.outer(np.arange(n), theta)) @ g)
    big = np.abs(coeffs).max(initial=0.0)
    # interpolation noise grows with the node count; drop it so polynomial kernels stay exact
    coeffs[np.abs(coeffs) <= _CHOP * n * big] = 0.0
    grid = np.linspace(0.0, upper, 1000)
    ref = np.asarray(kernel(grid), dtype=float)
    if not np.all(np.isfinite(ref)):
        raise InvalidKernel(f"kernel {kernel!r} is not finite on [0, {upper:g}]")
    c = coeffs.copy()
    c[0] *= 0.5
    err = float(np.abs(npcheb.chebval(2.0 * grid / upper - 1.0, c) - ref).max())
    return ChebyshevFilter(coeffs, upper, kernel, err)


def make_filter(L, kernel, order=DEFAULT_ORDER):
    """Chebyshev filter of ``kernel`` on the spectral interval of ``L``."""
    upper = L.lambda_max_bound if L.lambda_max_bound > 0 else 1.0
    return chebyshev_coeffs(kernel, order, upper)


def squared_filter(filt):
    """Filter for ``g^2`` with the same order and interval as ``filt``."""
    return chebyshev_coeffs(SquaredKernel(filt.kernel), filt.order, filt.upper)


def filter_signal(L, filt, X, backend=None):
    """Compute ``g(L) X`` for one signal (length N) or a batch (N x B).

    Uses ``filt.order`` sparse products per column. The filter interval must
    cover ``[0, L.lambda_max_bound]``, otherwise the recurrence can diverge.
    """
    X = np.asarray(X, dtype=np.float64)
    one = X.ndim == 1
    Xb = X[:, None] if one else X
    if Xb.shape[0] != L.n:
        raise InvalidParameter(f"signal length {Xb.shape[0]} != N = {L.n}")
    if L.lambda_max_bound == 0.0:
        out = float(filt.kernel(np.zeros(1))[0]) * Xb
    else:
        if filt.upper < L.lambda_max_bound:
            raise InvalidParameter(
                f"filter interval [0, {filt.upper:g}] does not cover lambda_max bound {L.lambda_max_bound:g}"
            )
        M = L.matrix
        out = _backend.get(backend).cheb_apply(
            M.indptr.astype(np.intp, copy=False),
            M.indices.astype(np.intp, copy=False),
            np.ascontiguousarray(M.data, dtype=np.float64),
            np.ascontiguousarray(Xb),
            np.ascontiguousarray(filt.coeffs, dtype=np.float64),
            2.0 / filt.upper,
        )
        out = np.asarray(out)
    return out[:, 0] if one else out


@dataclass(frozen=True)
class Atom:
    """Localized kernel ``T_i g``: row (and column) ``i`` of ``g(L)``."""

    center: int
    values: np.ndarray

    @property
    def norm2(self):
        return float(self.values @ self.values)


def _check_vertex(L, i):
    if not 0 <= int(i) < L.n:
        raise IndexError(f"vertex {i} out of range for N = {L.n}")
    return int(i)


def localize(L, filt, i):
    """Filter a Kronecker delta at vertex ``i``."""
    i = _check_vertex(L, i)
    delta = np.zeros(L.n)
    delta[i] = 1.0
    return Atom(i, filter_signal(L, filt, delta))


def localize_many(L, filt, vertices):
    """Atoms for several centers at once; returns an ``N x len(vertices)`` matrix."""
    vertices = np.asarray(vertices, dtype=np.intp)
    if vertices.size and (vertices.min() < 0 or vertices.max() >= L.n):
        raise IndexError("vertex index out of range")
    D = np.zeros((L.n, vertices.size))
    D[vertices, np.arange(vertices.size)] = 1.0
    return filter_signal(L, filt, D)


def estimate_atom_norms(L, filt, P, seed=0, block=64):
    """Unbiased estimates of ``||T_i g||^2`` for every vertex from ``P`` random filterings.

    ``R`` has i.i.d. Rademacher entries scaled by ``1/sqrt(P)``; the estimate is
    the squared row norm of ``g(L) R``. Columns are drawn and filtered in blocks,
    so the result only depends on ``seed`` (not on ``block``).
    """
    if P < 1:
        raise InvalidParameter("P must be >= 1")
    rng = np.random.default_rng(seed)
    R = rng.integers(0, 2, size=(L.n, P), dtype=np.int8).astype(np.float64) * 2.0 - 1.0
    R /= math.sqrt(P)
    acc = np.zeros(L.n)
    for lo in range(0, P, block):
        Y = filter_signal(L, filt, np.ascontiguousarray(R[:, lo : lo + block]))
        acc += np.einsum("ij,ij->i", Y, Y)
    return acc


# -- dense oracles -----------------------------------------------------------

_EIG_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def dense_spectrum(L):
    """Eigenvalues (ascending) and orthonormal eigenvectors of ``L``; cached per operator."""
    if L.n > DENSE_GUARD:
        raise GuardExceeded(f"dense eigendecomposition refused for N = {L.n} > {DENSE_GUARD}")
    hit = _EIG_CACHE.get(L)
    if hit is None:
        lam, U = np.linalg.eigh(L.matrix.toarray())
        lam = np.clip(lam, 0.0, None)
        hit = (lam, U)
        _EIG_CACHE[L] = hit
    return hit


def dense_kernel_matrix(L, kernel):
    """``g(L) = U g(Lambda) U^T`` as a dense matrix."""
    lam, U = dense_spectrum(L)
    return (U * on_spectrum(kernel, lam)) @ U.T


def exact_filter_dense(L, kernel, x):
    """Exact spectral filtering ``U g(Lambda) U^T x`` (test oracle, N <= 2000)."""
    lam, U = dense_spectrum(L)
    g = on_spectrum(kernel, lam)
    x = np.asarray(x, dtype=float)
    coef = U.T @ x
    coef = coef * (g[:, None] if coef.ndim == 2 else g)
    return U @ coef


def dense_atom_norms2(L, kernel):
    """``||T_i g||^2 = sum_l g(lambda_l)^2 u_l[i]^2`` for every vertex."""
    lam, U = dense_spectrum(L)
    g = on_spectrum(kernel, lam)
    return (U * U) @ (g * g)


def kernel_norm2(L, kernel):
    """``||g(lambda)||_2^2`` over the spectrum of ``L``."""
    lam, _ = dense_spectrum(L)
    g = on_spectrum(kernel, lam)
    return float(g @ g)


def low_rank_truncate(kernel, k, spectrum):
    """Keep ``g`` on the ``k`` eigenvalues with largest ``|g|`` and zero it elsewhere.

    Ties in ``|g|`` are resolved toward the smaller eigenvalue.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    if not 1 <= k <= spectrum.size:
        raise InvalidParameter(f"rank {k} not in [1, {spectrum.size}]")
    mag = np.abs(on_spectrum(kernel, spectrum))
    order = np.lexsort((np.arange(spectrum.size), spectrum, -mag))
    keep = np.zeros(spectrum.size, dtype=bool)
    keep[order[:k]] = True
    return TruncatedKernel(kernel, spectrum, keep)
