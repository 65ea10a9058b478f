"""Spread values known on a few vertices to the whole graph.

Three operators are available:

* ``tikhonov``: ``argmin ||y - M x||^2 + mu x^T L x``, solved by conjugate gradient;
* ``rkhs``: ridge regression over the atoms centred at the samples;
* ``chd``: convex hull diffusion, a row-stochastic blend of the sample values
  weighted by atom cosine similarity.

``tik+chd`` and ``rkhs+chd`` run CHD first and feed its output at the sampled
vertices to the second operator.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from . import spectral
from .errors import ConvergenceError, DegenerateKernel, InvalidInput, InvalidParameter

log = logging.getLogger(__name__)

VARIANTS = ("tikhonov", "rkhs", "chd", "tik+chd", "rkhs+chd")
CG_RTOL = 1e-8
DIRECT_MAX_N = 500
DEGENERATE_ROW = 1e-12
JITTER = 1e-10


@dataclass(frozen=True)
class ObservedSignal:
    """Values ``y`` (``M' x d``) observed at distinct vertices ``S``."""

    vertices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.vertices, dtype=np.intp).ravel()
        y = np.asarray(self.values, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape[0] != S.size:
            raise InvalidInput(f"{S.size} vertices but {y.shape[0]} value rows")
        if np.unique(S).size != S.size:
            raise InvalidInput("observed vertices must be distinct")
        if S.size and S.min() < 0:
            raise InvalidInput("negative vertex index")
        if not np.all(np.isfinite(y)):
            raise InvalidInput("observed values must be finite")
        object.__setattr__(self, "vertices", S)
        object.__setattr__(self, "values", y)

    @property
    def m(self):
        return self.vertices.size

    def check(self, n):
        if self.m and self.vertices.max() >= n:
            raise InvalidInput(f"vertex {self.vertices.max()} out of range for N = {n}")
        if self.m == 0:
            raise InvalidInput("no observed vertices")


@dataclass(frozen=True, eq=False)
class DiffusionOperator:
    """A fitted diffusion; call :func:`apply_diffusion` to use it.

    ``matrix`` is the row-stochastic CHD matrix (``N x M'``), ``gram`` the RKHS
    Gram matrix ``K[a, b] = T_{S_a} g[S_b]`` and ``beta`` the RKHS coefficients
    of the last fit.
    """

    variant: str
    L: object
    vertices: np.ndarray
    mu: float = 0.0
    filt: object = None
    matrix: np.ndarray | None = None
    gram: np.ndarray | None = None
    beta: np.ndarray | None = None
    degenerate_rows: int = 0
    info: dict = field(default_factory=dict)


# -- Tikhonov ----------------------------------------------------------------


def _components_with_samples(L, S):
    pattern = L.matrix.copy()
    pattern.setdiag(0)
    pattern.eliminate_zeros()
    _, comp = connected_components(pattern, directed=False)
    reached = np.isin(comp, np.unique(comp[S]))
    return reached


def tikhonov_diffuse(L, obs, mu, rtol=CG_RTOL, maxiter=None, direct=False):
    """Solve ``(M^T M + mu L) x = M^T y`` for every column of ``obs.values``.

    Vertices in connected components that contain no sample are left at zero
    with a warning. ``direct=True`` uses a sparse LU solve (oracle path, intended
    for ``N < 500``).

    Raises
    ------
    ConvergenceError
        CG did not reach ``rtol`` within ``maxiter`` (default ``10 N``) steps.
    """
    if not mu > 0:
        raise InvalidParameter("mu must be > 0")
    n = L.n
    obs.check(n)
    S, y = obs.vertices, obs.values
    reached = _components_with_samples(L, S)
    if not reached.all():
        msg = f"{int((~reached).sum())} vertices lie in components without samples; set to 0"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        log.warning(msg)
    keep = np.flatnonzero(reached)
    pos = np.full(n, -1, dtype=np.intp)
    pos[keep] = np.arange(keep.size)
    mask = np.zeros(keep.size)
    mask[pos[S]] = 1.0
    A = (sp.diags(mask) + mu * L.matrix[keep][:, keep]).tocsr()
    B = np.zeros((keep.size, y.shape[1]))
    B[pos[S]] = y
    X = np.zeros((n, y.shape[1]))
    if direct:
        sol = spla.splu(A.tocsc()).solve(B)
        X[keep] = sol
        return X
    maxiter = 10 * n if maxiter is None else maxiter
    for c in range(y.shape[1]):
        b = B[:, c]
        nb = np.linalg.norm(b)
        if nb == 0:
            continue
        x, _ = spla.cg(A, b, rtol=rtol, atol=0.0, maxiter=maxiter)
        res = np.linalg.norm(A @ x - b) / nb
        # scipy measures the recursively updated residual; recheck the true one
        if res > rtol * 1.01:
            x, _ = spla.cg(A, b, x0=x, rtol=rtol * 0.5, atol=0.0, maxiter=maxiter)
            res = np.linalg.norm(A @ x - b) / nb
            if res > rtol * 1.01:
                raise ConvergenceError(f"CG stopped at relative residual {res:.3e} (column {c})", res)
        X[keep, c] = x
    return X


def tikhonov_objective(L, obs, mu, x):
    """``||y - M x||^2 + mu x^T L x`` summed over columns."""
    x = np.asarray(x, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    r = obs.values - x[obs.vertices]
    return float(np.sum(r * r) + mu * np.sum(x * (L.matrix @ x)))


# -- RKHS --------------------------------------------------------------------


def _as_filter(L, filt):
    if isinstance(filt, spectral.ChebyshevFilter):
        return filt
    return spectral.make_filter(L, filt)


def _gram(L, filt, S):
    G = spectral.localize_many(L, filt, S)
    K = G[S]
    return 0.5 * (K + K.T)


def _factor(K, mu):
    m = K.shape[0]
    A = K + mu * np.eye(m)
    try:
        return sla.cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        jitter = JITTER * float(np.trace(K)) / m
        log.debug("Gram matrix not PD; retrying with jitter %g", jitter)
        try:
            return sla.cho_factor(A + jitter * np.eye(m), lower=True)
        except np.linalg.LinAlgError:
            raise DegenerateKernel(
                "Gram matrix is not positive definite; the kernel must be strictly positive"
            ) from None


def _rkhs_predict(L, filt, S, beta):
    D = np.zeros((L.n, beta.shape[1]))
    D[S] = beta
    return spectral.filter_signal(L, filt, D)


def rkhs_fit(L, filt, obs, mu=0.0):
    """Two-step kernel ridge regression.

    ``beta = (K + mu I)^-1 y`` over the Gram matrix of the sample atoms, then the
    prediction ``g(L) sum_k beta_k delta_{S_k}`` is one batched filtering.

    Returns
    -------
    op : DiffusionOperator
    X : (N, d) prediction
    """
    if mu < 0:
        raise InvalidParameter("mu must be >= 0")
    obs.check(L.n)
    filt = _as_filter(L, filt)
    S = obs.vertices
    K = _gram(L, filt, S)
    cf = _factor(K, mu)
    beta = sla.cho_solve(cf, obs.values)
    X = _rkhs_predict(L, filt, S, beta)
    op = DiffusionOperator("rkhs", L, S, mu=mu, filt=filt, gram=K, beta=beta, info={"chol": cf})
    return op, X


# -- convex hull diffusion ---------------------------------------------------


def chd_operator(L, filt, S, atom_norms2=None, n_probes=64, seed=0):
    """Row-stochastic CHD matrix from the atom similarities to the samples.

    ``A[i, k] = <T_i g, T_{S_k} g> / (||T_i g|| ||T_{S_k} g||)``. The inner products
    are the entries of ``g^2(L) delta_{S_k}``, one filtering per sample; the sample
    norms are their diagonal. Norms for the other vertices come from
    ``atom_norms2``, or from ``n_probes`` random filterings when omitted.
    Entries are clamped to ``[0, 1]`` and rows renormalized; rows whose weight
    is ``<= 1e-12`` fall back to uniform weights.
    """
    filt = _as_filter(L, filt)
    S = np.asarray(S, dtype=np.intp).ravel()
    if S.size == 0:
        raise InvalidInput("no sample vertices")
    if np.unique(S).size != S.size:
        raise InvalidInput("sample vertices must be distinct")
    if S.min() < 0 or S.max() >= L.n:
        raise InvalidInput("sample vertex out of range")
    m = S.size
    G2 = spectral.localize_many(L, spectral.squared_filter(filt), S)
    if atom_norms2 is None:
        atom_norms2 = spectral.estimate_atom_norms(L, filt, n_probes, seed=seed)
    norms2 = np.array(atom_norms2, dtype=np.float64, copy=True)
    if norms2.shape != (L.n,):
        raise InvalidInput("atom_norms2 must have one entry per vertex")
    sample_n2 = np.clip(G2[S, np.arange(m)], 0.0, None)
    norms2[S] = sample_n2
    ni = np.sqrt(np.clip(norms2, 0.0, None))
    nk = np.sqrt(sample_n2)
    with np.errstate(divide="ignore", invalid="ignore"):
        A = G2 / ni[:, None] / nk[None, :]
    A[~np.isfinite(A)] = 0.0
    np.clip(A, 0.0, 1.0, out=A)
    rows = A.sum(axis=1)
    bad = rows <= DEGENERATE_ROW
    nbad = int(bad.sum())
    if nbad:
        msg = f"{nbad} CHD rows have no weight on any sample; using uniform weights"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        log.warning(msg)
        A[bad] = 1.0
        rows[bad] = m
    At = A / rows[:, None]
    return DiffusionOperator("chd", L, S, filt=filt, matrix=At, degenerate_rows=nbad, info={"A": A})


def _chd_apply(op, E):
    out = op.matrix @ E
    # convex combination: pin rounding noise back into the sketch's box
    return np.clip(out, E.min(axis=0), E.max(axis=0))


def make_diffusion(L, variant, S, filt=None, mu=1.0, atom_norms2=None, seed=0):
    """Prepare a :class:`DiffusionOperator` of the requested ``variant``."""
    if variant not in VARIANTS:
        raise InvalidParameter(f"diffusion must be one of {VARIANTS}")
    S = np.asarray(S, dtype=np.intp)
    if variant == "tikhonov":
        return DiffusionOperator("tikhonov", L, S, mu=mu)
    filt = _as_filter(L, filt)
    chd = None
    if variant in ("chd", "tik+chd", "rkhs+chd"):
        chd = chd_operator(L, filt, S, atom_norms2=atom_norms2, seed=seed)
        if variant == "chd":
            return chd
    info = {"chd": chd}
    gram = None
    if variant in ("rkhs", "rkhs+chd"):
        gram = _gram(L, filt, S)
        info["chol"] = _factor(gram, mu)
    return DiffusionOperator(
        variant, L, S, mu=mu, filt=filt, gram=gram,
        degenerate_rows=0 if chd is None else chd.degenerate_rows, info=info,
    )


def apply_diffusion(op, E_S):
    """Extend the sketch embedding ``E_S`` (``M' x d``) to all ``N`` vertices."""
    E = np.asarray(E_S, dtype=np.float64)
    E = E[:, None] if E.ndim == 1 else E
    if E.shape[0] != op.vertices.size:
        raise InvalidInput(f"sketch has {E.shape[0]} rows, operator expects {op.vertices.size}")
    v = op.variant
    if v == "chd":
        return _chd_apply(op, E)
    if v in ("tik+chd", "rkhs+chd"):
        E = _chd_apply(op.info["chd"], E)[op.vertices]
    if v in ("tikhonov", "tik+chd"):
        return tikhonov_diffuse(op.L, ObservedSignal(op.vertices, E), op.mu)
    beta = sla.cho_solve(op.info["chol"], E)
    return _rkhs_predict(op.L, op.filt, op.vertices, beta)
