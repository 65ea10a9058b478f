"""Embedding quality scores over a kNN graph of the embedding.

ACI (average clusterability index) is the class-size weighted mean of the
per-class Cheeger scores ``Cut(V_c, V_c^c) / min(Vol(V_c), Vol(V_c^c))``. Small
values mean well separated classes.

ACC (average cluster concentration) is the class-size weighted mean of the
average intra-class diffusion distance. It grows when a class is split into
several remote clusters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graph as _graph
from . import metrics, spectral
from .errors import DegenerateClass, GuardExceeded, InvalidInput, InvalidParameter

EMBED_K = 10
ACC_GUARD = 5000
DEFAULT_PAIRS = 20
ACC_TAU_SCALE = 10.0


@dataclass(frozen=True, eq=False)
class LabeledEmbedding:
    """Embedding rows with their class ids and the kNN graph ``G_e`` built on them."""

    embedding: np.ndarray
    labels: np.ndarray
    graph: _graph.SparseGraph

    @classmethod
    def build(cls, embedding, labels, k=EMBED_K, weighting="gaussian"):
        E = np.asarray(embedding, dtype=np.float64)
        E = E[:, None] if E.ndim == 1 else E
        y = np.asarray(labels)
        if y.shape != (E.shape[0],):
            raise InvalidInput("need one label per embedding row")
        y = _graph.dense_labels(y)
        k = min(k, E.shape[0] - 1)
        return cls(E, y, _graph.build_knn_graph(E, k, weighting))

    @property
    def n(self):
        return self.labels.size

    def classes(self):
        """Vertex lists per class, in class-id order."""
        order = np.argsort(self.labels, kind="stable")
        cuts = np.flatnonzero(np.diff(self.labels[order])) + 1
        return np.split(order, cuts)


def _mask(graph, subset):
    m = np.zeros(graph.n_vertices, dtype=bool)
    m[np.asarray(subset, dtype=np.intp)] = True
    return m


def graph_cut(graph, subset):
    """Total weight of edges between ``subset`` and its complement."""
    m = _mask(graph, subset)
    W = graph.adjacency
    return float(W[m][:, ~m].sum())


def volume(graph, subset):
    """Sum of the degrees of ``subset``."""
    return float(graph.degrees[_mask(graph, subset)].sum())


def cheeger_score(graph, subset):
    """``Cut(S, S^c) / min(Vol(S), Vol(S^c))``.

    Raises
    ------
    DegenerateClass
        If ``S`` or its complement has zero volume.
    """
    m = _mask(graph, subset)
    vol_in = float(graph.degrees[m].sum())
    vol_out = float(graph.degrees[~m].sum())
    low = min(vol_in, vol_out)
    if low <= 0:
        raise DegenerateClass("class or complement has zero volume")
    return graph_cut(graph, subset) / low


def aci(labeled, per_class=False):
    """Average clusterability index ``(1/N) sum_c N_c h(G_e, c)``."""
    classes = labeled.classes()
    if len(classes) < 2:
        raise InvalidInput("ACI needs at least two classes")
    scores = np.array([cheeger_score(labeled.graph, c) for c in classes])
    sizes = np.array([c.size for c in classes])
    total = float(sizes @ scores) / labeled.n
    return (total, scores) if per_class else total


def embedding_laplacian(labeled, variant="combinatorial"):
    return _graph.laplacian(labeled.graph, variant)


def default_acc_filter(L, tau_scale=ACC_TAU_SCALE, order=spectral.DEFAULT_ORDER):
    """Heat filter with ``tau = tau_scale / lambda_max`` on the embedding graph."""
    lmax = L.lambda_max_bound if L.lambda_max_bound > 0 else 1.0
    return spectral.make_filter(L, spectral.HeatKernel(tau_scale / lmax), order)


def _as_filter(L, filt):
    if isinstance(filt, spectral.ChebyshevFilter):
        return filt
    return spectral.make_filter(L, filt, spectral.ORACLE_ORDER)


def _weighted(classes, values, n):
    sizes = np.array([c.size for c in classes])
    return float(sizes @ values) / n


def acc_exact(L_e, filt, labeled, mode="chebyshev"):
    """Exact ACC with the ``1/N_c^2`` normalization (zero diagonal included).

    ``mode="dense"`` evaluates the distances from the eigendecomposition.
    Returns ``(acc, per_class)``.
    """
    if labeled.n > ACC_GUARD:
        raise GuardExceeded(f"exact ACC refused for N = {labeled.n} > {ACC_GUARD}; use acc_randomized")
    if mode != "dense":
        filt = _as_filter(L_e, filt)
    classes = labeled.classes()
    per = np.zeros(len(classes))
    for c, vs in enumerate(classes):
        if vs.size > 1:
            per[c] = metrics.kdd_matrix(L_e, filt, vs, mode).sum() / vs.size**2
    return _weighted(classes, per, labeled.n), per


def acc_randomized(L_e, filt, labeled, pairs_per_point=DEFAULT_PAIRS, seed=0, block=256, atoms=None):
    """Monte-Carlo ACC from ``pairs_per_point * N_c`` random distinct pairs per class.

    The pair mean estimates the off-diagonal mean of the class distance matrix;
    it is scaled by ``(N_c - 1) / N_c`` to match the exact normalization.
    ``atoms`` may hold the full ``N x N`` atom matrix to skip filtering when the
    estimator is evaluated for many seeds. Returns ``(acc, per_class)``.
    """
    if pairs_per_point < 1:
        raise InvalidParameter("pairs_per_point must be >= 1")
    rng = np.random.default_rng(seed)
    if atoms is None:
        filt = _as_filter(L_e, filt)
    classes = labeled.classes()
    per = np.zeros(len(classes))
    if atoms is not None:
        # vertex-major copy so each pair reads two contiguous rows
        rows = np.ascontiguousarray(np.asarray(atoms, dtype=np.float64).T)
    for c, vs in enumerate(classes):
        nc = vs.size
        if nc < 2:
            continue
        n_pairs = pairs_per_point * nc
        a = rng.integers(0, nc, n_pairs)
        b = rng.integers(0, nc - 1, n_pairs)
        b = b + (b >= a)
        if atoms is not None:
            total = _pair_dist_sum(rows, vs[a], vs[b])
        else:
            # atoms are needed only for vertices that appear in a pair
            used, inv = np.unique(np.concatenate([vs[a], vs[b]]), return_inverse=True)
            A = _atoms_blocked(L_e, filt, used, block)
            total = _pair_dist_sum(np.ascontiguousarray(A.T), inv[:n_pairs], inv[n_pairs:])
        per[c] = total / n_pairs * (nc - 1) / nc
    return _weighted(classes, per, labeled.n), per


def _pair_dist_sum(R, ia, ib, chunk=2048):
    # R holds one atom per row
    total = 0.0
    for lo in range(0, ia.size, chunk):
        d = R[ia[lo : lo + chunk]] - R[ib[lo : lo + chunk]]
        total += float(np.sqrt(np.einsum("ij,ij->i", d, d)).sum())
    return total


def _atoms_blocked(L, filt, vertices, block):
    out = np.empty((L.n, vertices.size))
    for lo in range(0, vertices.size, block):
        out[:, lo : lo + block] = spectral.localize_many(L, filt, vertices[lo : lo + block])
    return out
