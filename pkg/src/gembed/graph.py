"""kNN similarity graphs and Laplacian operators.

The graph is always stored as a symmetric CSR matrix with an empty diagonal.
Construction is exact brute-force search (O(N^2 K)), deterministic thanks to a
lowest-index tie rule, and independent of the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _backend, _config
from .errors import DegenerateInput, InvalidInput, InvalidParameter

log = logging.getLogger(__name__)

UNLABELED = -1

POWER_TOL = 1e-3
POWER_MAX_ITER = 1000
SAFETY = 1.01


@dataclass(frozen=True)
class PointCloud:
    """An ``N x K`` feature matrix with optional integer class labels.

    Labels are dense ids ``0..k-1``; :data:`UNLABELED` (-1) marks missing labels.
    """

    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidInput(f"points must be a non-empty 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("points contain non-finite features")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[0],):
                raise InvalidInput("labels must have one entry per point")
            if not np.issubdtype(lab.dtype, np.integer):
                if not np.all(np.equal(np.mod(lab, 1), 0)):
                    raise InvalidInput("labels must be integers")
            lab = lab.astype(np.int64)
            known = np.unique(lab[lab != UNLABELED])
            if lab.min(initial=0) < UNLABELED or not np.array_equal(known, np.arange(known.size)):
                raise InvalidInput("labels must be dense ids 0..k-1 (or -1 for unlabeled)")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def n_classes(self):
        if self.labels is None:
            return 0
        return int(self.labels.max(initial=-1)) + 1


def dense_labels(raw):
    """Map arbitrary integer labels to dense ids in order of first sorted value."""
    raw = np.asarray(raw)
    _, inverse = np.unique(raw, return_inverse=True)
    return inverse.astype(np.int64)


@dataclass(frozen=True)
class SparseGraph:
    """Undirected weighted graph ``G = (V, E, W)`` in CSR form."""

    adjacency: sp.csr_matrix
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        W = sp.csr_matrix(self.adjacency, dtype=np.float64)
        if W.shape[0] != W.shape[1]:
            raise InvalidInput("adjacency must be square")
        W.sum_duplicates()
        W.sort_indices()
        if W.nnz and (W.data < 0).any():
            raise InvalidInput("edge weights must be nonnegative")
        if W.diagonal().any():
            raise InvalidInput("self-loops are not supported")
        asym = W - W.T
        if asym.nnz and np.abs(asym.data).max() > 0:
            raise InvalidInput("adjacency must be exactly symmetric")
        W.eliminate_zeros()
        object.__setattr__(self, "adjacency", W)
        object.__setattr__(self, "degrees", np.asarray(W.sum(axis=1)).ravel())

    @property
    def n_vertices(self):
        return self.adjacency.shape[0]

    @property
    def n_edges(self):
        return self.adjacency.nnz // 2

    @classmethod
    def from_edges(cls, n, edges, weights=None):
        """Build a graph from an ``(E, 2)`` array of undirected edges, each listed once."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = np.ones(len(edges)) if weights is None else np.asarray(weights, dtype=np.float64)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise InvalidInput("edge endpoint out of range")
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        W = sp.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))
        return cls(W)


@dataclass(frozen=True, eq=False)
class LaplacianOperator:
    """Combinatorial (``D - W``) or normalized (``I - D^-1/2 W D^-1/2``) Laplacian.

    ``lambda_max_bound`` is a certified upper bound on the largest eigenvalue and
    fixes the Chebyshev interval ``[0, lambda_max_bound]``.
    """

    variant: str
    matrix: sp.csr_matrix
    lambda_max_bound: float
    graph: SparseGraph | None = None

    @property
    def n(self):
        return self.matrix.shape[0]


def _knn_tables(X, k):
    n = X.shape[0]
    idx = np.empty((n, k), dtype=np.intp)
    d2 = np.empty((n, k), dtype=np.float64)
    kern = _backend.impl
    workers = min(_config.get_num_threads(), max(1, n // 512))
    if workers <= 1:
        kern.knn_rows(X, k, 0, n, idx, d2)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as pool:
            futures = [
                pool.submit(kern.knn_rows, X, k, int(lo), int(hi), idx, d2)
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for fut in futures:
                fut.result()
    return idx, d2


def knn_search(points, k):
    """Exact k nearest neighbours of every row.

    Returns
    -------
    idx : (N, k) int array, neighbours sorted by distance (ties: lower index first)
    d2 : (N, k) float array of squared Euclidean distances
    """
    X = np.ascontiguousarray(points, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k < n:
        raise InvalidParameter(f"need 1 <= k < N, got k={k}, N={n}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("points contain non-finite features")
    return _knn_tables(X, int(k))


def build_knn_graph(data, k, weighting="gaussian"):
    """Connect every point to its ``k`` nearest neighbours and symmetrize by union.

    Parameters
    ----------
    data : PointCloud or array_like
    k : int
        Neighbours per vertex, ``1 <= k < N``.
    weighting : {"gaussian", "binary"}
        Gaussian weights are ``exp(-d^2 / sigma^2)`` with ``sigma^2`` the mean
        squared distance to the k-th neighbour.
    """
    X = data.points if isinstance(data, PointCloud) else np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if weighting not in ("gaussian", "binary"):
        raise InvalidParameter(f"unknown weighting {weighting!r}")
    idx, d2 = knn_search(X, k)
    n = X.shape[0]
    if weighting == "binary":
        w = np.ones(idx.size)
    else:
        sigma2 = float(d2[:, -1].mean())
        if sigma2 <= 0.0:
            # every k-th neighbour is a duplicate point
            sigma2 = 1.0
        w = np.exp(-d2.ravel() / sigma2)
    rows = np.repeat(np.arange(n), k)
    D = sp.csr_matrix((w, (rows, idx.ravel())), shape=(n, n))
    # union symmetrization: an edge survives if either endpoint selected it
    W = D.maximum(D.T).tocsr()
    return SparseGraph(W)


def estimate_lambda_max(L, variant="combinatorial", seed=0):
    """Upper bound on the largest eigenvalue of a symmetric PSD Laplacian.

    Power iteration until the eigen-residual ``||Lv - theta v||`` drops below
    ``1e-3 * theta``, then inflated by 1.01. The Gershgorin bound (``2 max L_ii``,
    or 2 for the normalized variant) caps the result and is returned whenever
    the iteration does not converge.
    """
    M = sp.csr_matrix(L)
    n = M.shape[0]
    if variant == "normalized":
        gersh = 2.0
    else:
        gersh = 2.0 * float(M.diagonal().max(initial=0.0))
    if M.nnz == 0 or gersh == 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(POWER_MAX_ITER):
        w = M @ v
        theta = float(v @ w)
        if theta <= 0.0:
            v = rng.standard_normal(n)
            v /= np.linalg.norm(v)
            continue
        resid = np.linalg.norm(w - theta * v)
        if resid <= POWER_TOL * theta:
            return min(SAFETY * theta, gersh)
        v = w / np.linalg.norm(w)
    log.debug("power iteration did not converge; using Gershgorin bound %g", gersh)
    return gersh


def laplacian(graph, variant="combinatorial"):
    """Laplacian operator of ``graph`` with its spectral bound filled in."""
    W = graph.adjacency
    d = graph.degrees
    n = graph.n_vertices
    if variant == "combinatorial":
        Lm = sp.diags(d) - W
    elif variant == "normalized":
        if n and (d <= 0).any():
            raise DegenerateInput("normalized Laplacian undefined for isolated vertices")
        s = 1.0 / np.sqrt(d)
        Lm = sp.identity(n) - sp.diags(s) @ W @ sp.diags(s)
        # D^-1/2 W D^-1/2 is symmetric in exact arithmetic; enforce it bitwise
        Lm = (Lm + Lm.T) * 0.5
    else:
        raise InvalidParameter(f"unknown Laplacian variant {variant!r}")
    Lm = sp.csr_matrix(Lm)
    Lm.sort_indices()
    lam = estimate_lambda_max(Lm, variant)
    return LaplacianOperator(variant, Lm, lam, graph)


# -- file formats ------------------------------------------------------------


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_points_csv(path_or_buf):
    """Read a point cloud CSV; a final column named ``label`` becomes the labels."""
    text = path_or_buf.read() if hasattr(path_or_buf, "read") else open(path_or_buf).read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidInput("empty point file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise InvalidInput("point file has a header but no rows")
    try:
        arr = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InvalidInput(f"non-numeric entry in point file: {exc}") from None
    labels = None
    if header is not None and header[-1].lower() == "label":
        labels = arr[:, -1]
        arr = arr[:, :-1]
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise InvalidInput("label column must hold integers")
        labels = labels.astype(np.int64)
        if not (labels[labels != UNLABELED] >= 0).all() or not _dense(labels):
            labels = np.where(labels == UNLABELED, UNLABELED, labels)
            known = labels != UNLABELED
            labels[known] = dense_labels(labels[known])
    return PointCloud(arr, labels)


def _dense(labels):
    known = np.unique(labels[labels != UNLABELED])
    return np.array_equal(known, np.arange(known.size))


def format_float(x):
    return "%.10g" % x


def write_points_csv(fh, points, labels=None, prefix="x"):
    points = np.asarray(points)
    cols = [f"{prefix}{j}" for j in range(points.shape[1])]
    if labels is not None:
        cols.append("label")
    fh.write(",".join(cols) + "\n")
    for i, row in enumerate(points):
        vals = [format_float(v) for v in row]
        if labels is not None:
            vals.append(str(int(labels[i])))
        fh.write(",".join(vals) + "\n")


def read_edge_list(path_or_buf):
    """Parse the ``N E`` header + ``i j w`` lines graph format."""
    text = path_or_buf.read() if hasattr(path_or_buf, "read") else open(path_or_buf).read()
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or len(lines[0]) != 2:
        raise InvalidInput("graph file must start with an 'N E' header")
    n, e = int(lines[0][0]), int(lines[0][1])
    body = lines[1:]
    if len(body) != e:
        raise InvalidInput(f"header announces {e} edges, found {len(body)}")
    edges = np.array([[int(t[0]), int(t[1])] for t in body], dtype=np.int64).reshape(-1, 2)
    w = np.array([float(t[2]) if len(t) > 2 else 1.0 for t in body])
    if (edges[:, 0] == edges[:, 1]).any():
        raise InvalidInput("self-loops are not supported")
    return SparseGraph.from_edges(n, edges, w)


def write_edge_list(fh, graph):
    U = sp.triu(graph.adjacency, k=1).tocoo()
    order = np.lexsort((U.col, U.row))
    fh.write(f"{graph.n_vertices} {len(order)}\n")
    for t in order:
        fh.write(f"{U.row[t]} {U.col[t]} {format_float(U.data[t])}\n")
