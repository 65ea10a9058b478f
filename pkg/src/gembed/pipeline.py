"""Compressive embedding: embed a sampled sketch, then diffuse it to every point.

The six steps are: kNN graph, vertex sampling, sketch extraction, sketch
embedding (built-in or through an external command), diffusion operator fit,
and diffusion of the sketch embedding. :func:`compressive_embed` runs them in
order and reports the wall time of each step.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import shortest_path

from . import graph as _graph
from . import sampling, spectral, transduction
from .errors import BridgeError, InvalidInput, InvalidParameter

COUNT_CONSTANT = 10.0
SAMPLE_RULES = ("explicit", "classes", "diameter", "plain-log")
EMBEDDERS = ("eigenmaps", "pca", "external")
SKETCH_K = 10
NORM_PROBES = 50
BRIDGE_TIMEOUT = 3600.0
STEPS = ("graph", "sampling", "sketch", "embedding", "operator", "diffusion")

# seed offsets of the sub-steps, so one seed drives the whole run
_SEED_NORMS = 1
_SEED_DRAWS = 2
_SEED_EMBED = 3
_SEED_DIAMETER = 4
_SEED_CHD = 5


def graph_diameter(graph, seed=0):
    """Hop diameter estimate by a double BFS sweep from a random vertex (lower bound)."""
    n = graph.n_vertices
    rng = np.random.default_rng(seed)
    start = int(rng.integers(n))
    d = shortest_path(graph.adjacency, indices=start, unweighted=True, directed=False)
    d[~np.isfinite(d)] = -1
    far = int(np.argmax(d))
    d = shortest_path(graph.adjacency, indices=far, unweighted=True, directed=False)
    return int(d[np.isfinite(d)].max())


def choose_sample_count(n, rule="plain-log", n_classes=None, diameter=None, m=None,
                        constant=COUNT_CONSTANT):
    """Number of draws ``M`` for a sketch of an ``n``-vertex graph.

    ``plain-log`` gives ``ceil(c ln n)``, ``classes`` multiplies it by the number
    of classes and ``diameter`` by the graph diameter; ``explicit`` returns ``m``.
    """
    if rule == "explicit":
        if m is None or m < 1:
            raise InvalidParameter("explicit rule needs m >= 1")
        return int(m)
    if n < 2:
        raise InvalidParameter("need N >= 2")
    base = constant * math.log(n)
    if rule == "plain-log":
        factor = 1
    elif rule == "classes":
        if not n_classes or n_classes < 1:
            raise InvalidParameter("classes rule needs the number of classes")
        factor = n_classes
    elif rule == "diameter":
        if not diameter or diameter < 1:
            raise InvalidParameter("diameter rule needs the graph diameter")
        factor = diameter
    else:
        raise InvalidParameter(f"sample rule must be one of {SAMPLE_RULES}")
    return sampling._ceil(factor * base)


@dataclass(frozen=True)
class PipelineConfig:
    """Settings of :func:`compressive_embed`.

    ``kernel`` drives sampling and, unless ``diffusion_kernel`` is set, the
    diffusion too. ``sample_rule`` is one of ``explicit`` (uses ``num_samples``),
    ``classes`` (uses ``n_classes``, or the label count of the data),
    ``diameter`` or ``plain-log``.
    """

    k_neighbors: int = 10
    kernel: str = "heat:tau=5"
    diffusion_kernel: str | None = None
    laplacian: str = "normalized"
    weighting: str = "gaussian"
    order: int = spectral.DEFAULT_ORDER
    sampling: str = "adapted"
    sample_rule: str = "plain-log"
    num_samples: int | None = None
    n_classes: int | None = None
    count_constant: float = COUNT_CONSTANT
    norm_probes: int = NORM_PROBES
    embedder: str = "eigenmaps"
    external_command: str | None = None
    external_timeout: float = BRIDGE_TIMEOUT
    diffusion: str = "chd"
    mu: float = 1.0
    dim: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.sampling not in ("uniform", "adapted"):
            raise InvalidParameter("sampling must be 'uniform' or 'adapted'")
        if self.sample_rule not in SAMPLE_RULES:
            raise InvalidParameter(f"sample rule must be one of {SAMPLE_RULES}")
        if self.embedder not in EMBEDDERS:
            raise InvalidParameter(f"embedder must be one of {EMBEDDERS}")
        if self.embedder == "external" and not self.external_command:
            raise InvalidParameter("external embedder needs a command")
        if self.diffusion not in transduction.VARIANTS:
            raise InvalidParameter(f"diffusion must be one of {transduction.VARIANTS}")
        if self.dim < 1:
            raise InvalidParameter("target dimension must be >= 1")
        if self.k_neighbors < 1:
            raise InvalidParameter("k_neighbors must be >= 1")
        spectral.parse_kernel(self.kernel)
        if self.diffusion_kernel is not None:
            spectral.parse_kernel(self.diffusion_kernel)


@dataclass(frozen=True, eq=False)
class SketchResult:
    """Sketch artifacts of one run.

    ``vertices`` are the distinct sampled vertices in order of first draw, and
    ``sketch`` holds the corresponding data rows.
    """

    vertices: np.ndarray
    sample_set: sampling.SampleSet
    sketch: np.ndarray
    embedding: np.ndarray
    timings: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    @property
    def total_time(self):
        return float(sum(self.timings.values()))


def _fix_signs(V):
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def _eigenmaps(X, d):
    m = X.shape[0]
    k = min(SKETCH_K, m - 1)
    L = _graph.laplacian(_graph.build_knn_graph(X, k), "normalized")
    A = L.matrix.toarray()
    # move the trivial direction D^1/2 1 above the spectrum (which lies in [0, 2])
    u0 = np.sqrt(L.graph.degrees)
    u0 /= np.linalg.norm(u0)
    A += 3.0 * np.outer(u0, u0)
    try:
        _, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise InvalidInput(f"eigen-solver failed on the sketch graph: {exc}") from None
    return U[:, :d]


def _pca(X, d):
    Xc = X - X.mean(axis=0)
    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    out = np.zeros((X.shape[0], d))
    r = min(d, s.size)
    out[:, :r] = U[:, :r] * s[:r]
    return out


def sketch_embed_builtin(sketch, method="eigenmaps", d=2, seed=0):
    """Embed the sketch rows with Laplacian eigenmaps or PCA.

    Columns get a deterministic sign (largest-magnitude entry positive). Both
    methods are deterministic; ``seed`` is accepted for interface symmetry.
    """
    X = np.asarray(sketch, dtype=np.float64)
    if X.shape[0] < d + 1:
        raise InvalidParameter(f"sketch has {X.shape[0]} rows, need at least d + 1 = {d + 1}")
    if method == "eigenmaps":
        E = _eigenmaps(X, d)
    elif method == "pca":
        E = _pca(X, d)
    else:
        raise InvalidParameter(f"unknown built-in embedder {method!r}")
    return _fix_signs(E)


def _read_matrix_csv(path):
    with open(path) as fh:
        text = fh.read()
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if rows and not all(_graph._is_number(t) for t in rows[0].split(",")):
        rows = rows[1:]
    return np.array([[float(t) for t in ln.split(",")] for ln in rows], dtype=np.float64)


def external_embedder_bridge(sketch, command, d, timeout=BRIDGE_TIMEOUT):
    """Run ``command <in.csv> <out.csv> <d>`` on the sketch and read back ``M' x d`` rows."""
    X = np.asarray(sketch, dtype=np.float64)
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    with tempfile.TemporaryDirectory(prefix="gembed-") as tmp:
        src = os.path.join(tmp, "sketch.csv")
        dst = os.path.join(tmp, "embedding.csv")
        with open(src, "w") as fh:
            _graph.write_points_csv(fh, X)
        try:
            proc = subprocess.run(
                argv + [src, dst, str(d)], capture_output=True, text=True, timeout=timeout
            )
        except FileNotFoundError as exc:
            raise BridgeError(f"external embedder not found: {exc}") from None
        except subprocess.TimeoutExpired as exc:
            raise BridgeError(f"external embedder timed out after {timeout:g} s",
                              exc.stderr or "") from None
        if proc.returncode != 0:
            raise BridgeError(f"external embedder exited with status {proc.returncode}", proc.stderr)
        if not os.path.exists(dst):
            raise BridgeError("external embedder wrote no output file", proc.stderr)
        try:
            E = _read_matrix_csv(dst)
        except ValueError as exc:
            raise BridgeError(f"malformed embedder output: {exc}", proc.stderr) from None
    if E.ndim != 2 or E.shape[0] != X.shape[0]:
        raise BridgeError(f"embedder returned {E.shape[0] if E.ndim else 0} rows, expected {X.shape[0]}",
                          proc.stderr)
    if E.shape[1] != d:
        raise BridgeError(f"embedder returned {E.shape[1]} columns, expected {d}", proc.stderr)
    if not np.all(np.isfinite(E)):
        raise BridgeError("embedder output contains non-finite values", proc.stderr)
    return E


def compressive_embed(data, config=None, **overrides):
    """Embed every row of ``data`` from an embedding of a small sketch.

    Parameters
    ----------
    data : PointCloud or array_like
    config : PipelineConfig, optional
    **overrides
        Field overrides applied on top of ``config``.

    Returns
    -------
    embedding : (N, d) ndarray
    result : SketchResult
    """
    cfg = config or PipelineConfig()
    if overrides:
        cfg = PipelineConfig(**{**cfg.__dict__, **overrides})
    pc = data if isinstance(data, _graph.PointCloud) else _graph.PointCloud(data)
    n = pc.n
    timings = {}
    report = {}

    t = time.perf_counter()
    G = _graph.build_knn_graph(pc, min(cfg.k_neighbors, n - 1), cfg.weighting)
    L = _graph.laplacian(G, cfg.laplacian)
    timings["graph"] = time.perf_counter() - t

    t = time.perf_counter()
    filt = spectral.make_filter(L, spectral.parse_kernel(cfg.kernel), cfg.order)
    norms2 = None
    if cfg.sampling == "adapted":
        norms2 = spectral.estimate_atom_norms(L, filt, cfg.norm_probes, seed=cfg.seed + _SEED_NORMS)
        dist = sampling.adapted_distribution(norms2)
    else:
        dist = sampling.uniform_distribution(n)
    n_classes = cfg.n_classes or (pc.n_classes or None)
    diameter = None
    if cfg.sample_rule == "diameter":
        diameter = graph_diameter(G, seed=cfg.seed + _SEED_DIAMETER)
        report["diameter"] = diameter
    M = choose_sample_count(n, cfg.sample_rule, n_classes=n_classes, diameter=diameter,
                            m=cfg.num_samples, constant=cfg.count_constant)
    samples = sampling.draw_samples(dist, M, seed=cfg.seed + _SEED_DRAWS)
    timings["sampling"] = time.perf_counter() - t

    t = time.perf_counter()
    S = samples.unique()
    sketch = pc.points[S].copy()
    timings["sketch"] = time.perf_counter() - t

    t = time.perf_counter()
    if cfg.embedder == "external":
        E_S = external_embedder_bridge(sketch, cfg.external_command, cfg.dim, cfg.external_timeout)
    else:
        E_S = sketch_embed_builtin(sketch, cfg.embedder, cfg.dim, seed=cfg.seed + _SEED_EMBED)
    timings["embedding"] = time.perf_counter() - t

    t = time.perf_counter()
    dfilt = filt
    if cfg.diffusion_kernel is not None:
        dfilt = spectral.make_filter(L, spectral.parse_kernel(cfg.diffusion_kernel), cfg.order)
        if cfg.sampling == "adapted":
            # the stored norms belong to the sampling kernel
            norms2 = None
    op = transduction.make_diffusion(L, cfg.diffusion, S, dfilt, mu=cfg.mu,
                                     atom_norms2=norms2, seed=cfg.seed + _SEED_CHD)
    timings["operator"] = time.perf_counter() - t

    t = time.perf_counter()
    E = transduction.apply_diffusion(op, E_S)
    timings["diffusion"] = time.perf_counter() - t

    report.update(
        n_points=n, num_samples=M, num_unique=int(S.size), lambda_max=L.lambda_max_bound,
        degenerate_rows=op.degenerate_rows, backend=_backend_name(),
    )
    return E, SketchResult(S, samples, sketch, E_S, timings, report)


def _backend_name():
    from . import _backend

    return _backend.NAME
