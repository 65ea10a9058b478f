import os
import subprocess
import sys

import numpy as np
import pytest

from gembed import _backend, graph, spectral

from _util import random_cloud, random_laplacian

needs_ext = pytest.mark.skipif("cython" not in _backend.BACKENDS, reason="compiled core not built")


@needs_ext
@pytest.mark.parametrize("n, dim, k", [(50, 2, 3), (700, 5, 10), (300, 1, 7)])
def test_knn_backends_bit_identical(n, dim, k):
    X = random_cloud(n, dim, seed=n)
    out = {}
    for name in ("python", "cython"):
        idx = np.empty((n, k), dtype=np.intp)
        d2 = np.empty((n, k))
        _backend.get(name).knn_rows(X, k, 0, n, idx, d2)
        out[name] = idx, d2
    np.testing.assert_array_equal(out["python"][0], out["cython"][0])
    np.testing.assert_array_equal(out["python"][1], out["cython"][1])


@needs_ext
def test_knn_backends_agree_on_ties():
    X = np.repeat(np.arange(10.0)[:, None], 3, axis=0)
    res = []
    for name in ("python", "cython"):
        idx = np.empty((30, 4), dtype=np.intp)
        d2 = np.empty((30, 4))
        _backend.get(name).knn_rows(X, 4, 0, 30, idx, d2)
        res.append(idx)
    np.testing.assert_array_equal(res[0], res[1])


@needs_ext
@pytest.mark.parametrize("variant", ["combinatorial", "normalized"])
def test_filter_backends_bit_identical(variant):
    L = random_laplacian(400, seed=3, variant=variant)
    f = spectral.make_filter(L, spectral.HeatKernel(2.0), 40)
    X = np.random.default_rng(0).standard_normal((400, 3))
    a = spectral.filter_signal(L, f, X, backend="python")
    b = spectral.filter_signal(L, f, X, backend="cython")
    np.testing.assert_array_equal(a, b)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_env_forces_fallback():
    env = dict(os.environ, GEMBED_PURE_PYTHON="1")
    code = "import gembed._backend as b; print(b.NAME)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pipeline_graph_same_under_fallback():
    env = dict(os.environ, GEMBED_PURE_PYTHON="1")
    code = (
        "import numpy as np, gembed.graph as g;"
        "X=np.random.default_rng(1).standard_normal((80,3));"
        "W=g.build_knn_graph(X,5).adjacency;"
        "print(repr(float(W.sum())), W.nnz)"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    W = graph.build_knn_graph(np.random.default_rng(1).standard_normal((80, 3)), 5).adjacency
    assert out.stdout.split() == [repr(float(W.sum())), str(W.nnz)]
