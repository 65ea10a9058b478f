import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gembed import graph, spectral
from gembed.errors import GuardExceeded, InvalidKernel, InvalidParameter
from gembed.spectral import (
    ConstantKernel,
    ExpWindowKernel,
    FunctionKernel,
    HeatKernel,
    RectangleKernel,
    TabulatedKernel,
)

from _util import random_laplacian


def path3():
    return graph.laplacian(graph.SparseGraph.from_edges(3, [(0, 1), (1, 2)]))


# -- kernels -----------------------------------------------------------------


def test_kernel_values():
    assert spectral.kernel_eval(HeatKernel(1.0), 0.0) == 1.0
    assert spectral.kernel_eval(RectangleKernel(0.5), 0.7) == 0.0
    assert spectral.kernel_eval(RectangleKernel(0.5, 2.0), 0.5) == 2.0
    assert spectral.kernel_eval(HeatKernel(2.0), 0.5) == pytest.approx(0.36787944117144233, rel=1e-15)


def test_window_is_a_smooth_step():
    g = ExpWindowKernel(b_max=0.5, a=1.0)
    lam = np.linspace(0, 2, 401)
    v = g(lam)
    assert np.all(v[lam <= 0.5] == 1.0)
    assert np.all(v[lam >= 1.0] == 0.0)
    assert np.all(np.diff(v) <= 0)
    # symmetric about the midpoint of the transition
    assert g(np.array([0.75]))[0] == pytest.approx(0.5, abs=1e-15)
    assert g(np.array([0.6]))[0] + g(np.array([0.9]))[0] == pytest.approx(1.0, abs=1e-12)


def test_tabulated_kernel_is_linear_interpolation():
    g = TabulatedKernel([0.0, 1.0, 2.0], [1.0, 3.0, 0.0])
    np.testing.assert_allclose(g(np.array([0.5, 1.5, 2.0])), [2.0, 1.5, 0.0])


@pytest.mark.parametrize(
    "text, cls, attrs",
    [
        ("heat:tau=5", HeatKernel, {"tau": 5.0}),
        ("window:a=1,bmax=0.2", ExpWindowKernel, {"a": 1.0, "b_max": 0.2}),
        ("rect:cutoff=0.3", RectangleKernel, {"cutoff": 0.3, "height": 1.0}),
        ("const:c=2", ConstantKernel, {"c": 2.0}),
    ],
)
def test_parse_kernel(text, cls, attrs):
    k = spectral.parse_kernel(text)
    assert isinstance(k, cls)
    for name, value in attrs.items():
        assert getattr(k, name) == value
    assert isinstance(spectral.parse_kernel(k.spec()), cls)


@pytest.mark.parametrize("text", ["heat", "heat:t=1", "gauss:tau=1", "heat:tau=abc", "rect:"])
def test_parse_kernel_errors(text):
    with pytest.raises(InvalidKernel):
        spectral.parse_kernel(text)


# -- Chebyshev ---------------------------------------------------------------


def test_constant_kernel_coefficients():
    for m in (1, 5, 30, 100):
        f = spectral.chebyshev_coeffs(ConstantKernel(1.5), m, 2.0)
        assert f.coeffs[0] == pytest.approx(3.0, rel=1e-15)
        assert np.abs(f.coeffs[1:]).max() <= 1e-14


def test_heat_grid_error():
    f = spectral.chebyshev_coeffs(HeatKernel(1.0), 30, 2.0)
    assert f.max_error <= 1e-12


def test_linear_kernel_exact_at_order_one():
    f = spectral.chebyshev_coeffs(FunctionKernel(lambda x: x, "id"), 1, 2.0)
    assert f.max_error <= 1e-14


def test_nonfinite_kernel_rejected():
    with pytest.raises(InvalidKernel), np.errstate(divide="ignore"):
        spectral.chebyshev_coeffs(FunctionKernel(lambda x: 1.0 / x, "inv"), 10, 2.0)
    with pytest.raises(InvalidParameter):
        spectral.chebyshev_coeffs(HeatKernel(1.0), 0, 2.0)


def test_filter_constant_and_linear():
    L = random_laplacian(80, seed=1)
    x = np.random.default_rng(0).standard_normal(80)
    y = spectral.filter_signal(L, spectral.make_filter(L, ConstantKernel(2.5)), x)
    assert np.linalg.norm(y - 2.5 * x) <= 1e-12 * np.linalg.norm(2.5 * x)
    y = spectral.filter_signal(L, spectral.make_filter(L, FunctionKernel(lambda t: t, "id"), 3), x)
    ref = L.matrix @ x
    assert np.linalg.norm(y - ref) <= 1e-12 * np.linalg.norm(ref)


def test_filter_single_edge_heat(edge_laplacian):
    tau = 0.7
    f = spectral.make_filter(edge_laplacian, HeatKernel(tau), 50)
    y = spectral.filter_signal(edge_laplacian, f, np.array([1.0, 0.0]))
    e = np.exp(-2 * tau)
    np.testing.assert_allclose(y, [(1 + e) / 2, (1 - e) / 2], atol=1e-10)
    y2 = spectral.exact_filter_dense(edge_laplacian, HeatKernel(tau), np.array([1.0, 0.0]))
    np.testing.assert_allclose(y2, [(1 + e) / 2, (1 - e) / 2], atol=1e-14)


def test_filter_batch_matches_columns():
    L = random_laplacian(60, seed=2, variant="normalized")
    f = spectral.make_filter(L, HeatKernel(3.0))
    X = np.random.default_rng(1).standard_normal((60, 4))
    Y = spectral.filter_signal(L, f, X)
    for c in range(4):
        np.testing.assert_array_equal(Y[:, c], spectral.filter_signal(L, f, X[:, c]))


def test_filter_interval_must_cover_bound():
    L = random_laplacian(30, seed=3)
    f = spectral.chebyshev_coeffs(HeatKernel(1.0), 20, L.lambda_max_bound / 2)
    with pytest.raises(InvalidParameter):
        spectral.filter_signal(L, f, np.ones(30))


def test_empty_graph_filter_returns_g0_times_x():
    L = graph.laplacian(graph.SparseGraph(sp.csr_matrix((4, 4))))
    f = spectral.make_filter(L, HeatKernel(1.0))
    x = np.arange(4.0)
    np.testing.assert_array_equal(spectral.filter_signal(L, f, x), x)
    f = spectral.make_filter(L, ConstantKernel(3.0))
    np.testing.assert_array_equal(spectral.filter_signal(L, f, x), 3 * x)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(16, 120), seed=st.integers(0, 1000), tau=st.sampled_from([1.0, 5.0]),
       variant=st.sampled_from(["combinatorial", "normalized"]))
def test_heat_filter_matches_dense_oracle(n, seed, tau, variant):
    L = random_laplacian(n, seed=seed, variant=variant)
    x = np.random.default_rng(seed).standard_normal(n)
    f = spectral.make_filter(L, HeatKernel(tau), spectral.ORACLE_ORDER)
    err = np.linalg.norm(spectral.filter_signal(L, f, x) - spectral.exact_filter_dense(L, HeatKernel(tau), x))
    assert err <= 1e-8 * np.linalg.norm(x)


# -- atoms -------------------------------------------------------------------


def test_localize_constant_kernel():
    L = random_laplacian(20, seed=4)
    a = spectral.localize(L, spectral.make_filter(L, ConstantKernel(2.0)), 5)
    expected = np.zeros(20)
    expected[5] = 2.0
    np.testing.assert_allclose(a.values, expected, atol=1e-14)
    with pytest.raises(IndexError):
        spectral.localize(L, spectral.make_filter(L, ConstantKernel(2.0)), 20)


def test_path_atom_symmetry():
    L = path3()
    a = spectral.localize(L, spectral.make_filter(L, HeatKernel(1.0), 60), 1)
    assert a.values[0] == pytest.approx(a.values[2], abs=1e-14)


def test_atom_is_column_of_kernel_matrix():
    L = random_laplacian(50, seed=6)
    g = HeatKernel(0.5)
    G = spectral.dense_kernel_matrix(L, g)
    A = spectral.localize_many(L, spectral.make_filter(L, g, 100), [3, 17])
    np.testing.assert_allclose(A, G[:, [3, 17]], atol=1e-10)


@pytest.mark.parametrize("kernel", [HeatKernel(1.0), RectangleKernel(1.0), ExpWindowKernel(0.5)])
def test_parseval_identity(kernel):
    L = random_laplacian(120, seed=7, variant="normalized")
    total = spectral.dense_atom_norms2(L, kernel).sum()
    assert total == pytest.approx(spectral.kernel_norm2(L, kernel), rel=1e-8)


def test_rectangle_below_first_eigenvalue_projects_on_components():
    edges = [(0, 1), (1, 2), (3, 4)]
    L = graph.laplacian(graph.SparseGraph.from_edges(5, edges))
    lam, _ = spectral.dense_spectrum(L)
    cutoff = 0.5 * lam[lam > 1e-9].min()
    x = np.array([1.0, 2.0, 6.0, -1.0, 3.0])
    y = spectral.exact_filter_dense(L, RectangleKernel(cutoff), x)
    np.testing.assert_allclose(y, [3, 3, 3, 1, 1], atol=1e-12)


def test_identity_kernel_dense_oracle():
    L = random_laplacian(30, seed=8)
    x = np.random.default_rng(2).standard_normal(30)
    np.testing.assert_allclose(spectral.exact_filter_dense(L, ConstantKernel(1.0), x), x, atol=1e-12)


def test_dense_guard():
    L = random_laplacian(spectral.DENSE_GUARD + 1, seed=0, k=2)
    with pytest.raises(GuardExceeded):
        spectral.dense_spectrum(L)


# -- stochastic atom norms ---------------------------------------------------


def test_estimate_norms_constant_kernel():
    L = random_laplacian(100, seed=9)
    est = spectral.estimate_atom_norms(L, spectral.make_filter(L, ConstantKernel(1.5)), 500, seed=1)
    assert est.mean() == pytest.approx(1.5**2, rel=0.1)


def test_estimate_norms_accuracy():
    L = random_laplacian(64, seed=10)
    g = HeatKernel(1.0)
    est = spectral.estimate_atom_norms(L, spectral.make_filter(L, g), 2000, seed=3)
    exact = spectral.dense_atom_norms2(L, g)
    rel = np.abs(est - exact) / exact
    assert np.mean(rel <= 0.15) >= 0.95


def test_estimate_norms_deterministic_and_block_independent():
    L = random_laplacian(40, seed=11)
    f = spectral.make_filter(L, HeatKernel(1.0))
    a = spectral.estimate_atom_norms(L, f, 1, seed=5)
    b = spectral.estimate_atom_norms(L, f, 1, seed=5)
    np.testing.assert_array_equal(a, b)
    c = spectral.estimate_atom_norms(L, f, 70, seed=5, block=64)
    d = spectral.estimate_atom_norms(L, f, 70, seed=5, block=7)
    np.testing.assert_allclose(c, d, rtol=1e-13)


@pytest.mark.slow
def test_estimate_norms_unbiased():
    L = random_laplacian(48, seed=12)
    g = HeatKernel(1.0)
    f = spectral.make_filter(L, g, 60)
    runs = np.array([spectral.estimate_atom_norms(L, f, 200, seed=s) for s in range(50)])
    exact = spectral.dense_atom_norms2(L, g)
    se = runs.std(axis=0, ddof=1) / np.sqrt(runs.shape[0])
    z = np.abs(runs.mean(axis=0) - exact) / se
    # 3 standard errors per vertex; allow the odd 3-sigma excursion among 48 vertices
    assert np.mean(z <= 3) >= 0.95


# -- low-rank truncation -----------------------------------------------------


def test_truncate_heat_to_rank_one():
    t = spectral.low_rank_truncate(HeatKernel(1.0), 1, [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(spectral.on_spectrum(t, np.array([0.0, 1.0, 2.0])), [1.0, 0.0, 0.0])
    assert t.rank == 1


def test_truncate_full_rank_and_rectangle():
    spec_ = np.array([0.0, 0.3, 0.6, 1.2, 1.9])
    g = HeatKernel(0.4)
    np.testing.assert_array_equal(
        spectral.on_spectrum(spectral.low_rank_truncate(g, 5, spec_), spec_), g(spec_)
    )
    r = RectangleKernel(0.7)
    t = spectral.low_rank_truncate(r, 3, spec_)
    np.testing.assert_array_equal(spectral.on_spectrum(t, spec_), r(spec_))


def test_truncate_ties_prefer_small_eigenvalues():
    t = spectral.low_rank_truncate(ConstantKernel(1.0), 2, [0.5, 0.1, 0.9])
    np.testing.assert_array_equal(t.keep, [True, True, False])
    with pytest.raises(InvalidParameter):
        spectral.low_rank_truncate(ConstantKernel(1.0), 4, [0.5, 0.1, 0.9])
