import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gembed import graph, spectral, transduction as td
from gembed.errors import DegenerateKernel, InvalidInput, InvalidParameter
from gembed.spectral import ConstantKernel, HeatKernel
from gembed.transduction import ObservedSignal

from _util import random_laplacian


def permuted(L, perm):
    """Relabel vertex ``perm[a]`` as ``a``; keep the spectral bound so filters coincide."""
    P = sp.csr_matrix(L.matrix[perm][:, perm])
    P.sort_indices()
    return graph.LaplacianOperator(L.variant, P, L.lambda_max_bound, None)


# -- observed signals ---------------------------------------------------------


def test_observed_signal_validation():
    with pytest.raises(InvalidInput):
        ObservedSignal([0, 0], [1.0, 2.0])
    with pytest.raises(InvalidInput):
        ObservedSignal([0, 1], [1.0])
    with pytest.raises(InvalidInput):
        ObservedSignal([0], [np.nan])
    with pytest.raises(InvalidInput):
        ObservedSignal([5], [1.0]).check(3)


# -- Tikhonov -----------------------------------------------------------------


def test_tikhonov_all_sampled_tiny_mu():
    L = random_laplacian(40, seed=1)
    y = np.random.default_rng(0).standard_normal((40, 2))
    x = td.tikhonov_diffuse(L, ObservedSignal(np.arange(40), y), 1e-12)
    np.testing.assert_allclose(x, y, atol=1e-6)


def test_tikhonov_single_edge(edge_laplacian):
    x = td.tikhonov_diffuse(edge_laplacian, ObservedSignal([0], [1.0]), 1.0)
    np.testing.assert_allclose(x.ravel(), [1.0, 1.0], atol=1e-8)
    x = td.tikhonov_diffuse(edge_laplacian, ObservedSignal([0], [1.0]), 1.0, direct=True)
    np.testing.assert_allclose(x.ravel(), [1.0, 1.0], atol=1e-14)


def test_tikhonov_constant_reproduced():
    L = random_laplacian(100, seed=2)
    S = np.arange(0, 100, 9)
    x = td.tikhonov_diffuse(L, ObservedSignal(S, np.full(S.size, 3.5)), 0.5)
    np.testing.assert_allclose(x, 3.5, atol=1e-6)


def test_tikhonov_matches_direct_and_normal_equations():
    L = random_laplacian(200, seed=3)
    S = np.random.default_rng(3).choice(200, 30, replace=False)
    y = np.random.default_rng(4).standard_normal((30, 3))
    obs = ObservedSignal(S, y)
    x = td.tikhonov_diffuse(L, obs, 0.7)
    xd = td.tikhonov_diffuse(L, obs, 0.7, direct=True)
    np.testing.assert_allclose(x, xd, atol=1e-6)
    M = np.zeros(200)
    M[S] = 1
    A = sp.diags(M) + 0.7 * L.matrix
    B = np.zeros((200, 3))
    B[S] = y
    assert np.linalg.norm(A @ x - B) / np.linalg.norm(B) <= 1.01e-8


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(5, 60), mu=st.floats(1e-3, 10))
def test_tikhonov_beats_padding(seed, n, mu):
    rng = np.random.default_rng(seed)
    L = random_laplacian(n, seed=seed)
    S = rng.choice(n, max(1, n // 3), replace=False)
    obs = ObservedSignal(S, rng.standard_normal(S.size))
    x = td.tikhonov_diffuse(L, obs, mu)
    pad = np.zeros(n)
    pad[S] = obs.values[:, 0]
    assert td.tikhonov_objective(L, obs, mu, x) <= td.tikhonov_objective(L, obs, mu, pad) + 1e-9


def test_tikhonov_unsampled_component_warns():
    G = graph.SparseGraph.from_edges(4, [(0, 1), (2, 3)])
    L = graph.laplacian(G)
    with pytest.warns(RuntimeWarning, match="components without samples"):
        x = td.tikhonov_diffuse(L, ObservedSignal([0], [2.0]), 1.0)
    np.testing.assert_allclose(x.ravel(), [2, 2, 0, 0], atol=1e-8)


def test_tikhonov_bad_mu(edge_laplacian):
    with pytest.raises(InvalidParameter):
        td.tikhonov_diffuse(edge_laplacian, ObservedSignal([0], [1.0]), 0.0)


def test_tikhonov_nonconvergence_reports_residual():
    from gembed.errors import ConvergenceError

    L = random_laplacian(300, seed=5)
    obs = ObservedSignal([0, 150], [1.0, -1.0])
    with pytest.raises(ConvergenceError) as e:
        td.tikhonov_diffuse(L, obs, 1.0, maxiter=1)
    assert e.value.residual > 1e-8


# -- RKHS ---------------------------------------------------------------------


def test_rkhs_single_sample_interpolates():
    L = random_laplacian(50, seed=6)
    _, x = td.rkhs_fit(L, HeatKernel(1.0), ObservedSignal([7], [2.5]), mu=0.0)
    assert x[7, 0] == pytest.approx(2.5, abs=1e-8)


def test_rkhs_constant_kernel():
    L = random_laplacian(30, seed=7)
    S = np.array([1, 4, 9])
    y = np.array([1.0, -2.0, 3.0])
    op, x = td.rkhs_fit(L, ConstantKernel(2.0), ObservedSignal(S, y), mu=0.5)
    np.testing.assert_allclose(op.gram, 2.0 * np.eye(3), atol=1e-12)
    np.testing.assert_allclose(op.beta.ravel(), y / 2.5, atol=1e-12)
    want = np.zeros(30)
    want[S] = 2.0 / 2.5 * y
    np.testing.assert_allclose(x.ravel(), want, atol=1e-12)


def test_rkhs_shrinks_with_mu():
    L = random_laplacian(40, seed=8)
    obs = ObservedSignal([0, 10, 20], [1.0, 2.0, 3.0])
    norms = [np.linalg.norm(td.rkhs_fit(L, HeatKernel(1.0), obs, mu=mu)[1]) for mu in (1, 1e3, 1e6)]
    assert norms[0] > norms[1] > norms[2]
    assert norms[2] < 1e-4


def test_rkhs_representer():
    L = random_laplacian(60, seed=9)
    f = spectral.make_filter(L, HeatKernel(1.0), 50)
    S = np.array([3, 20, 41])
    op, x = td.rkhs_fit(L, f, ObservedSignal(S, [[1.0, 0.0], [0.5, 1.0], [-1.0, 2.0]]), mu=0.1)
    atoms = spectral.localize_many(L, f, S)
    np.testing.assert_allclose(x, atoms @ op.beta, atol=1e-12)
    np.testing.assert_allclose(op.gram, op.gram.T)
    np.linalg.cholesky(op.gram + 0.1 * np.eye(3))


def test_rkhs_zero_kernel_is_degenerate():
    L = random_laplacian(20, seed=10)
    z = spectral.FunctionKernel(lambda x: np.zeros_like(x), "zero")
    with pytest.raises(DegenerateKernel):
        td.rkhs_fit(L, z, ObservedSignal([0, 1], [1.0, 2.0]), mu=0.0)


# -- convex hull diffusion ---------------------------------------------------


def test_chd_single_sample_broadcasts():
    L = random_laplacian(30, seed=11)
    op = td.chd_operator(L, HeatKernel(1.0), [5], atom_norms2=spectral.dense_atom_norms2(L, HeatKernel(1.0)))
    np.testing.assert_array_equal(op.matrix, np.ones((30, 1)))
    np.testing.assert_array_equal(td.apply_diffusion(op, [[1.5, -2.0]]), np.tile([1.5, -2.0], (30, 1)))


def test_chd_rows_and_self_coefficient():
    L = random_laplacian(80, seed=12)
    g = HeatKernel(2.0)
    S = np.array([0, 9, 33, 70])
    op = td.chd_operator(L, g, S, atom_norms2=spectral.dense_atom_norms2(L, g))
    np.testing.assert_allclose(op.matrix.sum(1), 1.0, atol=1e-10)
    assert op.matrix.min() >= 0
    np.testing.assert_allclose(op.info["A"][S, np.arange(4)], 1.0, atol=1e-10)


def test_chd_constant_kernel_reproduces_samples():
    L = random_laplacian(40, seed=13)
    S = np.array([2, 8, 19, 31])
    # atoms of a constant kernel are orthogonal: unsampled rows are degenerate
    with pytest.warns(RuntimeWarning, match="36 CHD rows"):
        op = td.chd_operator(L, ConstantKernel(1.0), S, n_probes=8)
    E = np.random.default_rng(1).standard_normal((4, 2))
    np.testing.assert_array_equal(td.apply_diffusion(op, E)[S], E)


def test_chd_equal_sketch_rows_and_hull():
    L = random_laplacian(120, seed=14)
    S = np.random.default_rng(2).choice(120, 15, replace=False)
    op = td.chd_operator(L, HeatKernel(1.0), S, seed=3)
    v = np.array([0.25, -3.0, 7.0])
    np.testing.assert_array_equal(td.apply_diffusion(op, np.tile(v, (15, 1))), np.tile(v, (120, 1)))
    E = np.random.default_rng(4).standard_normal((15, 3))
    out = td.apply_diffusion(op, E)
    assert np.all(out >= E.min(0)) and np.all(out <= E.max(0))


def test_chd_degenerate_rows():
    # atoms never cross components, so the unsampled component has no weight
    G = graph.SparseGraph.from_edges(4, [(0, 1), (2, 3)])
    L = graph.laplacian(G)
    g = HeatKernel(1.0)
    with pytest.warns(RuntimeWarning, match="no weight"):
        op = td.chd_operator(L, g, [0, 1], atom_norms2=spectral.dense_atom_norms2(L, g))
    assert op.degenerate_rows == 2
    np.testing.assert_allclose(op.matrix[2:], 0.5)
    np.testing.assert_allclose(op.matrix.sum(1), 1.0, atol=1e-12)


def test_chd_input_validation():
    L = random_laplacian(10, seed=15)
    with pytest.raises(InvalidInput):
        td.chd_operator(L, HeatKernel(1.0), [])
    with pytest.raises(InvalidInput):
        td.chd_operator(L, HeatKernel(1.0), [1, 1])
    with pytest.raises(InvalidInput):
        td.chd_operator(L, HeatKernel(1.0), [10])


# -- operators and bootstrapping ---------------------------------------------


def test_make_diffusion_variants():
    L = random_laplacian(60, seed=16)
    S = np.arange(0, 60, 6)
    E = np.random.default_rng(5).standard_normal((S.size, 2))
    n2 = spectral.dense_atom_norms2(L, HeatKernel(1.0))
    for v in td.VARIANTS:
        op = td.make_diffusion(L, v, S, HeatKernel(1.0), mu=0.5, atom_norms2=n2)
        out = td.apply_diffusion(op, E)
        assert out.shape == (60, 2) and np.all(np.isfinite(out))
    with pytest.raises(InvalidParameter):
        td.make_diffusion(L, "tv", S, HeatKernel(1.0))
    with pytest.raises(InvalidInput):
        td.apply_diffusion(op, E[:3])


def test_bootstrapped_rkhs_chd_all_sampled():
    L = random_laplacian(30, seed=17)
    S = np.arange(30)
    E = np.random.default_rng(6).standard_normal((30, 2))
    op = td.make_diffusion(L, "rkhs+chd", S, ConstantKernel(1.0), mu=0.0, atom_norms2=np.ones(30))
    np.testing.assert_allclose(td.apply_diffusion(op, E), E, atol=1e-6)


def test_bootstrapped_uses_chd_output():
    L = random_laplacian(50, seed=18)
    g = HeatKernel(1.0)
    S = np.array([1, 12, 25, 40])
    E = np.random.default_rng(7).standard_normal((4, 1))
    n2 = spectral.dense_atom_norms2(L, g)
    chd = td.chd_operator(L, g, S, atom_norms2=n2)
    y = td.apply_diffusion(chd, E)[S]
    want = td.tikhonov_diffuse(L, ObservedSignal(S, y), 0.3)
    got = td.apply_diffusion(td.make_diffusion(L, "tik+chd", S, g, mu=0.3, atom_norms2=n2), E)
    np.testing.assert_allclose(got, want, atol=1e-12)


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(8, 50))
def test_permutation_commutes(seed, n):
    rng = np.random.default_rng(seed)
    L = random_laplacian(n, seed=seed)
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    Lp = permuted(L, perm)
    S = rng.choice(n, max(2, n // 4), replace=False)
    Sp = inv[S]
    E = rng.standard_normal((S.size, 2))
    g = HeatKernel(1.0)

    x = td.tikhonov_diffuse(L, ObservedSignal(S, E), 0.5)
    xp = td.tikhonov_diffuse(Lp, ObservedSignal(Sp, E), 0.5)
    np.testing.assert_allclose(xp, x[perm], atol=1e-7)

    _, r = td.rkhs_fit(L, g, ObservedSignal(S, E), 0.1)
    _, rp = td.rkhs_fit(Lp, g, ObservedSignal(Sp, E), 0.1)
    np.testing.assert_allclose(rp, r[perm], atol=1e-10)

    n2 = spectral.dense_atom_norms2(L, g)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        c = td.apply_diffusion(td.chd_operator(L, g, S, atom_norms2=n2), E)
        cp = td.apply_diffusion(td.chd_operator(Lp, g, Sp, atom_norms2=n2[perm]), E)
    np.testing.assert_allclose(cp, c[perm], atol=1e-10)
