import numpy as np
import pytest

from agmm import DgpSpec, DiscretizedFunction, KernelSurface, SparseDgpSpec, gen_example, gen_functional_response, gen_scores, gen_sparse
from agmm.simgen import ar_coefficients, noise_variances, population_variances, slope_coefficients


def test_ar_coefficients_alternate_and_shrink():
    np.testing.assert_allclose(ar_coefficients(2), [-0.65, 0.4])
    np.testing.assert_allclose(ar_coefficients(4), [-0.775, 0.65, -0.525, 0.4])


def test_scores_stationary_moments():
    x = gen_scores(200_000, 3, seed=5)
    a = ar_coefficients(3)
    np.testing.assert_allclose(x.var(axis=0), 1 / (1 - a**2), rtol=0.03)
    lag1 = [np.corrcoef(x[:-1, j], x[1:, j])[0, 1] for j in range(3)]
    np.testing.assert_allclose(lag1, a, atol=0.01)


def test_scores_reject_explosive():
    with pytest.raises(ValueError):
        gen_scores(10, 1, coefs=[1.0])


def test_burn_in_starts_from_zero_and_discards():
    x = gen_scores(50, 2, seed=1, burn_in=30)
    assert x.shape == (50, 2)


def test_example_is_deterministic_and_decomposes():
    a = gen_example(DgpSpec(2, 60, 4, seed=11))
    b = gen_example(DgpSpec(2, 60, 4, seed=11))
    np.testing.assert_array_equal(a.W.W, b.W.W)
    np.testing.assert_allclose(a.W.W - a.X_true.W, a.noise_scores @ a.zeta, atol=1e-12)
    # The response is linear in the scores plus a unit-variance error.
    b4 = slope_coefficients(2, 4)
    np.testing.assert_allclose(a.beta_true.values, b4 @ a.phi)
    assert a.W.n == 60


def test_example_variants():
    assert slope_coefficients(4, 3)[-1] == 0.0
    assert DgpSpec(5, 100, 2).d == 25
    np.testing.assert_array_equal(noise_variances(1, 2), np.ones(10))
    np.testing.assert_allclose(noise_variances(2, 2)[:3], [1.0, 0.5, 0.25])


def test_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec(6, 100)
    with pytest.raises(ValueError):
        DgpSpec(1, 8)
    with pytest.raises(ValueError):
        SparseDgpSpec(DgpSpec(3, 100), m_t=1)


def test_population_variances_only_for_shared_bases():
    with pytest.raises(ValueError):
        population_variances(1, 2)


def test_sparse_sampling():
    sp, full = gen_sparse(SparseDgpSpec(DgpSpec(3, 400, 2, seed=2), m_t=12, obs_noise_sd=0.5), seed=3)
    assert sp.t.size == 400 * 12
    np.testing.assert_array_equal(sp.m, np.full(400, 12))
    clean = np.concatenate([np.interp(sp.u[sp.t == t], full.grid.points, full.W.W[t]) for t in range(400)])
    resid = sp.z - clean
    assert resid.var() == pytest.approx(0.25, rel=0.05)
    np.testing.assert_array_equal(sp.Y, full.Y)


def test_functional_response_without_noise():
    g = gen_example(DgpSpec(1, 30, 2, seed=0))
    phi1 = DiscretizedFunction(g.grid, g.phi[0])
    panel = gen_functional_response(g, KernelSurface.outer(phi1, phi1), noise_sd=0.0, seed=0)
    np.testing.assert_allclose(panel.Yfun, np.outer(g.scores[:, 0], g.phi[0]), atol=1e-10)


def test_stationary_variances_d4():
    x = gen_scores(20_000, 4, seed=3)
    np.testing.assert_allclose(x.var(axis=0), [2.50, 1.73, 1.38, 1.19], rtol=0.05)


def test_response_mean_is_zero():
    Y = gen_example(DgpSpec(2, 20_000, 2, seed=4)).Y
    # Scores are autocorrelated, so allow for the long-run variance.
    assert abs(Y.mean()) <= 3 * Y.std() / np.sqrt(20_000) * 2


def test_example5_score_variances():
    xi = gen_example(DgpSpec(5, 20_000, 25, seed=1)).scores
    j = np.arange(1, 26)
    np.testing.assert_allclose(xi.var(axis=0), j**-0.75 / 0.36, rtol=0.05)


def test_noiseless_sampling_on_grid_is_exact():
    sp, full = gen_sparse(SparseDgpSpec(DgpSpec(3, 50, 2, seed=0), m_t=7, obs_noise_sd=0.0, snap_to_grid=True), seed=1)
    idx = np.rint(sp.u * (full.grid.size - 1)).astype(int)
    np.testing.assert_array_equal(sp.z, full.W.W[sp.t, idx])


def test_sparse_noise_variance_large_sample():
    sp, full = gen_sparse(SparseDgpSpec(DgpSpec(3, 10_000, 2, seed=5), m_t=10, obs_noise_sd=0.5, snap_to_grid=True), seed=6)
    idx = np.rint(sp.u * (full.grid.size - 1)).astype(int)
    assert (sp.z - full.W.W[sp.t, idx]).var() == pytest.approx(0.25, rel=0.05)


def test_functional_noise_adds_variance():
    g = gen_example(DgpSpec(1, 2000, 2, seed=0))
    gamma = KernelSurface(g.grid, np.outer(g.phi[0], g.phi[0]))
    quiet = gen_functional_response(g, gamma, noise_sd=0.0, seed=1).Yfun.var(axis=0)
    loud = gen_functional_response(g, gamma, noise_sd=1.0, seed=1).Yfun.var(axis=0)
    assert np.all(loud > quiet)
