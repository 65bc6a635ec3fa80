import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agmm import (
    CurvePanel,
    DgpSpec,
    DiscretizedFunction,
    Grid,
    KernelSurface,
    RankDeficiencyError,
    agmm_functional,
    apply_kernel,
    agmm_scalar,
    als_scalar,
    cgmm_scalar,
    cls_scalar,
    compute_moments,
    eigen_basis,
    eigen_raw,
    gen_example,
    gen_functional_response,
    hs_norm,
    integrated_squared_error,
    make_basis,
    mise,
    ridge_agmm,
)


def _noiseless(seed=0, n=300):
    """Two AR scores on cosine functions, responses exactly linear in them."""
    gen = gen_example(DgpSpec(1, n, 2, seed=seed))
    X = gen.X_true
    b = np.array([2.0, 1.6])
    Y = gen.scores @ b
    return CurvePanel(X.grid, X.W, Y), gen.beta_true


@pytest.mark.parametrize("name", ["cls", "cgmm", "als", "agmm_raw", "agmm_basis"])
def test_exact_recovery_without_noise(name):
    panel, beta = _noiseless()
    m = compute_moments(panel)
    if name == "cls":
        est = cls_scalar(panel, rank=2)
    elif name == "cgmm":
        est = cgmm_scalar(panel, rank=2)
    elif name == "als":
        est = als_scalar(panel, eigen_raw(m.K_hat), 2)
    elif name == "agmm_raw":
        est = agmm_scalar(m, eigen_raw(m.K_hat), 2)
    else:
        est = agmm_scalar(m, eigen_basis(m.K_hat, make_basis("cosine", 6, panel.grid)), 2)
    assert integrated_squared_error(est.beta_hat, beta) < 1e-18


def test_method_labels():
    panel, _ = _noiseless()
    m = compute_moments(panel)
    assert agmm_scalar(m, eigen_raw(m.K_hat), 2).method == "BaseAGMM"
    assert agmm_scalar(m, eigen_basis(m.K_hat, make_basis("cosine", 5, panel.grid)), 2).method == "AGMM"
    assert cls_scalar(panel).method == "BaseCLS"


def test_ridge_limits():
    gen = gen_example(DgpSpec(1, 400, 2, seed=3))
    m = compute_moments(gen.W)
    dec = eigen_basis(m.K_hat, make_basis("cosine", 10, gen.grid))
    plain = agmm_scalar(m, dec, 4)
    np.testing.assert_allclose(ridge_agmm(m, dec, 4, 0.0).beta_hat.values, plain.beta_hat.values)
    norms = [ridge_agmm(m, dec, 7, rho).beta_hat.norm() for rho in (1e-3, 1e-1, 1e1, 1e3)]
    assert all(a > b for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 1e-2
    with pytest.raises(ValueError):
        ridge_agmm(m, dec, 4, -1.0)


def test_rank_deficiency():
    g = Grid.uniform(10)
    v = np.zeros(10)
    v[2] = 1.0
    K = KernelSurface(g, np.outer(v, v), symmetric=True)
    dec = eigen_raw(K)
    m = compute_moments(CurvePanel(g, np.random.default_rng(0).standard_normal((20, 10)), np.zeros(20)), L=2)
    with pytest.raises(RankDeficiencyError):
        agmm_scalar(m, dec, 2)


def test_functional_response_recovery_without_noise():
    gen = gen_example(DgpSpec(1, 400, 2, seed=5))
    g = gen.grid
    phi = [DiscretizedFunction(g, gen.phi[j]) for j in range(2)]
    gamma = KernelSurface.outer(phi[0], phi[1]) + KernelSurface.outer(phi[1], phi[0]) * 0.5
    panel = gen_functional_response(gen, gamma, noise_sd=0.0)
    panel = CurvePanel(g, gen.X_true.W, panel.Y, panel.Yfun)
    m = compute_moments(panel)
    est = agmm_functional(m, eigen_raw(m.K_hat), 2)
    np.testing.assert_allclose(est.gamma_hat.values, gamma.values, atol=1e-8)


def test_mise_standard_error():
    g = Grid.uniform(10)
    truth = DiscretizedFunction.zeros(g)
    ests = [DiscretizedFunction(g, np.full(10, c)) for c in (1.0, 2.0, 3.0)]
    mean, se = mise(ests, truth)
    ise = np.array([1.0, 4.0, 9.0])
    assert mean == pytest.approx(ise.mean())
    assert se == pytest.approx(ise.std(ddof=1) / np.sqrt(3))
    assert mise(ests[:1], truth) == pytest.approx((1.0, 0.0))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 5.0))
def test_agmm_scales_linearly_with_response(seed, c):
    gen = gen_example(DgpSpec(1, 60, 2, seed=seed))
    m1 = compute_moments(gen.W)
    m2 = compute_moments(CurvePanel(gen.grid, gen.W.W, c * gen.W.Y))
    dec = eigen_raw(m1.K_hat)
    np.testing.assert_allclose(agmm_scalar(m2, dec, 2).beta_hat.values, c * agmm_scalar(m1, dec, 2).beta_hat.values, rtol=1e-9, atol=1e-12)


def test_functional_response_generator_oracles():
    gen = gen_example(DgpSpec(1, 20, 2, seed=1))
    g = gen.grid
    zero = gen_functional_response(gen, KernelSurface.zeros(g), noise_sd=0.0)
    assert np.all(zero.Yfun == 0)
    beta = DiscretizedFunction(g, np.sin(3 * g.points))
    ones = DiscretizedFunction(g, np.ones(g.size))
    panel = gen_functional_response(gen, KernelSurface.outer(ones, beta), noise_sd=0.0)
    X = gen.X_true.W
    quad = [sum(g.weights[j] * beta.values[j] * X[t, j] for j in range(g.size)) for t in range(20)]
    np.testing.assert_allclose(panel.Yfun, np.repeat(np.array(quad)[:, None], g.size, axis=1), atol=1e-10)


def test_functional_estimate_zero_H():
    gen = gen_example(DgpSpec(1, 50, 2, seed=2))
    panel = CurvePanel(gen.grid, gen.W.W, gen.Y, np.zeros_like(gen.W.W))
    m = compute_moments(panel)
    assert np.all(agmm_functional(m, eigen_raw(m.K_hat), 2).gamma_hat.values == 0)


def test_functional_estimate_root_n_rate():
    def error(n, r):
        gen = gen_example(DgpSpec(1, n, 2, seed=1000 * n + r))
        phi = [DiscretizedFunction(gen.grid, row) for row in gen.phi]
        gamma = KernelSurface.outer(phi[0], phi[1]) - KernelSurface.outer(phi[1], phi[1]) * 0.5
        panel = gen_functional_response(gen, gamma, noise_sd=0.0)
        m = compute_moments(panel)
        est = agmm_functional(m, eigen_raw(m.K_hat), 2).gamma_hat
        return hs_norm(est - gamma)

    small = np.mean([error(400, r) for r in range(20)])
    large = np.mean([error(1600, r) for r in range(20)])
    # Quadrupling n halves the error at the root-n rate.
    assert 0.5 / 1.5 <= large / small <= 0.5 * 1.5


def test_mise_toy_values():
    g = Grid.uniform(10)
    truth = DiscretizedFunction.zeros(g)
    shifted = [DiscretizedFunction(g, np.ones(10))] * 2
    assert mise(shifted, truth) == pytest.approx((1.0, 0.0))
    toy = [DiscretizedFunction(g, np.full(10, np.sqrt(v))) for v in (0.1, 0.3)]
    assert mise(toy, truth) == pytest.approx((0.2, 0.1))


def _handmade_moments(K_values, R_values, g):
    from agmm import MomentSet

    zero = KernelSurface.zeros(g)
    return MomentSet(1, [zero], None, KernelSurface(g, K_values, symmetric=True), DiscretizedFunction(g, R_values), zero)


def test_rank_one_closed_form_and_zero_R():
    g = Grid.uniform(30)
    phi = make_basis("cosine", 2, g)[1]
    K = np.outer(phi.values, phi.values)
    dec = eigen_raw(KernelSurface(g, K, symmetric=True))
    est = agmm_scalar(_handmade_moments(K, 2.5 * phi.values, g), dec, 1)
    np.testing.assert_allclose(est.beta_hat.values, 2.5 * phi.values, atol=1e-10)
    zero = agmm_scalar(_handmade_moments(K, np.zeros(30), g), dec, 1)
    assert np.all(zero.beta_hat.values == 0)


def test_ridge_shrinkage_bound():
    gen = gen_example(DgpSpec(1, 300, 2, seed=8))
    m = compute_moments(gen.W)
    dec = eigen_basis(m.K_hat, make_basis("cosine", 10, gen.grid))
    for rho in (1.0, 10.0, 100.0):
        est = ridge_agmm(m, dec, 6, rho)
        assert est.beta_hat.norm() <= m.R_hat.norm() * 6 / rho


def test_ridge_on_example5():
    rhos = (1e-4, 1e-3, 1e-2, 1e-1)
    rows = []
    for r in range(20):
        gen = gen_example(DgpSpec(5, 400, 25, seed=r))
        m = compute_moments(gen.W)
        dec = eigen_basis(m.K_hat, make_basis("cosine", 15, gen.grid))
        row = [integrated_squared_error(ridge_agmm(m, dec, 4, 0.0).beta_hat, gen.beta_true)]
        row += [integrated_squared_error(ridge_agmm(m, dec, 9, rho).beta_hat, gen.beta_true) for rho in rhos]
        rows.append(row)
    rows = np.array(rows)
    assert np.all(np.isfinite(rows))
    best = 1 + int(np.argmin(rows[:, 1:].mean(axis=0)))
    assert np.mean(rows[:, best] <= rows[:, 0]) >= 0.6


def test_zero_response_gives_zero_slope():
    gen = gen_example(DgpSpec(1, 100, 2, seed=0))
    panel = CurvePanel(gen.grid, gen.W.W, np.zeros(100))
    assert np.abs(cls_scalar(panel, rank=2).beta_hat.values).max() == 0
    assert np.abs(als_scalar(panel, eigen_raw(compute_moments(panel).K_hat), 2).beta_hat.values).max() == 0


def test_cgmm_is_deterministic():
    panel = gen_example(DgpSpec(1, 200, 2, seed=1)).W
    np.testing.assert_array_equal(cgmm_scalar(panel, rank=2).beta_hat.values, cgmm_scalar(panel, rank=2).beta_hat.values)


def test_normal_equation_residual_on_retained_space():
    gen = gen_example(DgpSpec(1, 200, 2, seed=4))
    m = compute_moments(gen.W)
    dec = eigen_raw(m.K_hat)
    g = gen.grid
    for M in (1, 2, 5):
        beta = agmm_scalar(m, dec, M).beta_hat
        resid = apply_kernel(m.K_hat, beta).values - m.R_hat.values
        coords = (dec.psi[:M] * g.weights) @ resid
        assert np.abs(coords).max() <= 1e-10 * max(m.R_hat.norm(), 1.0)


@pytest.mark.slow
def test_agmm_error_falls_with_sample_size():
    def batch_mise(n, b):
        out = []
        for r in range(10):
            gen = gen_example(DgpSpec(1, n, 2, seed=10000 * b + 100 * n + r))
            m = compute_moments(gen.W)
            est = agmm_scalar(m, eigen_basis(m.K_hat, make_basis("cosine", 10, gen.grid)), 2)
            out.append(integrated_squared_error(est.beta_hat, gen.beta_true))
        return np.mean(out)

    ordered = [batch_mise(800, b) < batch_mise(400, b) < batch_mise(200, b) for b in range(10)]
    assert np.mean(ordered) >= 0.9


def test_error_insensitive_to_grid_size():
    def mean_ise(G):
        out = []
        for r in range(10):
            gen = gen_example(DgpSpec(1, 800, 2, seed=r, grid_size=G))
            m = compute_moments(gen.W)
            est = agmm_scalar(m, eigen_basis(m.K_hat, make_basis("cosine", 10, gen.grid)), 2)
            out.append(integrated_squared_error(est.beta_hat, gen.beta_true))
        return np.mean(out)

    base = mean_ise(100)
    for G in (50, 200):
        assert mean_ise(G) == pytest.approx(base, rel=0.02)
