import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import eigh

from agmm import DgpSpec, Grid, KernelSurface, eigen_basis, eigen_raw, gen_example, make_basis, select_d_bootstrap, select_J_cv
from agmm.spectral import kernel_from_curves, select_M_ratio


def _psd(seed, G=12):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((G, G))
    return KernelSurface(Grid.uniform(G), A @ A.T, symmetric=True)


def test_eigen_raw_solves_weighted_problem():
    K = _psd(0)
    dec = eigen_raw(K)
    w = K.grid.weights
    # Independent route: generalized problem (W K W) v = theta W v.
    theta = eigh(np.diag(w) @ K.values @ np.diag(w), np.diag(w), eigvals_only=True)[::-1]
    np.testing.assert_allclose(dec.theta, theta, rtol=1e-10)
    np.testing.assert_allclose((dec.psi * w) @ dec.psi.T, np.eye(12), atol=1e-10)
    np.testing.assert_allclose(dec.reconstruct(12).values, K.values, atol=1e-9)


def test_sign_convention():
    dec = eigen_raw(_psd(1))
    idx = np.argmax(np.abs(dec.psi), axis=1)
    assert np.all(dec.psi[np.arange(12), idx] > 0)


def test_eigen_raw_rejects_asymmetric():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        eigen_raw(KernelSurface(Grid.uniform(9), rng.standard_normal((9, 9))))


def test_truncated_rank_matches_full():
    K = _psd(2)
    full, top = eigen_raw(K), eigen_raw(K, rank=3)
    np.testing.assert_allclose(top.theta, full.theta[:3], rtol=1e-10)
    np.testing.assert_allclose(top.psi, full.psi[:3], atol=1e-8)


def test_full_basis_reproduces_raw_spectrum():
    K = _psd(3, G=16)
    B = make_basis("cosine", 16, K.grid)
    np.testing.assert_allclose(eigen_basis(K, B).theta, eigen_raw(K).theta, rtol=1e-9)


def test_basis_eigenfunctions_lie_in_span():
    K = _psd(4, G=30)
    B = make_basis("fourier", 7, K.grid)
    dec = eigen_basis(K, B)
    for j in range(3):
        f = dec.eigenfunction(j)
        np.testing.assert_allclose(B.project(f).values, f.values, atol=1e-10)


@pytest.mark.parametrize("theta, thr, M", [([4, 3, 2, 1], 0.7, 2), ([4, 3, 2, 1], 0.7000001, 3), ([1, 0, 0], 0.9, 1), ([0, 0], 0.9, 1)])
def test_select_M_ratio(theta, thr, M):
    assert select_M_ratio(theta, thr) == M


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=20), st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_select_M_ratio_monotone_in_threshold(theta, a, b):
    lo, hi = sorted((a, b))
    theta = sorted(theta, reverse=True)
    assert 1 <= select_M_ratio(theta, lo) <= select_M_ratio(theta, hi) <= max(len(theta), 1)


def test_bootstrap_dimension_is_seeded_and_finds_strong_signal():
    panel = gen_example(DgpSpec(1, 600, 2, seed=4)).W
    a = select_d_bootstrap(panel, B=100, seed=9)
    b = select_d_bootstrap(panel, B=100, seed=9)
    assert a == b
    assert a.d_hat == 2


def test_bootstrap_requires_enough_replicates():
    panel = gen_example(DgpSpec(1, 100, 2, seed=0)).W
    with pytest.raises(ValueError):
        select_d_bootstrap(panel, B=50)


def test_J_cv_deterministic_and_in_grid():
    panel = gen_example(DgpSpec(2, 300, 2, seed=1)).W
    J1, trace = select_J_cv(panel, 2, (5, 9, 13), return_trace=True)
    assert J1 == select_J_cv(panel, 2, (13, 9, 5))
    assert J1 in (5, 9, 13) and set(trace) == {5, 9, 13}
    assert select_J_cv(panel, 2, (7,)) == 7
    with pytest.raises(ValueError):
        select_J_cv(panel, 2, (5, 9), operator="bogus")


def test_kernel_from_curves_matches_moments():
    from agmm import compute_moments

    panel = gen_example(DgpSpec(1, 80, 2, seed=2)).W
    np.testing.assert_allclose(kernel_from_curves(panel).values, compute_moments(panel).K_hat.values, atol=1e-13)


def test_closed_form_spectra():
    g = Grid.uniform(40)
    B = make_basis("cosine", 3, g)
    phi1, phi2 = B[1], B[2]
    one = eigen_raw(KernelSurface.outer(phi1, phi1).symmetrized())
    assert one.theta[0] == pytest.approx(1.0, abs=1e-8)
    np.testing.assert_allclose(one.psi[0], phi1.values * np.sign(phi1.values[np.argmax(np.abs(phi1.values))]), atol=1e-8)
    two = eigen_raw((KernelSurface.outer(phi1, phi1) * 2 + KernelSurface.outer(phi2, phi2)).symmetrized())
    np.testing.assert_allclose(two.theta[:2], [2.0, 1.0], atol=1e-8)


def test_dense_oracle_g20():
    K = _psd(9, G=20)
    s = K.grid.sqrt_weights
    oracle = np.linalg.eigvalsh(s[:, None] * K.values * s)[::-1]
    np.testing.assert_allclose(eigen_raw(K).theta, oracle, atol=1e-9 * oracle[0])


def test_basis_decomposition_closure():
    g = Grid.uniform(50)
    B = make_basis("fourier", 6, g)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6))
    K = KernelSurface(g, B.functions.T @ (A @ A.T) @ B.functions, symmetric=True)
    np.testing.assert_allclose(eigen_basis(K, B).theta, eigen_raw(K).theta[:6], rtol=1e-8)
    # A basis of the leading eigenfunctions reproduces the leading eigenvalues.
    K2 = _psd(10, G=50)
    raw = eigen_raw(K2)
    Q, _ = np.linalg.qr((raw.psi[:4] * g.sqrt_weights).T)
    top = make_basis("cosine", 1, g).__class__(g, (Q / g.sqrt_weights[:, None]).T)
    np.testing.assert_allclose(eigen_basis(K2, top).theta, raw.theta[:4], rtol=1e-8)


def test_basis_and_raw_leading_eigenvalues_agree_example1():
    from agmm import compute_moments

    panel = gen_example(DgpSpec(1, 800, 2, seed=3)).W
    K = compute_moments(panel).K_hat
    np.testing.assert_allclose(eigen_basis(K, make_basis("cosine", 15, K.grid)).theta[:2], eigen_raw(K).theta[:2], rtol=0.02)


def test_select_M_ratio_boundary():
    assert select_M_ratio([5, 3, 1, 1], 0.8) == 2
    assert select_M_ratio([5, 3, 1, 1], 0.81) == 3


def test_bootstrap_power_and_size():
    from agmm import CurvePanel

    found = sum(select_d_bootstrap(gen_example(DgpSpec(1, 800, 2, seed=r)).X_true, B=100, seed=r).d_hat == 2 for r in range(20))
    assert found >= 19
    stopped = 0
    for r in range(20):
        gen = gen_example(DgpSpec(1, 400, 2, seed=r))
        stopped += select_d_bootstrap(CurvePanel(gen.grid, gen.noise), B=100, seed=r).d_hat == 1
    assert stopped >= 20 * (1 - 0.05 - 0.1)


def test_J_cv_self_consistency():
    from agmm import CurvePanel, gen_scores

    hits = 0
    g = Grid.uniform(100)
    B = make_basis("fourier", 5, g)
    for r in range(20):
        rng = np.random.default_rng(r)
        W = gen_scores(800, 5, seed=rng) @ B.functions + rng.standard_normal((800, 100))
        hits += select_J_cv(CurvePanel(g, W), 2, (5, 15)) == 5
    assert hits >= 16


def test_reconstruction_error_shrinks_with_rank():
    K = _psd(11, G=16)
    dec = eigen_raw(K)
    errs = [np.linalg.norm(K.values - dec.reconstruct(r).values) for r in range(1, 17)]
    assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] <= 1e-8 * np.linalg.norm(K.values)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_basis_eigenvalues_never_exceed_raw(seed, J):
    K = _psd(seed, G=24)
    basis_theta = eigen_basis(K, make_basis("cosine", J, K.grid)).theta
    assert np.all(basis_theta <= eigen_raw(K).theta[: basis_theta.size] + 1e-8 * eigen_raw(K).theta[0])


@pytest.mark.slow
def test_bootstrap_recovers_dimension_from_noisy_curves():
    hits = sum(select_d_bootstrap(gen_example(DgpSpec(1, 800, 2, seed=r)).W, B=100, seed=r).d_hat == 2 for r in range(50))
    assert hits >= 40
