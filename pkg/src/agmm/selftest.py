"""Quick oracle and invariant checks that run without a test framework.

Each check compares a library routine against a slow, explicit
computation on a small instance. :func:`run` returns ``(name, ok, detail)``
triples.
"""

from __future__ import annotations

import numpy as np

from .funcspace import Grid, KernelSurface, make_basis
from .moments import compute_moments
from .panels import CurvePanel, SparsePanel
from .simgen import population_variances
from .sparseobs import SmootherSpec, smooth_autocov, smooth_crosscov
from .spectral import eigen_raw

__all__ = ["run"]


def _small_panel(seed=0, n=9, G=12):
    rng = np.random.default_rng(seed)
    grid = Grid.uniform(G)
    W = rng.standard_normal((n, G)).cumsum(axis=1) / 3
    Y = rng.standard_normal(n)
    Yf = rng.standard_normal((n, G))
    return CurvePanel(grid, W, Y, Yf)


def check_moment_sums():
    """``K-hat``, ``R-hat`` and ``H-hat`` against explicit nested sums."""
    panel = _small_panel()
    L = 2
    m = compute_moments(panel, L)
    W = panel.W - panel.W.mean(0)
    Y = panel.Y - panel.Y.mean()
    Yf = panel.Yfun - panel.Yfun.mean(0)
    w = panel.grid.weights
    n, G = W.shape
    N = n - L
    K = np.zeros((G, G))
    R = np.zeros(G)
    H = np.zeros((G, G))
    for k in range(1, L + 1):
        for a in range(G):
            for b in range(G):
                for z in range(G):
                    cu = sum(W[t, a] * W[t + k, z] for t in range(N)) / N
                    cv = sum(W[t, b] * W[t + k, z] for t in range(N)) / N
                    dv = sum(Yf[t, b] * W[t + k, z] for t in range(N)) / N
                    K[a, b] += w[z] * cu * cv
                    H[a, b] += w[z] * cu * dv
            for z in range(G):
                cu = sum(W[t, a] * W[t + k, z] for t in range(N)) / N
                R[a] += w[z] * cu * sum(Y[t] * W[t + k, z] for t in range(N)) / N
    err = max(
        np.abs(m.K_hat.values - K).max(),
        np.abs(m.R_hat.values - R).max(),
        np.abs(m.H_hat.values - H).max(),
    )
    return err <= 1e-10, f"max deviation {err:.2e}"


def check_eigen():
    """Weighted eigenproblem against a dense generalized solve."""
    rng = np.random.default_rng(1)
    grid = Grid.uniform(16)
    A = rng.standard_normal((16, 16))
    K = KernelSurface(grid, A @ A.T, symmetric=True)
    dec = eigen_raw(K)
    w = grid.weights
    # Eigenfunctions satisfy K W psi = theta psi with psi^T W psi = 1.
    resid = np.abs(K.values @ (w[:, None] * dec.psi.T) - dec.psi.T * dec.theta).max()
    gram = np.abs((dec.psi * w) @ dec.psi.T - np.eye(16)).max()
    vals = np.sort(np.linalg.eigvals(K.values @ np.diag(w)).real)[::-1]
    err = max(resid, gram, np.abs(vals - dec.theta).max())
    return err <= 1e-9, f"max deviation {err:.2e}"


def check_local_linear():
    """Both smoothers reproduce affine targets exactly.

    With one lag pair, products ``Z_0i Z_1j`` equal ``a + b U_0i`` when curve 0
    is affine and curve 1 constant, and ``c U_1j`` in the mirrored case. The
    fit is linear in the products for fixed locations, so exactness on both
    pieces covers every plane ``a + b u + c v``.
    """
    rng = np.random.default_rng(2)
    m = 80
    t = np.repeat([0, 1], m)
    u = rng.uniform(0, 1, 2 * m)
    spec = SmootherSpec(h_C=0.3, h_S=0.3)
    grid = Grid.uniform(20)
    uu, vv = np.meshgrid(grid.points, grid.points, indexing="ij")
    first = np.where(t == 0, 1.0 + 2.0 * u, 1.0)
    second = np.where(t == 0, 1.0, -3.0 * u)
    fit = sum(
        smooth_autocov(SparsePanel(t, u, z, np.ones(2)), 1, spec, L=1, grid=grid, center=False).values
        for z in (first, second)
    )
    err = np.abs(fit - (1.0 + 2.0 * uu - 3.0 * vv)).max()
    y = np.array([1.5, 1.0])
    S = smooth_crosscov(SparsePanel(t, u, np.where(t == 1, 0.5 + 2.0 * u, 0.0), y), 1, spec, L=1, grid=grid, center=False)
    err = max(err, np.abs(S.values - 1.5 * (0.5 + 2.0 * grid.points)).max())
    return err <= 1e-10, f"max deviation {err:.2e}"


def check_population_variances():
    """Example 2 component variances at two decimals."""
    v = population_variances(2, 2)
    got = np.round(v["total"][:2], 2).tolist() + np.round(v["signal"][:2], 2).tolist()
    ok = got == [2.73, 1.69, 1.73, 1.19]
    return ok, f"totals/signals {got}"


def check_basis():
    """Orthonormality of the generated bases."""
    grid = Grid.uniform(100)
    err = max(np.abs(make_basis(kind, 15, grid).gram() - np.eye(15)).max() for kind in ("fourier", "cosine"))
    return err <= 1e-10, f"max deviation {err:.2e}"


CHECKS = {
    "moment sums": check_moment_sums,
    "weighted eigenproblem": check_eigen,
    "local-linear exactness": check_local_linear,
    "population variances": check_population_variances,
    "basis orthonormality": check_basis,
}


def run():
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not abort the remaining checks
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append((name, bool(ok), detail))
    return out
