"""Eigenanalysis of integral operators and selection of the tuning parameters.

Raw-grid eigenproblems are symmetrized with square-root quadrature
weights, so eigenfunctions come out orthonormal under the grid inner
product. Basis-mode eigenproblems work with the ``J x J`` matrix of the
kernel in an orthonormal basis. Each eigenfunction's sign is fixed so that
its largest-magnitude coefficient is positive.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .funcspace import BasisSet, DiscretizedFunction, Grid, KernelSurface, make_basis, same_grid
from .moments import DEFAULT_L, center_panel
from .panels import CurvePanel

__all__ = [
    "SpectralDecomposition",
    "DimensionSelection",
    "eigen_raw",
    "eigen_basis",
    "kernel_from_curves",
    "select_M_ratio",
    "select_d_bootstrap",
    "select_J_cv",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of an operator estimate, eigenvalues in decreasing order.

    ``psi`` has one eigenfunction per row (shape ``(r, G)``). In basis mode
    ``delta`` holds the matching coefficient vectors (shape ``(r, J)``).
    """

    grid: Grid
    theta: np.ndarray
    psi: np.ndarray
    mode: str = "raw"
    delta: np.ndarray | None = None
    basis: BasisSet | None = field(default=None, repr=False)

    @property
    def rank(self) -> int:
        return self.theta.size

    @property
    def J(self) -> int | None:
        return None if self.basis is None else self.basis.J

    def eigenfunction(self, j: int) -> DiscretizedFunction:
        return DiscretizedFunction(self.grid, self.psi[j])

    def reconstruct(self, r: int) -> KernelSurface:
        """``sum_{j<r} theta_j psi_j (x) psi_j``."""
        P = self.psi[:r]
        return KernelSurface(self.grid, (P.T * self.theta[:r]) @ P, symmetric=True)

    def scores(self, W: np.ndarray, r: int) -> np.ndarray:
        """``<W_t, psi_j>`` for each row of ``W`` and ``j < r``."""
        return (W * self.grid.weights) @ self.psi[:r].T


@dataclass(frozen=True)
class DimensionSelection:
    d_hat: int
    exceedances: dict
    B: int
    alpha: float
    reached_max: bool = False


def _fix_signs(vecs):
    """Flip columns so the largest-magnitude entry of each is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigen_raw(K: KernelSurface, rank: int | None = None) -> SpectralDecomposition:
    """Eigen-decompose the operator with kernel ``K`` on the raw grid."""
    vals = K.values
    scale = np.abs(vals).max()
    if np.abs(vals - vals.T).max() > 1e-10 * max(scale, np.finfo(float).tiny):
        raise ValueError("kernel is not symmetric; symmetrize before eigenanalysis")
    s = K.grid.sqrt_weights
    A = s[:, None] * vals * s[None, :]
    A = 0.5 * (A + A.T)
    G = A.shape[0]
    if rank is not None and rank < G:
        theta, V = eigh(A, subset_by_index=[G - rank, G - 1])
    else:
        theta, V = np.linalg.eigh(A)
    theta, V = theta[::-1], V[:, ::-1]
    psi = V / s[:, None]
    psi = _fix_signs(psi)
    return SpectralDecomposition(K.grid, theta, psi.T, mode="raw")


def eigen_basis(K: KernelSurface, basis: BasisSet) -> SpectralDecomposition:
    """Eigen-decompose ``int int B(u) K(u, v) B(v)^T`` and map back through ``B``."""
    same_grid(K, basis)
    KB = basis.surface_matrix(K)
    theta, delta = np.linalg.eigh(0.5 * (KB + KB.T))
    theta, delta = theta[::-1], _fix_signs(delta[:, ::-1])
    psi = delta.T @ basis.functions
    return SpectralDecomposition(K.grid, theta, psi, mode=f"basis({basis.J})", delta=delta.T, basis=basis)


def _kernel_matrix(W, L, w):
    """``K-hat`` values from a centered ``(n, G)`` array of curves."""
    m = W.shape[0] - L
    out = np.zeros((W.shape[1], W.shape[1]))
    for k in range(1, L + 1):
        C = W[:m].T @ W[k : m + k] / m
        out += (C * w) @ C.T
    return 0.5 * (out + out.T)


def kernel_from_curves(panel: CurvePanel, L: int = DEFAULT_L, center: bool = True) -> KernelSurface:
    """``K-hat`` straight from a panel, without the response moments."""
    W = center_panel(panel).W if center else panel.W
    return KernelSurface(panel.grid, _kernel_matrix(W, L, panel.grid.weights), symmetric=True)


def select_M_ratio(theta, threshold: float) -> int:
    """Smallest ``M`` whose leading eigenvalues carry ``threshold`` of the total."""
    theta = np.clip(np.asarray(theta, dtype=float), 0.0, None)
    total = theta.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(theta) / total
    return int(np.searchsorted(frac, threshold - 1e-12) + 1)


def _top_eig(A, k):
    """Largest ``k`` eigenvalues of a symmetric matrix, decreasing."""
    G = A.shape[0]
    return eigh(A, eigvals_only=True, subset_by_index=[G - k, G - 1])[::-1]


def select_d_bootstrap(
    panel: CurvePanel,
    decomposition: SpectralDecomposition | None = None,
    B: int = 200,
    alpha: float = 0.05,
    d_max: int = 10,
    L: int = DEFAULT_L,
    seed=None,
) -> DimensionSelection:
    """Sequential residual-resampling bootstrap test for the dimension of the signal.

    For ``d0 = 1, 2, ...`` the panel is projected on the leading ``d0``
    eigenfunctions of ``K-hat``; residual curves are resampled with
    replacement and added back, and ``K-hat*`` is rebuilt. ``theta_{d0+1} = 0``
    is rejected when the observed eigenvalue exceeds the bootstrap one in
    more than ``floor((1 - alpha) B)`` replicates. The first non-rejected
    ``d0`` is returned.
    """
    if B < 100:
        raise ValueError("use at least 100 bootstrap replicates")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    W = center_panel(panel).W
    grid = panel.grid
    w, s = grid.weights, grid.sqrt_weights
    if decomposition is None:
        decomposition = eigen_raw(KernelSurface(grid, _kernel_matrix(W, L, w), symmetric=True), rank=d_max + 1)
    n = W.shape[0]
    cutoff = int(np.floor((1 - alpha) * B))
    exceed = {}
    for d0 in range(1, d_max + 1):
        psi = decomposition.psi[:d0]
        W_hat = ((W * w) @ psi.T) @ psi
        resid = W - W_hat
        theta_obs = decomposition.theta[d0]
        count = 0
        for _ in range(B):
            Wb = W_hat + resid[rng.integers(0, n, n)]
            Wb -= Wb.mean(axis=0)
            Kb = _kernel_matrix(Wb, L, w)
            theta_b = _top_eig(s[:, None] * Kb * s[None, :], d0 + 1)[d0]
            count += theta_obs > theta_b
        exceed[d0] = count
        if count <= cutoff:
            return DimensionSelection(d0, exceed, B, alpha)
    logger.warning("bootstrap dimension test reached d_max=%d without acceptance", d_max)
    return DimensionSelection(d_max, exceed, B, alpha, reached_max=True)


def select_J_cv(
    panel: CurvePanel,
    d: int,
    J_grid=range(5, 26),
    G_folds: int = 10,
    L: int = DEFAULT_L,
    kind: str = "fourier",
    operator: str = "autocov",
    return_trace: bool = False,
):
    """Blockwise ``G``-fold cross-validation for the basis dimension ``J``.

    For each contiguous validation block the leading ``d`` eigenvectors of
    the basis-expanded ``K-hat`` from the remaining curves are scored by
    how well ``sum_j theta_j^(g) psi_j (x) psi_j`` reproduces the
    validation-block ``K-hat`` in Hilbert-Schmidt norm, with
    ``theta_j^(g)`` the validation Rayleigh quotients.
    """
    J_grid = sorted(set(int(J) for J in J_grid))
    if len(J_grid) == 1:
        return (J_grid[0], {J_grid[0]: np.nan}) if return_trace else J_grid[0]
    W = center_panel(panel).W
    grid = panel.grid
    w = grid.weights
    n = W.shape[0]
    folds = np.array_split(np.arange(n), G_folds)
    if min(len(f) for f in folds) < 2 * L:
        raise ValueError(f"folds of {min(len(f) for f in folds)} curves are shorter than 2L={2 * L}")
    big = make_basis(kind, max(J_grid), grid)
    Bw = big.functions * w
    if operator == "autocov":
        build = lambda X: _kernel_matrix(X, L, w)
    elif operator == "cov":
        build = lambda X: X.T @ X / X.shape[0]
    else:
        raise ValueError(f"unknown operator {operator!r}")
    errors = {J: 0.0 for J in J_grid}
    ww = np.outer(w, w)
    for fold in folds:
        train = np.setdiff1d(np.arange(n), fold)
        K_tr = build(W[train])
        K_va = build(W[fold])
        KB_tr = Bw @ K_tr @ Bw.T
        KB_va = Bw @ K_va @ Bw.T
        for J in J_grid:
            dd = min(d, J)
            _, vecs = np.linalg.eigh(KB_tr[:J, :J])
            delta = vecs[:, ::-1][:, :dd]
            theta_va = np.einsum("ij,ik,kj->j", delta, KB_va[:J, :J], delta)
            psi = delta.T @ big.functions[:J]
            resid = K_va - (psi.T * theta_va) @ psi
            errors[J] += float(np.sum(ww * resid**2)) / G_folds
    best = min(J_grid, key=lambda J: errors[J])
    return (best, errors) if return_trace else best
