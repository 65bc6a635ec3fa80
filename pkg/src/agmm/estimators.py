"""Slope-function estimators.

The autocovariance-based estimators (AGMM and its ridge variant) invert
``K-hat`` on its leading eigenpairs and apply the inverse to ``R-hat``.
The competitors work with the lag-0 covariance (CLS, CGMM) or regress the
response on ``K-hat`` scores by least squares (ALS).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .funcspace import BasisSet, DiscretizedFunction, KernelSurface
from .moments import DEFAULT_L, MomentSet, center_panel, lag0_cov
from .panels import CurvePanel
from .spectral import SpectralDecomposition, eigen_basis, eigen_raw, select_M_ratio

__all__ = [
    "RankDeficiencyError",
    "SlopeEstimate",
    "SurfaceEstimate",
    "METHODS",
    "agmm_scalar",
    "ridge_agmm",
    "cls_scalar",
    "cgmm_scalar",
    "als_scalar",
    "agmm_functional",
    "integrated_squared_error",
    "mise",
]

METHODS = ("BaseCLS", "CLS", "BaseCGMM", "BaseALS", "BaseAGMM", "AGMM", "RidgeAGMM")
RANK_TOL = 1e-12


class RankDeficiencyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SlopeEstimate:
    beta_hat: DiscretizedFunction
    method: str
    rank_used: int
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        np.savetxt(
            path,
            np.column_stack([self.beta_hat.grid.points, self.beta_hat.values]),
            delimiter=",",
            header="u,beta_hat",
            comments="",
            fmt="%.17g",
        )


@dataclass(frozen=True, eq=False)
class SurfaceEstimate:
    gamma_hat: KernelSurface
    method: str
    rank_used: int


def _check_rank(theta, rank):
    if rank < 1 or rank > theta.size:
        raise ValueError(f"rank {rank} outside 1..{theta.size}")
    if theta[rank - 1] <= RANK_TOL * theta[0]:
        raise RankDeficiencyError(
            f"eigenvalue {rank} is numerically zero ({theta[rank - 1]:.3g}); use a smaller rank or ridge_agmm"
        )


def _spectral_inverse(decomposition, R_values, shifts):
    psi = decomposition.psi[: shifts.size]
    coefs = (psi * decomposition.grid.weights) @ R_values
    return (coefs / shifts) @ psi, coefs


def _smoothed_R(moments, decomposition):
    R = moments.R_hat
    if decomposition.basis is not None:
        R = decomposition.basis.project(R)
    return R


def agmm_scalar(moments: MomentSet, decomposition: SpectralDecomposition, rank: int) -> SlopeEstimate:
    """Truncated spectral inverse of ``K-hat`` applied to ``R-hat``.

    A raw-grid decomposition gives Base AGMM; a basis decomposition gives
    AGMM, in which case ``R-hat`` is first projected onto the basis span.
    """
    _check_rank(decomposition.theta, rank)
    R = _smoothed_R(moments, decomposition)
    theta = decomposition.theta[:rank]
    beta, coefs = _spectral_inverse(decomposition, R.values, theta)
    method = "BaseAGMM" if decomposition.basis is None else "AGMM"
    return SlopeEstimate(
        DiscretizedFunction(decomposition.grid, beta),
        method,
        rank,
        {"theta": theta.copy(), "coefs": coefs / theta, "J": decomposition.J},
    )


def ridge_agmm(moments: MomentSet, decomposition: SpectralDecomposition, M_bar: int, rho: float) -> SlopeEstimate:
    """``sum_{j<=M_bar} (theta_j + rho)^{-1} <psi_j, R> psi_j``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0:
        _check_rank(decomposition.theta, M_bar)
    M_bar = min(M_bar, decomposition.rank)
    R = _smoothed_R(moments, decomposition)
    theta = np.clip(decomposition.theta[:M_bar], 0.0, None)
    beta, coefs = _spectral_inverse(decomposition, R.values, theta + rho)
    return SlopeEstimate(
        DiscretizedFunction(decomposition.grid, beta),
        "RidgeAGMM",
        M_bar,
        {"theta": theta, "rho": rho, "J": decomposition.J},
    )


def _decompose(K, basis):
    return eigen_raw(K) if basis is None else eigen_basis(K, basis)


def _regress_on_scores(panel, decomposition, rank, method):
    """OLS of the (centered) response on ``<W_t, psi_j>``, ``j <= rank``."""
    S = decomposition.scores(panel.W, rank)
    b, *_ = np.linalg.lstsq(S, panel.Y, rcond=None)
    beta = b @ decomposition.psi[:rank]
    return SlopeEstimate(DiscretizedFunction(panel.grid, beta), method, rank, {"coefs": b, "J": decomposition.J})


def cls_scalar(
    panel: CurvePanel,
    rank: int | None = None,
    variance_threshold: float = 0.9,
    basis: BasisSet | None = None,
) -> SlopeEstimate:
    """Least squares on principal component scores of the lag-0 covariance.

    ``rank=None`` keeps the fewest components explaining
    ``variance_threshold`` of the variation. With ``basis`` the
    eigenanalysis is basis-expanded (CLS), otherwise raw (Base CLS).
    """
    panel = center_panel(panel)
    dec = _decompose(lag0_cov(panel), basis)
    if rank is None:
        rank = select_M_ratio(dec.theta, variance_threshold)
    return _regress_on_scores(panel, dec, rank, "BaseCLS" if basis is None else "CLS")


def cgmm_scalar(
    panel: CurvePanel,
    rank: int | None = None,
    variance_threshold: float = 0.9,
    L: int = DEFAULT_L,
    basis: BasisSet | None = None,
) -> SlopeEstimate:
    """Identity-weighted GMM in the score space of the lag-0 covariance.

    With ``xi_t`` the scores, ``Gamma_k`` their lag-k autocovariance and
    ``c_k`` the lag-k covariance of ``Y_t`` with ``xi_{t+k}``, the moment
    conditions ``c_k - Gamma_k^T b = 0`` (k = 1..L) give the normal equation
    ``(sum_k Gamma_k Gamma_k^T) b = sum_k Gamma_k c_k``.
    """
    panel = center_panel(panel)
    dec = _decompose(lag0_cov(panel), basis)
    if rank is None:
        rank = select_M_ratio(dec.theta, variance_threshold)
    S = dec.scores(panel.W, rank)
    m = panel.n - L
    A = np.zeros((rank, rank))
    rhs = np.zeros(rank)
    for k in range(1, L + 1):
        Gam = S[:m].T @ S[k : m + k] / m
        c = S[k : m + k].T @ panel.Y[:m] / m
        A += Gam @ Gam.T
        rhs += Gam @ c
    b = np.linalg.solve(A, rhs)
    beta = b @ dec.psi[:rank]
    return SlopeEstimate(
        DiscretizedFunction(panel.grid, beta),
        "BaseCGMM" if basis is None else "CGMM",
        rank,
        {"coefs": b, "J": dec.J},
    )


def als_scalar(panel: CurvePanel, decomposition: SpectralDecomposition, rank: int) -> SlopeEstimate:
    """Least squares on scores from the eigenfunctions of ``K-hat`` (Base ALS when raw)."""
    panel = center_panel(panel)
    method = "BaseALS" if decomposition.basis is None else "ALS"
    return _regress_on_scores(panel, decomposition, rank, method)


def agmm_functional(moments: MomentSet, decomposition: SpectralDecomposition, rank: int) -> SurfaceEstimate:
    """Spectral inverse of ``K-hat`` applied to each response section of ``H-hat``.

    ``g(w, v) = sum_{j<=rank} theta_j^{-1} psi_j(w) <psi_j, H(., v)>`` has the
    predictor argument first. It is returned transposed, so that
    ``gamma_hat(u, v)`` pairs response point ``u`` with predictor point ``v``
    as in ``Y_t(u) = int gamma(u, v) X_t(v) dv`` (the orientation used by
    :func:`agmm.simgen.gen_functional_response`).
    """
    if moments.H_hat is None:
        raise ValueError("moments carry no functional-response kernel H")
    _check_rank(decomposition.theta, rank)
    psi = decomposition.psi[:rank]
    theta = decomposition.theta[:rank]
    proj = (psi * decomposition.grid.weights) @ moments.H_hat.values
    gamma = (psi.T / theta) @ proj
    return SurfaceEstimate(KernelSurface(decomposition.grid, gamma.T), "AGMM", rank)


def integrated_squared_error(beta_hat: DiscretizedFunction, beta_true: DiscretizedFunction) -> float:
    diff = beta_hat - beta_true
    return float(np.dot(diff.grid.weights, diff.values**2))


def mise(beta_hats, beta_true) -> tuple[float, float]:
    """Mean integrated squared error over runs and its standard error.

    ``beta_true`` is a single function or one per run. The standard error
    is the sample standard deviation divided by the square root of the
    number of runs.
    """
    beta_hats = list(beta_hats)
    if isinstance(beta_true, DiscretizedFunction):
        beta_true = [beta_true] * len(beta_hats)
    ise = np.array([integrated_squared_error(b, t) for b, t in zip(beta_hats, beta_true)])
    if ise.size == 1:
        return float(ise[0]), 0.0
    return float(ise.mean()), float(ise.std(ddof=1) / np.sqrt(ise.size))
