"""Estimation from irregularly and noisily sampled predictor curves.

Lag-k autocovariance surfaces are local-linear fits of the raw products
``Z_ti Z_{(t+k)j}`` and the response cross-covariances are local-linear
fits of ``Y_t Z_{(t+k)i}``. Both smoothers factor over curves: the local
normal equations at a node pair ``(u_a, v_b)`` are sums over ``t`` of
products of per-curve kernel moments

    A_p[t, a]  = sum_i K((U_ti - u_a)/h) ((U_ti - u_a)/h)^p
    AZ_p[t, a] = sum_i K((U_ti - u_a)/h) ((U_ti - u_a)/h)^p Z_ti

so every lag reduces to a handful of ``(G, n) @ (n, G)`` products and a
closed-form 3x3 (surface) or 2x2 (curve) solve per node. For lag ``k >= 1``
the two indices of a product come from different curves, so no diagonal
pairs need to be removed.

A basis-expansion alternative fits ``C_k(u, v) = B(u)^T Sigma_k B(v)`` and
``S_k(u) = delta_k^T B(u)`` by least squares.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .estimators import RankDeficiencyError, SlopeEstimate, agmm_scalar
from .funcspace import BasisSet, DiscretizedFunction, Grid, IllPosedError, KernelSurface
from .moments import DEFAULT_L, InsufficientDataError, MomentSet, build_K, build_R
from .panels import SparsePanel
from .spectral import eigen_basis, eigen_raw, select_M_ratio

__all__ = [
    "SmootherSpec",
    "SingularDesignWarning",
    "smooth_mean",
    "smooth_autocov",
    "smooth_crosscov",
    "basis_autocov",
    "basis_crosscov",
    "sparse_moments",
    "select_bandwidths_cv",
    "sparse_agmm",
]

logger = logging.getLogger(__name__)

KERNELS = ("epanechnikov", "triangular")
DEFAULT_H_GRID = (0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2, 0.3)
# Relative determinant below which a local design counts as singular.
SINGULAR_TOL = 1e-10
COND_LIMIT = 1e10


class SingularDesignWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SmootherSpec:
    """Kernel and bandwidths of the local-linear smoothers.

    Parameters
    ----------
    kernel : {'epanechnikov', 'triangular'}
        Symmetric density supported on ``[-1, 1]``.
    h_C : float
        Bandwidth of the autocovariance surface smoother.
    h_S : float
        Bandwidth of the cross-covariance (and mean) curve smoother.
    boundary : {'none', 'reflection'}
        ``'none'`` lets the local line adapt one-sidedly near 0 and 1;
        ``'reflection'`` adds mirror images of the locations about 0 and 1.
    """

    kernel: str = "epanechnikov"
    h_C: float = 0.1
    h_S: float = 0.1
    boundary: str = "none"

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}")
        if not (self.h_C > 0 and self.h_S > 0):
            raise ValueError("bandwidths must be positive")
        if self.boundary not in ("none", "reflection"):
            raise ValueError("boundary must be 'none' or 'reflection'")

    def weight(self, x):
        """Kernel value at ``x``."""
        ax = np.abs(x)
        if self.kernel == "epanechnikov":
            return np.where(ax <= 1.0, 0.75 * (1.0 - x * x), 0.0)
        return np.where(ax <= 1.0, 1.0 - ax, 0.0)


def _kernel_moments(panel, grid, h, spec, values=None, powers=(0, 1, 2), value_powers=(0, 1)):
    """Per-curve kernel moment arrays.

    Returns ``{p: (n, G)}`` for ``powers`` and, when ``values`` (one per
    observation) is given, a second dict for ``value_powers`` in which each
    term is multiplied by the value. Only the nodes within ``h`` of an
    observation are visited.
    """
    pts, n, G = grid.points, panel.n, grid.size
    locs = [panel.u]
    if spec.boundary == "reflection":
        locs += [-panel.u, 2.0 - panel.u]
    plain = {p: np.zeros(n * G) for p in powers}
    weighted = {p: np.zeros(n * G) for p in value_powers} if values is not None else None
    top = max(powers + (value_powers if values is not None else ()))
    for loc in locs:
        lo = np.searchsorted(pts, loc - h, side="left")
        hi = np.searchsorted(pts, loc + h, side="right")
        width = int((hi - lo).max(initial=0))
        if width == 0:
            continue
        idx = lo[:, None] + np.arange(width)[None, :]
        inside = idx < hi[:, None]
        idx = np.minimum(idx, G - 1)
        x = (loc[:, None] - pts[idx]) / h
        kx = np.where(inside, spec.weight(x), 0.0)
        flat = (panel.t[:, None] * G + idx).ravel()
        term = kx
        for p in range(top + 1):
            if p in plain:
                plain[p] += np.bincount(flat, term.ravel(), minlength=n * G)
            if weighted is not None and p in weighted:
                weighted[p] += np.bincount(flat, (term * values[:, None]).ravel(), minlength=n * G)
            term = term * x
    plain = {p: a.reshape(n, G) for p, a in plain.items()}
    if weighted is None:
        return plain
    return plain, {p: a.reshape(n, G) for p, a in weighted.items()}


def _solve2(S0, S1, S2, T0, T1, where):
    """Intercept of the 2x2 local-linear normal equations, NW where singular."""
    det = S0 * S2 - S1 * S1
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = (T0 * S2 - T1 * S1) / det
        nw = T0 / S0
        singular = ~(np.abs(det) > SINGULAR_TOL * S0 * S0)
    _report(singular, S0, where)
    return np.where(singular, nw, ll)


def _solve3(S, T, where):
    """Intercept of the 3x3 local-linear normal equations by Cramer's rule.

    ``S`` maps ``(p, q)`` to the moment arrays ``S_pq`` and ``T`` maps
    ``(p, q)`` to ``G_pq``, with ``p`` the power in the first coordinate.
    """
    s00, s10, s01 = S[0, 0], S[1, 0], S[0, 1]
    s20, s02, s11 = S[2, 0], S[0, 2], S[1, 1]
    g00, g10, g01 = T[0, 0], T[1, 0], T[0, 1]
    # Normal matrix rows: [s00 s10 s01], [s10 s20 s11], [s01 s11 s02].
    m00 = s20 * s02 - s11 * s11
    m01 = s10 * s02 - s11 * s01
    m02 = s10 * s11 - s20 * s01
    det = s00 * m00 - s10 * m01 + s01 * m02
    num = g00 * m00 - s10 * (g10 * s02 - s11 * g01) + s01 * (g10 * s11 - s20 * g01)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = num / det
        nw = g00 / s00
        singular = ~(np.abs(det) > SINGULAR_TOL * s00**3)
    _report(singular, s00, where)
    return np.where(singular, nw, ll)


def _report(singular, s00, where):
    if np.any(~(s00 > 0)):
        raise InsufficientDataError(f"{where}: no observations within the bandwidth of some grid nodes")
    count = int(np.count_nonzero(singular))
    if count:
        warnings.warn(
            f"{where}: singular local design at {count} node(s); using a locally constant fit there",
            SingularDesignWarning,
            stacklevel=3,
        )


def _check_lag(panel, k, L):
    if panel.n <= L:
        raise InsufficientDataError(f"need more than L={L} curves, got {panel.n}")
    if not 1 <= k <= L:
        raise ValueError(f"lag k={k} must lie in 1..{L}")


def smooth_mean(panel: SparsePanel, spec: SmootherSpec, grid: Grid | None = None) -> DiscretizedFunction:
    """Local-linear estimate of the mean curve from all observations, bandwidth ``h_S``."""
    grid = grid or Grid.uniform()
    A, AZ = _kernel_moments(panel, grid, spec.h_S, spec, values=panel.z)
    mu = _solve2(A[0].sum(0), A[1].sum(0), A[2].sum(0), AZ[0].sum(0), AZ[1].sum(0), "mean smoother")
    return DiscretizedFunction(grid, mu)


class _Pieces:
    """Kernel moments of one panel for one bandwidth, reused across lags."""

    def __init__(self, panel, grid, h, spec, z, y=None):
        self.A, self.AZ = _kernel_moments(panel, grid, h, spec, values=z)
        self.y = y


def _surface_sums(P, k, m, rows=None):
    """Normal-equation moments for lag ``k`` over pairs ``(t, t+k)``, ``t < m``."""
    t = np.arange(m) if rows is None else rows
    A, AZ = P.A, P.AZ
    S = {(p, q): A[p][t].T @ A[q][t + k] for p, q in ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1))}
    T = {(p, q): AZ[p][t].T @ AZ[q][t + k] for p, q in ((0, 0), (1, 0), (0, 1))}
    return S, T


def _curve_sums(P, k, m, rows=None):
    t = np.arange(m) if rows is None else rows
    A, AZ = P.A, P.AZ
    S = [A[p][t + k].sum(0) for p in (0, 1, 2)]
    T = [P.y[t] @ AZ[p][t + k] for p in (0, 1)]
    return S, T


def _centered(panel, spec, grid, center):
    if not center:
        return panel.z, panel.Y
    mu = smooth_mean(panel, spec, grid)
    return panel.z - mu(panel.u), panel.Y - panel.Y.mean()


def smooth_autocov(
    panel: SparsePanel,
    k: int,
    spec: SmootherSpec,
    L: int = DEFAULT_L,
    grid: Grid | None = None,
    center: bool = True,
) -> KernelSurface:
    """Local-linear surface estimate of the lag-``k`` autocovariance.

    At each node ``(u, v)`` the products ``Z_ti Z_{(t+k)j}`` (``t < n - L``)
    are regressed on ``1, U_ti - u, U_{(t+k)j} - v`` with product-kernel
    weights ``K((U_ti - u)/h_C) K((U_{(t+k)j} - v)/h_C)``; the intercept is
    returned. ``center`` subtracts a smoothed mean curve first.
    """
    _check_lag(panel, k, L)
    grid = grid or Grid.uniform()
    z, _ = _centered(panel, spec, grid, center)
    P = _Pieces(panel, grid, spec.h_C, spec, z)
    S, T = _surface_sums(P, k, panel.n - L)
    return KernelSurface(grid, _solve3(S, T, f"lag-{k} surface smoother"))


def smooth_crosscov(
    panel: SparsePanel,
    k: int,
    spec: SmootherSpec,
    L: int = DEFAULT_L,
    grid: Grid | None = None,
    center: bool = True,
) -> DiscretizedFunction:
    """Local-linear estimate of ``u -> Cov(Y_t, W_{t+k}(u))``.

    The products ``Y_t Z_{(t+k)i}`` are regressed on ``1, U_{(t+k)i} - u``
    with weights ``K((U_{(t+k)i} - u)/h_S)``.
    """
    _check_lag(panel, k, L)
    grid = grid or Grid.uniform()
    z, y = _centered(panel, spec, grid, center)
    P = _Pieces(panel, grid, spec.h_S, spec, z, y)
    S, T = _curve_sums(P, k, panel.n - L)
    return DiscretizedFunction(grid, _solve2(*S, *T, f"lag-{k} curve smoother"))


def _starts(panel):
    return np.concatenate([[0], np.cumsum(panel.counts)[:-1]])


def _basis_rows(panel, basis):
    B = basis.at(panel.u)
    starts = _starts(panel)
    P = np.add.reduceat(B[:, :, None] * B[:, None, :], starts, axis=0)
    return B, starts, P


def basis_autocov(panel: SparsePanel, k: int, basis: BasisSet, L: int = DEFAULT_L, center: bool = True) -> KernelSurface:
    """Least-squares fit of ``C_k(u, v) = B(u)^T Sigma_k B(v)`` to the raw products.

    The ``J^2 x J^2`` normal matrix is ``sum_t P_{t+k} (x) P_t`` with
    ``P_t = sum_i B(U_ti) B(U_ti)^T``. A condition number above ``1e10``
    raises :class:`IllPosedError`; reduce ``J`` in that case.
    """
    _check_lag(panel, k, L)
    # A basis fit of the mean keeps the two routes comparable.
    z = panel.z - _basis_mean(panel, basis) if center else panel.z
    B, starts, P = _basis_rows(panel, basis)
    Q = np.add.reduceat(B * z[:, None], starts, axis=0)
    m, J = panel.n - L, basis.J
    gram = np.einsum("tbd,tac->badc", P[k : m + k], P[:m]).reshape(J * J, J * J)
    rhs = (Q[:m].T @ Q[k : m + k]).reshape(-1, order="F")
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllPosedError(f"tensor-basis Gram matrix has condition number {cond:.3g}; reduce J={J}")
    sigma = np.linalg.solve(gram, rhs).reshape(J, J, order="F")
    F = basis.functions
    return KernelSurface(basis.grid, F.T @ sigma @ F)


def _basis_mean(panel, basis):
    B = basis.at(panel.u)
    coef, *_ = np.linalg.lstsq(B, panel.z, rcond=None)
    return B @ coef


def basis_crosscov(panel: SparsePanel, k: int, basis: BasisSet, L: int = DEFAULT_L, center: bool = True) -> DiscretizedFunction:
    """``delta_k = (sum B B^T)^{-1} sum B(U_{(t+k)i}) Y_t Z_{(t+k)i}``, returned as ``delta_k^T B``."""
    _check_lag(panel, k, L)
    z = panel.z - _basis_mean(panel, basis) if center else panel.z
    y = panel.Y - panel.Y.mean() if center else panel.Y
    B, starts, P = _basis_rows(panel, basis)
    Q = np.add.reduceat(B * z[:, None], starts, axis=0)
    m = panel.n - L
    gram = P[k : m + k].sum(0)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllPosedError(f"basis Gram matrix has condition number {cond:.3g}; reduce J={basis.J}")
    delta = np.linalg.solve(gram, y[:m] @ Q[k : m + k])
    return DiscretizedFunction(basis.grid, delta @ basis.functions)


def sparse_moments(
    panel: SparsePanel,
    spec: SmootherSpec | None = None,
    L: int = DEFAULT_L,
    grid: Grid | None = None,
    basis: BasisSet | None = None,
) -> MomentSet:
    """``K-tilde`` and ``R-tilde`` from smoothed lag surfaces and curves.

    Local-linear smoothing is used unless ``basis`` is given, in which case
    the basis-expansion fits are used. ``K-tilde`` is symmetric by
    construction. ``CW_hat`` is not estimable here and is left as zeros.
    """
    if basis is not None:
        grid = basis.grid
        C = [basis_autocov(panel, k, basis, L) for k in range(1, L + 1)]
        S = [basis_crosscov(panel, k, basis, L) for k in range(1, L + 1)]
    else:
        if spec is None:
            raise ValueError("need a SmootherSpec for local-linear smoothing")
        grid = grid or Grid.uniform()
        if panel.n <= L:
            raise InsufficientDataError(f"need more than L={L} curves, got {panel.n}")
        z, y = _centered(panel, spec, grid, True)
        PC = _Pieces(panel, grid, spec.h_C, spec, z)
        PS = PC if spec.h_S == spec.h_C else _Pieces(panel, grid, spec.h_S, spec, z)
        PS.y = y
        m = panel.n - L
        C, S = [], []
        for k in range(1, L + 1):
            C.append(KernelSurface(grid, _solve3(*_surface_sums(PC, k, m), f"lag-{k} surface smoother")))
            Sk, Tk = _curve_sums(PS, k, m)
            S.append(DiscretizedFunction(grid, _solve2(*Sk, *Tk, f"lag-{k} curve smoother")))
    K = build_K(C)
    R = build_R(C, S)
    return MomentSet(L, C, S, K, R, KernelSurface.zeros(grid))


def _bin_weights(panel, grid, values=None):
    """Linear binning of observations to grid nodes, summed per curve."""
    pts = grid.points
    idx = np.clip(np.searchsorted(pts, panel.u, side="right") - 1, 0, pts.size - 2)
    lam = (panel.u - pts[idx]) / (pts[idx + 1] - pts[idx])
    v = np.ones_like(panel.u) if values is None else values
    out = np.zeros((panel.n, pts.size))
    np.add.at(out, (panel.t, idx), (1 - lam) * v)
    np.add.at(out, (panel.t, idx + 1), lam * v)
    return out


def _surface_cv_loss(P, NB, ZB, folds, L):
    """Held-out reconstruction loss of the lag products for bandwidth ``h``.

    Training pairs have both curves outside the validation block, which is
    computed as the full sums minus the pairs touching the block. The
    validation loss ``sum (Z Z' - C(U, U'))^2`` (up to a constant) is
    evaluated with linearly binned observations.
    """
    m = NB.shape[0] - L
    loss = 0.0
    for k in range(1, L + 1):
        S_all, T_all = _surface_sums(P, k, m)
        for block in folds:
            touch = np.unique(np.concatenate([block, block - k]))
            touch = touch[(touch >= 0) & (touch < m)]
            S_ex, T_ex = _surface_sums(P, k, m, touch)
            S = {key: S_all[key] - S_ex[key] for key in S_all}
            T = {key: T_all[key] - T_ex[key] for key in T_all}
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SingularDesignWarning)
                C = _solve3(S, T, "cross-validation")
            va = block[block < m]
            cross = np.sum((ZB[va] @ C) * ZB[va + k])
            sq = np.sum((NB[va] @ (C * C)) * NB[va + k])
            loss += sq - 2.0 * cross
    return loss


def _curve_cv_loss(P, NB, ZB, folds, L):
    y = P.y
    m = NB.shape[0] - L
    loss = 0.0
    for k in range(1, L + 1):
        S_all, T_all = _curve_sums(P, k, m)
        for block in folds:
            touch = np.unique(np.concatenate([block, block - k]))
            touch = touch[(touch >= 0) & (touch < m)]
            S_ex, T_ex = _curve_sums(P, k, m, touch)
            S = [a - b for a, b in zip(S_all, S_ex)]
            T = [a - b for a, b in zip(T_all, T_ex)]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SingularDesignWarning)
                Sk = _solve2(*S, *T, "cross-validation")
            va = block[block < m]
            cross = (y[va] @ ZB[va + k]) @ Sk
            sq = NB[va + k].sum(0) @ (Sk * Sk)
            loss += sq - 2.0 * cross
    return loss


def select_bandwidths_cv(
    panel: SparsePanel,
    h_grid_C=DEFAULT_H_GRID,
    h_grid_S=DEFAULT_H_GRID,
    folds: int = 10,
    kernel: str = "epanechnikov",
    L: int = DEFAULT_L,
    grid: Grid | None = None,
    return_trace: bool = False,
):
    """Blockwise cross-validation of ``h_C`` and ``h_S``.

    Curves are split into ``folds`` contiguous blocks. For each block the
    smoothers are refit on pairs of curves outside it and scored by the
    squared error with which they reproduce the raw products of the pairs
    starting in the block. The mean curve is removed once, with the median
    of ``h_grid_S``. Bandwidths at which some node has no training data
    score infinity.
    """
    h_grid_C, h_grid_S = sorted(set(map(float, h_grid_C))), sorted(set(map(float, h_grid_S)))
    if not h_grid_C or not h_grid_S:
        raise ValueError("bandwidth grids must be nonempty")
    if len(h_grid_C) == 1 and len(h_grid_S) == 1:
        spec = SmootherSpec(kernel, h_grid_C[0], h_grid_S[0])
        return (spec, {}) if return_trace else spec
    grid = grid or Grid.uniform()
    blocks = np.array_split(np.arange(panel.n), folds)
    pilot = SmootherSpec(kernel, h_grid_C[0], float(np.median(h_grid_S)))
    z, y = _centered(panel, pilot, grid, True)

    NB, ZB = _bin_weights(panel, grid), _bin_weights(panel, grid, z)
    pieces = {}

    def score(fn, h):
        if h not in pieces:
            pieces[h] = _Pieces(panel, grid, h, SmootherSpec(kernel, h, h), z, y)
        try:
            return fn(pieces[h], NB, ZB, blocks, L)
        except InsufficientDataError:
            return np.inf

    trace_C = {h: score(_surface_cv_loss, h) for h in h_grid_C} if len(h_grid_C) > 1 else {h_grid_C[0]: np.nan}
    trace_S = {h: score(_curve_cv_loss, h) for h in h_grid_S} if len(h_grid_S) > 1 else {h_grid_S[0]: np.nan}
    h_C = min(trace_C, key=lambda h: (trace_C[h] if np.isfinite(trace_C[h]) else np.inf, h))
    h_S = min(trace_S, key=lambda h: (trace_S[h] if np.isfinite(trace_S[h]) else np.inf, h))
    if all(np.isinf(v) for v in trace_C.values()) and len(h_grid_C) > 1:
        raise InsufficientDataError("no surface bandwidth in the grid has data near every node")
    spec = SmootherSpec(kernel, h_C, h_S)
    logger.debug("bandwidth CV chose h_C=%g h_S=%g", h_C, h_S)
    return (spec, {"h_C": trace_C, "h_S": trace_S}) if return_trace else spec


def sparse_agmm(
    panel: SparsePanel,
    spec: SmootherSpec | None = None,
    L: int = DEFAULT_L,
    rank_rule=0.95,
    grid: Grid | None = None,
    basis: BasisSet | None = None,
    smoothing_basis: BasisSet | None = None,
) -> SlopeEstimate:
    """AGMM slope estimate from a sparsely observed predictor.

    Parameters
    ----------
    panel : SparsePanel
    spec : SmootherSpec, optional
        Local-linear smoother settings; ``None`` runs
        :func:`select_bandwidths_cv` with its default grids.
    L : int
    rank_rule : float or int
        A float in ``(0, 1)`` keeps the fewest eigenvalues of ``K-tilde``
        explaining that share of the total; an int is used as the rank.
    basis : BasisSet, optional
        Basis for the eigenanalysis of ``K-tilde``; raw grid if omitted.
    smoothing_basis : BasisSet, optional
        Use the basis-expansion moment fits instead of local-linear smoothing.

    Notes
    -----
    ``K-tilde`` is symmetrized and its negative eigenvalues are clipped to
    zero before the spectral inverse is applied.
    """
    if smoothing_basis is None and spec is None:
        spec = select_bandwidths_cv(panel, L=L, grid=grid)
    moments = sparse_moments(panel, spec, L, grid, smoothing_basis)
    K = moments.K_hat.symmetrized()
    dec = eigen_raw(K) if basis is None else eigen_basis(K, basis)
    theta = np.clip(dec.theta, 0.0, None)
    dec = type(dec)(dec.grid, theta, dec.psi, dec.mode, dec.delta, dec.basis)
    if isinstance(rank_rule, (int, np.integer)) and not isinstance(rank_rule, bool):
        rank = int(rank_rule)
    elif 0 < float(rank_rule) < 1:
        rank = select_M_ratio(theta, float(rank_rule))
    else:
        raise ValueError("rank_rule must be an int rank or a variance share in (0, 1)")
    if theta[0] <= 0:
        raise RankDeficiencyError("smoothed operator has no positive eigenvalue")
    est = agmm_scalar(moments, dec, rank)
    diag = dict(est.diagnostics)
    if spec is not None:
        diag.update(h_C=spec.h_C, h_S=spec.h_S)
    return SlopeEstimate(est.beta_hat, "SparseAGMM", rank, diag)
