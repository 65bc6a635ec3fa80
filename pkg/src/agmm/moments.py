"""Sample autocovariance moments of a fully observed curve panel.

Every lag uses the same ``n - L`` leading curves and the same denominator
``n - L``, so all lags share one sample. With ``C_k`` the lag-k sample
autocovariance and ``c_k`` the lag-k response cross-covariance,

    K(u, v) = sum_k int C_k(u, z) C_k(v, z) dz
    R(u)    = sum_k int C_k(u, z) c_k(z) dz
    H(u, v) = sum_k int C_k(u, z) D_k(v, z) dz

where ``D_k(v, z)`` is the lag-k cross-covariance of a functional response.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .funcspace import DiscretizedFunction, Grid, KernelSurface
from .panels import CurvePanel

__all__ = [
    "InsufficientDataError",
    "MomentSet",
    "center_panel",
    "lag_autocov",
    "lag_crosscov",
    "lag_crosscov_functional",
    "build_K",
    "build_R",
    "build_H",
    "lag0_cov",
    "compute_moments",
]

DEFAULT_L = 5


class InsufficientDataError(ValueError):
    pass


def center_panel(panel: CurvePanel) -> CurvePanel:
    """Subtract the pointwise mean curve and the mean response(s)."""
    if panel.n < 2:
        raise InsufficientDataError("centering needs at least two curves")
    W = panel.W - panel.W.mean(axis=0)
    Y = None if panel.Y is None else panel.Y - panel.Y.mean()
    Yf = None if panel.Yfun is None else panel.Yfun - panel.Yfun.mean(axis=0)
    return CurvePanel(panel.grid, W, Y, Yf)


def _check_lag(n, k, L):
    if n <= L:
        raise InsufficientDataError(f"need more than L={L} curves, got {n}")
    if not 1 <= k <= L:
        raise ValueError(f"lag k={k} must lie in 1..{L}")


def _autocov_matrix(W, k, L):
    m = W.shape[0] - L
    return W[:m].T @ W[k : m + k] / m


def lag_autocov(panel: CurvePanel, k: int, L: int = DEFAULT_L) -> KernelSurface:
    """``C_k(u, v) = (n-L)^{-1} sum_{t<=n-L} W_t(u) W_{t+k}(v)`` on a centered panel."""
    _check_lag(panel.n, k, L)
    return KernelSurface(panel.grid, _autocov_matrix(panel.W, k, L))


def lag_crosscov(panel: CurvePanel, k: int, L: int = DEFAULT_L) -> DiscretizedFunction:
    """``c_k(u) = (n-L)^{-1} sum_{t<=n-L} Y_t W_{t+k}(u)``."""
    _check_lag(panel.n, k, L)
    if panel.Y is None:
        raise ValueError("panel has no scalar response")
    m = panel.n - L
    return DiscretizedFunction(panel.grid, panel.Y[:m] @ panel.W[k : m + k] / m)


def lag_crosscov_functional(panel: CurvePanel, k: int, L: int = DEFAULT_L) -> KernelSurface:
    """``D_k(v, z) = (n-L)^{-1} sum_t Y_t(v) W_{t+k}(z)``."""
    _check_lag(panel.n, k, L)
    if panel.Yfun is None:
        raise ValueError("panel has no functional response")
    m = panel.n - L
    return KernelSurface(panel.grid, panel.Yfun[:m].T @ panel.W[k : m + k] / m)


def _weighted_gram(mats, w):
    out = 0.0
    for C in mats:
        out = out + (C * w) @ C.T
    return 0.5 * (out + out.T)


def build_K(C_hats) -> KernelSurface:
    """Sum over lags of ``int C_k(u, z) C_k(v, z) dz``; symmetric and PSD."""
    C_hats = list(C_hats)
    if not C_hats:
        raise ValueError("need at least one lag")
    grid = C_hats[0].grid
    values = _weighted_gram([C.values for C in C_hats], grid.weights)
    return KernelSurface(grid, values, symmetric=True)


def build_R(C_hats, c_hats) -> DiscretizedFunction:
    """Sum over lags of ``int C_k(u, z) c_k(z) dz``."""
    C_hats, c_hats = list(C_hats), list(c_hats)
    grid = C_hats[0].grid
    w = grid.weights
    values = sum(C.values @ (w * c.values) for C, c in zip(C_hats, c_hats))
    return DiscretizedFunction(grid, values)


def build_H(C_hats, D_hats) -> KernelSurface:
    """Sum over lags of ``int C_k(u, z) D_k(v, z) dz``."""
    C_hats, D_hats = list(C_hats), list(D_hats)
    grid = C_hats[0].grid
    w = grid.weights
    values = sum((C.values * w) @ D.values.T for C, D in zip(C_hats, D_hats))
    return KernelSurface(grid, values)


def lag0_cov(panel: CurvePanel) -> KernelSurface:
    """Sample covariance ``n^{-1} sum_t W_t(u) W_t(v)`` of a centered panel."""
    values = panel.W.T @ panel.W / panel.n
    return KernelSurface(panel.grid, 0.5 * (values + values.T), symmetric=True)


@dataclass(frozen=True, eq=False)
class MomentSet:
    """All moment functionals needed by the estimators."""

    L: int
    C_hat: list
    c_hat: list | None
    K_hat: KernelSurface
    R_hat: DiscretizedFunction | None
    CW_hat: KernelSurface
    H_hat: KernelSurface | None = None
    D_hat: list | None = field(default=None, repr=False)

    @property
    def grid(self) -> Grid:
        return self.K_hat.grid

    def save(self, path) -> None:
        """Write an ``.npz`` bundle (grid, lag surfaces, kernels)."""
        arrays = {
            "L": np.array(self.L),
            "points": self.grid.points,
            "weights": self.grid.weights,
            "C_hat": np.stack([C.values for C in self.C_hat]),
            "K_hat": self.K_hat.values,
            "CW_hat": self.CW_hat.values,
        }
        if self.c_hat is not None:
            arrays["c_hat"] = np.stack([c.values for c in self.c_hat])
            arrays["R_hat"] = self.R_hat.values
        if self.H_hat is not None:
            arrays["H_hat"] = self.H_hat.values
            arrays["D_hat"] = np.stack([D.values for D in self.D_hat])
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "MomentSet":
        with np.load(path) as data:
            grid = Grid(data["points"], data["weights"])
            C_hat = [KernelSurface(grid, C) for C in data["C_hat"]]
            c_hat = R_hat = H_hat = D_hat = None
            if "c_hat" in data:
                c_hat = [DiscretizedFunction(grid, c) for c in data["c_hat"]]
                R_hat = DiscretizedFunction(grid, data["R_hat"])
            if "H_hat" in data:
                H_hat = KernelSurface(grid, data["H_hat"])
                D_hat = [KernelSurface(grid, D) for D in data["D_hat"]]
            return cls(
                L=int(data["L"]),
                C_hat=C_hat,
                c_hat=c_hat,
                K_hat=KernelSurface(grid, data["K_hat"], symmetric=True),
                R_hat=R_hat,
                CW_hat=KernelSurface(grid, data["CW_hat"], symmetric=True),
                H_hat=H_hat,
                D_hat=D_hat,
            )


def compute_moments(panel: CurvePanel, L: int = DEFAULT_L, center: bool = True) -> MomentSet:
    """Centre the panel (optionally) and compute every lag-1..L moment."""
    if center:
        panel = center_panel(panel)
    if panel.n <= L:
        raise InsufficientDataError(f"need more than L={L} curves, got {panel.n}")
    C_hat = [lag_autocov(panel, k, L) for k in range(1, L + 1)]
    K_hat = build_K(C_hat)
    c_hat = R_hat = H_hat = D_hat = None
    if panel.Y is not None:
        c_hat = [lag_crosscov(panel, k, L) for k in range(1, L + 1)]
        R_hat = build_R(C_hat, c_hat)
    if panel.Yfun is not None:
        D_hat = [lag_crosscov_functional(panel, k, L) for k in range(1, L + 1)]
        H_hat = build_H(C_hat, D_hat)
    return MomentSet(L, C_hat, c_hat, K_hat, R_hat, lag0_cov(panel), H_hat, D_hat)
