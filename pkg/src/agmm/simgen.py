"""Data-generating processes for the simulation examples.

All five examples share the structure

    W_t = X_t + e_t,  X_t = sum_j xi_tj phi_j,  e_t = sum_{j<=10} nu_tj zeta_j,
    Y_t = <X_t, beta_0> + eps_t,

and differ in the basis pair ``(phi, zeta)``, the score dynamics, the noise
variances and the slope coefficients. Example 3 additionally samples each
curve at random locations with additive measurement error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .funcspace import DimensionError, DiscretizedFunction, Grid, KernelSurface
from .panels import CurvePanel, SparsePanel

__all__ = [
    "DgpSpec",
    "SparseDgpSpec",
    "GeneratedPanel",
    "ar_coefficients",
    "gen_scores",
    "gen_example",
    "gen_sparse",
    "gen_functional_response",
    "population_variances",
    "example_bases",
]

SLOPE_COEFS = (2.0, 1.6, -1.2, 0.8, -1.0, -0.6)
EX5_AR = 0.8
EX5_DIM = 25


@dataclass(frozen=True)
class DgpSpec:
    """One simulated panel.

    ``basis_setting`` only matters for example 5, which reuses the basis
    pair of example 1 or example 2. ``burn_in=0`` starts the AR recursions
    from their stationary law; a positive value starts from zero and
    discards that many steps instead.
    """

    example_id: int
    n: int
    d: int = 2
    noise_dim: int = 10
    seed: int | None = 0
    burn_in: int = 0
    grid_size: int = 100
    basis_setting: int = 1
    max_lag: int = 5

    def __post_init__(self):
        if self.example_id not in (1, 2, 3, 4, 5):
            raise ValueError(f"unknown example_id {self.example_id}")
        if self.example_id == 5 and self.d != EX5_DIM:
            object.__setattr__(self, "d", EX5_DIM)
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.example_id != 5 and self.d > len(SLOPE_COEFS):
            raise ValueError(f"examples 1-4 support d <= {len(SLOPE_COEFS)}")
        if self.n < 2 * self.max_lag:
            raise ValueError(f"n={self.n} is below twice the maximum lag {self.max_lag}")
        if self.basis_setting not in (1, 2):
            raise ValueError("basis_setting must be 1 or 2")


@dataclass(frozen=True)
class SparseDgpSpec:
    base: DgpSpec
    m_t: int = 10
    obs_noise_sd: float = 0.5
    snap_to_grid: bool = False

    def __post_init__(self):
        if self.m_t < 2:
            raise ValueError("m_t must be at least 2")


@dataclass(frozen=True, eq=False)
class GeneratedPanel:
    W: CurvePanel
    X_true: CurvePanel
    beta_true: DiscretizedFunction
    Y: np.ndarray
    scores: np.ndarray
    noise_scores: np.ndarray
    phi: np.ndarray
    zeta: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.W.grid

    @property
    def noise(self) -> np.ndarray:
        return self.W.W - self.X_true.W


def ar_coefficients(d: int) -> np.ndarray:
    j = np.arange(1, d + 1)
    return (-1.0) ** j * (0.9 - 0.5 * j / d)


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def gen_scores(n, d, seed=None, coefs=None, innovation_sd=None, burn_in=0):
    """Independent stationary AR(1) score paths, one per column.

    Parameters
    ----------
    n, d : int
    seed : int, SeedSequence or Generator
    coefs : array_like, optional
        AR coefficients; defaults to ``(-1)^j (0.9 - 0.5 j / d)``.
    innovation_sd : array_like, optional
        Innovation standard deviations; defaults to one.
    burn_in : int
        Zero draws the start from the stationary law; otherwise start at
        zero and discard ``burn_in`` steps.

    Returns
    -------
    ndarray, shape (n, d)
    """
    if d < 1:
        raise ValueError("d must be positive")
    a = ar_coefficients(d) if coefs is None else np.broadcast_to(np.asarray(coefs, float), (d,))
    sd = np.ones(d) if innovation_sd is None else np.broadcast_to(np.asarray(innovation_sd, float), (d,))
    if np.any(np.abs(a) >= 1):
        raise ValueError("AR coefficients must lie strictly inside (-1, 1)")
    rng = _rng(seed)
    total = n + burn_in
    innov = rng.standard_normal((total, d)) * sd
    if burn_in == 0:
        start = rng.standard_normal(d) * sd / np.sqrt(1 - a**2)
    else:
        start = np.zeros(d)
    out = np.empty((total, d))
    for j in range(d):
        # x_0 = start, x_t = a x_{t-1} + innov_t for t >= 1
        x0 = start[j]
        rest, _ = lfilter([1.0], [1.0, -a[j]], innov[1:, j], zi=[a[j] * x0])
        out[0, j] = x0
        out[1:, j] = rest
    return out[burn_in:]


def _fourier_rows(count, u):
    rows = []
    k = 1
    while len(rows) < count:
        rows.append(np.sqrt(2) * np.cos(2 * np.pi * k * u))
        rows.append(np.sqrt(2) * np.sin(2 * np.pi * k * u))
        k += 1
    return np.array(rows[:count])


def example_bases(example_id, d, grid, basis_setting=1, noise_dim=10):
    """Signal functions ``phi`` (d x G) and noise functions ``zeta`` (noise_dim x G)."""
    u = grid.points
    setting = basis_setting if example_id == 5 else (1 if example_id == 1 else 2)
    if setting == 1:
        phi = np.array([np.sqrt(2) * np.cos(np.pi * j * u) for j in range(1, d + 1)])
        zeta = np.array([np.sqrt(2) * np.sin(np.pi * j * u) for j in range(1, noise_dim + 1)])
    else:
        rows = _fourier_rows(max(d, noise_dim), u)
        phi, zeta = rows[:d], rows[:noise_dim]
    return phi, zeta


def noise_variances(example_id, d, noise_dim=10):
    if example_id in (1, 5):
        return np.ones(noise_dim)
    j = np.arange(1, noise_dim + 1)
    return np.where(j <= 6, 0.5 ** (j - 1), (2.6 - 0.1 * j) * 1.1 ** (d / 2 - 3))


def slope_coefficients(example_id, d):
    if example_id == 5:
        j = np.arange(1, d + 1)
        return (-1.0) ** (j - 1) * 2.0 * j**-2.0
    b = np.array(SLOPE_COEFS[:d])
    if example_id == 4:
        b[-1] = 0.0
    return b


def _score_law(example_id, d):
    if example_id == 5:
        j = np.arange(1, d + 1)
        return np.full(d, EX5_AR), j**-0.375
    return ar_coefficients(d), np.ones(d)


def gen_example(spec: DgpSpec) -> GeneratedPanel:
    """Simulate one panel for the given example."""
    grid = Grid.uniform(spec.grid_size)
    rng = _rng(spec.seed)
    d = spec.d
    phi, zeta = example_bases(spec.example_id, d, grid, spec.basis_setting, spec.noise_dim)
    coefs, sd = _score_law(spec.example_id, d)
    xi = gen_scores(spec.n, d, rng, coefs=coefs, innovation_sd=sd, burn_in=spec.burn_in)
    nu = rng.standard_normal((spec.n, spec.noise_dim)) * np.sqrt(noise_variances(spec.example_id, d, spec.noise_dim))
    eps = rng.standard_normal(spec.n)
    b = slope_coefficients(spec.example_id, d)

    X = xi @ phi
    W = X + nu @ zeta
    # phi is orthonormal in L2[0,1], so <X_t, beta_0> = sum_j xi_tj b_j exactly.
    Y = xi @ b + eps
    beta = DiscretizedFunction(grid, b @ phi)
    return GeneratedPanel(
        W=CurvePanel(grid, W, Y),
        X_true=CurvePanel(grid, X, Y),
        beta_true=beta,
        Y=Y,
        scores=xi,
        noise_scores=nu,
        phi=phi,
        zeta=zeta,
    )


def gen_sparse(spec: SparseDgpSpec, seed=None):
    """Sample each curve of an example panel at ``m_t`` uniform random locations.

    Returns the sparse panel and the underlying fully observed panel. Off-grid
    curve values come from linear interpolation of the grid representation.
    """
    full = gen_example(spec.base)
    rng = _rng(seed if seed is not None else np.random.SeedSequence([spec.base.seed or 0, 3]))
    n, m = full.W.n, spec.m_t
    grid = full.grid
    u = rng.uniform(0.0, 1.0, (n, m))
    if spec.snap_to_grid:
        u = grid.points[np.rint(u * (grid.size - 1)).astype(int)]
    u.sort(axis=1)
    # Row-wise linear interpolation of W_t at u_t.
    pts = grid.points
    idx = np.clip(np.searchsorted(pts, u, side="right") - 1, 0, pts.size - 2)
    lam = (u - pts[idx]) / (pts[idx + 1] - pts[idx])
    rows = np.arange(n)[:, None]
    Wv = full.W.W
    clean = Wv[rows, idx] * (1 - lam) + Wv[rows, idx + 1] * lam
    z = clean + rng.standard_normal((n, m)) * spec.obs_noise_sd
    t = np.repeat(np.arange(n), m)
    return SparsePanel(t, u.ravel(), z.ravel(), full.Y), full


def gen_functional_response(panel: GeneratedPanel, gamma0: KernelSurface, noise_sd=1.0, seed=None, noise_dim=10):
    """Functional responses ``Y_t(u) = int gamma0(u, v) X_t(v) dv + eps_t(u)``.

    ``eps_t`` has independent ``N(0, noise_sd^2)`` scores on the first
    ``noise_dim`` cosine basis functions.
    """
    grid = panel.grid
    if gamma0.grid != grid:
        raise DimensionError("gamma0 must live on the panel grid")
    rng = _rng(seed)
    X = panel.X_true.W
    signal = (X * grid.weights) @ gamma0.values.T
    u = grid.points
    cos_basis = np.array([np.ones_like(u)] + [np.sqrt(2) * np.cos(np.pi * k * u) for k in range(1, noise_dim)])
    noise = rng.standard_normal((X.shape[0], noise_dim)) * noise_sd @ cos_basis
    return CurvePanel(grid, panel.W.W, panel.Y, signal + noise)


def population_variances(example_id, d, noise_dim=10):
    """Per-component population variances of signal, noise and their sum.

    Valid for examples 2-4 where the signal and noise functions coincide.

    Returns
    -------
    dict with keys ``signal``, ``error``, ``total`` (arrays over the
    ``max(d, noise_dim)`` components, component ``j`` at index ``j-1``) and
    ``ranking`` (1-based component labels by decreasing total variance).
    """
    if example_id not in (2, 3, 4):
        raise ValueError("population variance decomposition applies to examples 2-4")
    size = max(d, noise_dim)
    a = ar_coefficients(d)
    signal = np.zeros(size)
    signal[:d] = 1.0 / (1.0 - a**2)
    error = np.zeros(size)
    error[:noise_dim] = noise_variances(example_id, d, noise_dim)
    total = signal + error
    ranking = np.argsort(-total, kind="stable") + 1
    return {"signal": signal, "error": error, "total": total, "ranking": ranking}
