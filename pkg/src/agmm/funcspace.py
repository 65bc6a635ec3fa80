"""Discretized function spaces on the unit interval.

Every function lives on a shared uniform :class:`Grid` carrying trapezoid
quadrature weights, so all integrals reduce to weighted sums. Bivariate
kernels are stored as ``G x G`` matrices of point values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DimensionError",
    "IllPosedError",
    "Grid",
    "DiscretizedFunction",
    "KernelSurface",
    "BasisSet",
    "same_grid",
    "inner_product",
    "norm",
    "hs_norm",
    "apply_kernel",
    "compose_kernels",
    "make_basis",
]

DEFAULT_GRID_SIZE = 100


class DimensionError(ValueError):
    """Objects live on different grids or have incompatible shapes."""


class IllPosedError(ValueError):
    """A request cannot be met at the given resolution or conditioning."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform grid on [0, 1] with trapezoid weights summing to one."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        wts = np.asarray(self.weights, dtype=float)
        if pts.ndim != 1 or pts.shape != wts.shape:
            raise DimensionError("points and weights must be 1-d of equal length")
        if pts.size < 8:
            raise ValueError(f"grid needs at least 8 points, got {pts.size}")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(wts <= 0) or abs(wts.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to one")
        pts.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @classmethod
    def uniform(cls, size: int = DEFAULT_GRID_SIZE) -> "Grid":
        points = np.linspace(0.0, 1.0, size)
        weights = np.full(size, 1.0 / (size - 1))
        weights[[0, -1]] *= 0.5
        return cls(points, weights)

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self is other or (
            self.size == other.size
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.size, self.points[1]))


def same_grid(a, b):
    """Raise :class:`DimensionError` unless ``a`` and ``b`` share a grid."""
    if a.grid != b.grid:
        raise DimensionError(f"grid mismatch: {a.grid.size} vs {b.grid.size} points")


@dataclass(frozen=True, eq=False)
class DiscretizedFunction:
    """A real function on [0, 1] sampled at the grid points."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.size,):
            raise DimensionError(f"expected {self.grid.size} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("function values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, fn, grid: Grid) -> "DiscretizedFunction":
        return cls(grid, fn(grid.points))

    @classmethod
    def zeros(cls, grid: Grid) -> "DiscretizedFunction":
        return cls(grid, np.zeros(grid.size))

    def __call__(self, u):
        """Evaluate off-grid by linear interpolation."""
        return np.interp(u, self.grid.points, self.values)

    def __add__(self, other):
        if isinstance(other, DiscretizedFunction):
            same_grid(self, other)
            return DiscretizedFunction(self.grid, self.values + other.values)
        return DiscretizedFunction(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, DiscretizedFunction):
            same_grid(self, other)
            return DiscretizedFunction(self.grid, self.values - other.values)
        return DiscretizedFunction(self.grid, self.values - other)

    def __mul__(self, scalar):
        return DiscretizedFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return DiscretizedFunction(self.grid, -self.values)

    def norm(self) -> float:
        return norm(self)


@dataclass(frozen=True, eq=False)
class KernelSurface:
    """A bivariate function on [0, 1]^2 sampled on the grid product.

    ``values[i, j]`` holds ``K(u_i, u_j)``. Set ``symmetric=True`` to have
    the symmetry invariant checked at construction.
    """

    grid: Grid
    values: np.ndarray
    symmetric: bool = field(default=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        G = self.grid.size
        if vals.shape != (G, G):
            raise DimensionError(f"expected ({G}, {G}) surface, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("surface values must be finite")
        if self.symmetric:
            scale = np.abs(vals).max()
            if np.abs(vals - vals.T).max() > 1e-10 * scale:
                raise ValueError("surface flagged symmetric is not symmetric")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "KernelSurface":
        return cls(grid, np.zeros((grid.size, grid.size)), symmetric=True)

    @classmethod
    def outer(cls, f: DiscretizedFunction, g: DiscretizedFunction) -> "KernelSurface":
        """The surface ``(u, v) -> f(u) g(v)``."""
        same_grid(f, g)
        return cls(f.grid, np.outer(f.values, g.values), symmetric=f is g)

    def __add__(self, other):
        same_grid(self, other)
        return KernelSurface(self.grid, self.values + other.values)

    def __sub__(self, other):
        same_grid(self, other)
        return KernelSurface(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return KernelSurface(self.grid, self.values * scalar, symmetric=self.symmetric)

    __rmul__ = __mul__

    @property
    def T(self) -> "KernelSurface":
        return KernelSurface(self.grid, self.values.T, symmetric=self.symmetric)

    def symmetrized(self) -> "KernelSurface":
        return KernelSurface(self.grid, 0.5 * (self.values + self.values.T), symmetric=True)

    def weighted_matrix(self) -> np.ndarray:
        """``W^{1/2} K W^{1/2}``, the symmetric matrix whose spectrum is the operator's."""
        s = self.grid.sqrt_weights
        return s[:, None] * self.values * s[None, :]

    def column(self, j: int) -> DiscretizedFunction:
        return DiscretizedFunction(self.grid, self.values[:, j])


def inner_product(f: DiscretizedFunction, g: DiscretizedFunction) -> float:
    """Quadrature approximation of the integral of ``f * g`` over [0, 1]."""
    same_grid(f, g)
    return float(np.dot(f.grid.weights, f.values * g.values))


def norm(f: DiscretizedFunction) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def hs_norm(K: KernelSurface) -> float:
    """Hilbert-Schmidt norm of the integral operator with kernel ``K``."""
    w = K.grid.weights
    return float(np.sqrt(np.einsum("i,ij,j->", w, K.values**2, w)))


def apply_kernel(K: KernelSurface, f: DiscretizedFunction) -> DiscretizedFunction:
    """``(K f)(u) = integral of K(u, v) f(v) dv``."""
    same_grid(K, f)
    return DiscretizedFunction(K.grid, K.values @ (K.grid.weights * f.values))


def compose_kernels(A: KernelSurface, B: KernelSurface) -> KernelSurface:
    """The surface ``(u, v) -> integral of A(u, z) B(v, z) dz``."""
    same_grid(A, B)
    values = (A.values * A.grid.weights[None, :]) @ B.values.T
    if A is B:
        values = 0.5 * (values + values.T)
    return KernelSurface(A.grid, values, symmetric=A is B)


@dataclass(frozen=True, eq=False)
class BasisSet:
    """``J`` functions on a grid, orthonormal under the quadrature inner product.

    ``functions`` has shape ``(J, G)``; row ``j`` is the ``j``-th basis function.
    """

    grid: Grid
    functions: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        fns = np.array(self.functions, dtype=float)
        if fns.ndim != 2 or fns.shape[1] != self.grid.size:
            raise DimensionError("basis functions must have shape (J, G)")
        gram = (fns * self.grid.weights) @ fns.T
        if np.abs(gram - np.eye(fns.shape[0])).max() > 1e-8:
            raise ValueError("basis is not orthonormal under the grid quadrature")
        fns.setflags(write=False)
        object.__setattr__(self, "functions", fns)

    @property
    def J(self) -> int:
        return self.functions.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """``G x J`` matrix with basis functions in columns."""
        return self.functions.T

    def __getitem__(self, j: int) -> DiscretizedFunction:
        return DiscretizedFunction(self.grid, self.functions[j])

    def gram(self) -> np.ndarray:
        return (self.functions * self.grid.weights) @ self.functions.T

    def coefficients(self, f: DiscretizedFunction) -> np.ndarray:
        same_grid(self, f)
        return self.functions @ (self.grid.weights * f.values)

    def evaluate(self, coefs) -> DiscretizedFunction:
        return DiscretizedFunction(self.grid, np.asarray(coefs) @ self.functions)

    def project(self, f: DiscretizedFunction) -> DiscretizedFunction:
        return self.evaluate(self.coefficients(f))

    def surface_matrix(self, K: KernelSurface) -> np.ndarray:
        """``J x J`` matrix of ``integral B(u) K(u, v) B(v)^T du dv``."""
        same_grid(self, K)
        Bw = self.functions * self.grid.weights
        return Bw @ K.values @ Bw.T

    def at(self, u) -> np.ndarray:
        """Basis values at off-grid locations, shape ``(len(u), J)``; linear interpolation."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        pts = self.grid.points
        idx = np.clip(np.searchsorted(pts, u, side="right") - 1, 0, pts.size - 2)
        lam = (u - pts[idx]) / (pts[idx + 1] - pts[idx])
        F = self.functions
        return F[:, idx].T * (1 - lam)[:, None] + F[:, idx + 1].T * lam[:, None]


def _raw_basis(kind: str, J: int, u: np.ndarray, constant: bool) -> np.ndarray:
    rows = []
    if kind == "cosine":
        rows.append(np.ones_like(u))
        k = 1
        while len(rows) < J:
            rows.append(np.sqrt(2) * np.cos(np.pi * k * u))
            k += 1
    elif kind == "fourier":
        if constant:
            rows.append(np.ones_like(u))
        k = 1
        while len(rows) < J:
            rows.append(np.sqrt(2) * np.cos(2 * np.pi * k * u))
            if len(rows) < J:
                rows.append(np.sqrt(2) * np.sin(2 * np.pi * k * u))
            k += 1
    else:
        raise ValueError(f"unknown basis kind {kind!r}; use 'cosine' or 'fourier'")
    return np.array(rows[:J])


def make_basis(kind: str, J: int, grid: Grid, constant: bool = True) -> BasisSet:
    """Cosine or Fourier basis re-orthonormalized against the grid quadrature.

    Parameters
    ----------
    kind : {'cosine', 'fourier'}
        ``cosine`` is ``{1, sqrt(2) cos(pi k u)}``; ``fourier`` is
        ``{1, sqrt(2) cos(2 pi k u), sqrt(2) sin(2 pi k u)}`` interleaved.
    J : int
        Number of basis functions.
    grid : Grid
    constant : bool, default True
        Fourier only: drop the leading constant when False.
    """
    if J < 1:
        raise ValueError("J must be positive")
    if J > grid.size:
        raise IllPosedError(f"J={J} exceeds grid size {grid.size}")
    raw = _raw_basis(kind, J, grid.points, constant)
    # Gram-Schmidt in the weighted inner product, done as a QR factorization.
    s = grid.sqrt_weights
    Q, R = np.linalg.qr((raw * s).T)
    Q = Q * np.sign(np.diag(R))
    return BasisSet(grid, (Q / s[:, None]).T, kind=kind)
