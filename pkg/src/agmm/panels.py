"""Containers for curve time series: fully observed and sparsely sampled."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .funcspace import DimensionError, DiscretizedFunction, Grid

__all__ = ["CurvePanel", "SparsePanel"]


@dataclass(frozen=True, eq=False)
class CurvePanel:
    """Ordered curves ``W_1, ..., W_n`` on a common grid plus optional responses.

    Attributes
    ----------
    grid : Grid
    W : ndarray, shape (n, G)
        Row ``t`` holds curve ``t`` at the grid points.
    Y : ndarray, shape (n,), optional
        Scalar responses.
    Yfun : ndarray, shape (n, G), optional
        Functional responses on the same grid.
    """

    grid: Grid
    W: np.ndarray
    Y: np.ndarray | None = None
    Yfun: np.ndarray | None = None

    def __post_init__(self):
        W = np.array(self.W, dtype=float)
        if W.ndim != 2 or W.shape[1] != self.grid.size:
            raise DimensionError(f"W must be (n, {self.grid.size}), got {W.shape}")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        if self.Y is not None:
            Y = np.array(self.Y, dtype=float)
            if Y.shape != (W.shape[0],):
                raise DimensionError("Y must have one entry per curve")
            Y.setflags(write=False)
            object.__setattr__(self, "Y", Y)
        if self.Yfun is not None:
            Yf = np.array(self.Yfun, dtype=float)
            if Yf.shape != W.shape:
                raise DimensionError("Yfun must match the shape of W")
            Yf.setflags(write=False)
            object.__setattr__(self, "Yfun", Yf)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def __len__(self):
        return self.n

    def curve(self, t: int) -> DiscretizedFunction:
        return DiscretizedFunction(self.grid, self.W[t])

    def take(self, rows) -> "CurvePanel":
        """Sub-panel on the given (ordered) rows."""
        rows = np.asarray(rows)
        return CurvePanel(
            self.grid,
            self.W[rows],
            None if self.Y is None else self.Y[rows],
            None if self.Yfun is None else self.Yfun[rows],
        )

    def with_W(self, W) -> "CurvePanel":
        return CurvePanel(self.grid, W, self.Y, self.Yfun)

    def to_csv(self, path) -> None:
        """Long format: ``t, grid_index, u, value`` and, when present, ``y``."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "grid_index", "u", "value"])
            for t in range(self.n):
                for i, u in enumerate(self.grid.points):
                    writer.writerow([t, i, repr(float(u)), repr(float(self.W[t, i]))])
        if self.Y is not None:
            with path.with_name(path.stem + "_y.csv").open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["t", "y"])
                for t, y in enumerate(self.Y):
                    writer.writerow([t, repr(float(y))])


@dataclass(frozen=True, eq=False)
class SparsePanel:
    """Irregular noisy observations ``Z_ti`` at locations ``U_ti`` of each curve.

    Observations are stored flat and sorted by curve index ``t``
    (``0 <= t < n``); ``Y`` holds one scalar response per curve.
    """

    t: np.ndarray
    u: np.ndarray
    z: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        u = np.asarray(self.u, dtype=float)
        z = np.asarray(self.z, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if not (t.shape == u.shape == z.shape) or t.ndim != 1:
            raise DimensionError("t, u, z must be 1-d arrays of equal length")
        if np.any(np.diff(t) < 0):
            order = np.argsort(t, kind="stable")
            t, u, z = t[order], u[order], z[order]
        if t.size and (t[0] < 0 or t[-1] >= Y.size):
            raise ValueError("curve indices must lie in [0, n)")
        if np.any((u < 0) | (u > 1)):
            raise ValueError("observation locations must lie in [0, 1]")
        counts = np.bincount(t, minlength=Y.size)
        if np.any(counts < 1):
            raise ValueError("every curve needs at least one observation")
        for name, arr in (("t", t), ("u", u), ("z", z), ("Y", Y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return self.Y.size

    @property
    def m(self) -> np.ndarray:
        """Observations per curve."""
        return self.counts

    def __len__(self):
        return self.n

    def take(self, rows) -> "SparsePanel":
        """Sub-panel of the given curves, re-indexed ``0..len(rows)-1`` in order."""
        rows = np.asarray(rows)
        remap = np.full(self.n, -1)
        remap[rows] = np.arange(rows.size)
        keep = remap[self.t] >= 0
        return SparsePanel(remap[self.t[keep]], self.u[keep], self.z[keep], self.Y[rows])

    def to_csv(self, obs_path, response_path) -> None:
        """Write ``t,u,z`` and ``t,y`` files; floats round-trip exactly."""
        with open(obs_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "u", "z"])
            for t, u, z in zip(self.t, self.u, self.z):
                writer.writerow([int(t), repr(float(u)), repr(float(z))])
        with open(response_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "y"])
            for t, y in enumerate(self.Y):
                writer.writerow([t, repr(float(y))])

    @classmethod
    def from_csv(cls, obs_path, response_path) -> "SparsePanel":
        with open(obs_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        t = np.array([int(r["t"]) for r in rows], dtype=np.int64)
        u = np.array([float(r["u"]) for r in rows])
        z = np.array([float(r["z"]) for r in rows])
        with open(response_path, newline="") as fh:
            resp = sorted(((int(r["t"]), float(r["y"])) for r in csv.DictReader(fh)))
        Y = np.array([y for _, y in resp])
        return cls(t, u, z, Y)
