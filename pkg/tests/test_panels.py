import csv

import numpy as np
import pytest

from agmm import CurvePanel, DimensionError, Grid, SparsePanel


def test_curve_panel_shape_check():
    with pytest.raises(DimensionError):
        CurvePanel(Grid.uniform(10), np.zeros((3, 9)))


def test_curve_panel_csv_long_format(tmp_path):
    g = Grid.uniform(8)
    W = np.arange(16.0).reshape(2, 8) / 7
    CurvePanel(g, W, np.array([0.1, -2.0])).to_csv(tmp_path / "p.csv")
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert len(rows) == 16
    back = np.array([float(r["value"]) for r in rows]).reshape(2, 8)
    np.testing.assert_array_equal(back, W)
    ys = [float(r["y"]) for r in csv.DictReader(open(tmp_path / "p_y.csv"))]
    assert ys == [0.1, -2.0]


def test_sparse_panel_sorts_and_counts():
    p = SparsePanel([1, 0, 1], [0.2, 0.5, 0.9], [1.0, 2.0, 3.0], [0.0, 1.0])
    np.testing.assert_array_equal(p.t, [0, 1, 1])
    np.testing.assert_array_equal(p.z, [2.0, 1.0, 3.0])
    np.testing.assert_array_equal(p.m, [1, 2])


@pytest.mark.parametrize(
    "t, u",
    [([0, 0], [0.1, 0.2]), ([0, 2], [0.1, 0.2]), ([0, 1], [0.1, 1.2])],
)
def test_sparse_panel_rejects_invalid(t, u):
    with pytest.raises(ValueError):
        SparsePanel(t, u, [0.0, 0.0], [0.0, 0.0])


def test_sparse_panel_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    t = np.repeat(np.arange(4), 3)
    p = SparsePanel(t, rng.uniform(size=12), rng.standard_normal(12), rng.standard_normal(4))
    p.to_csv(tmp_path / "obs.csv", tmp_path / "y.csv")
    q = SparsePanel.from_csv(tmp_path / "obs.csv", tmp_path / "y.csv")
    for name in ("t", "u", "z", "Y"):
        np.testing.assert_array_equal(getattr(p, name), getattr(q, name))


def test_sparse_take_reindexes():
    p = SparsePanel([0, 1, 1, 2], [0.1, 0.2, 0.3, 0.4], [1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0])
    q = p.take([1, 2])
    np.testing.assert_array_equal(q.t, [0, 0, 1])
    np.testing.assert_array_equal(q.Y, [6.0, 7.0])
