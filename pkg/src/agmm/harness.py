"""Monte Carlo experiments, result tables and the intraday-return utilities.

An experiment is a grid of cells ``(n, d[, m_t])``, each run for ``R``
replicates. Replicate ``r`` of cell ``c`` draws all its randomness from
``SeedSequence([seed, c, r])``, so results do not depend on how the tasks
are scheduled across worker processes.
"""

from __future__ import annotations

import configparser
import csv
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from itertools import product
from pathlib import Path

import numpy as np

from .estimators import (
    METHODS,
    SlopeEstimate,
    agmm_scalar,
    als_scalar,
    cgmm_scalar,
    cls_scalar,
    integrated_squared_error,
    ridge_agmm,
)
from .funcspace import DiscretizedFunction, Grid, make_basis
from .moments import DEFAULT_L, compute_moments
from .panels import CurvePanel
from .simgen import DgpSpec, SparseDgpSpec, gen_example, gen_sparse
from .sparseobs import select_bandwidths_cv, sparse_agmm
from .spectral import eigen_basis, eigen_raw, select_d_bootstrap, select_J_cv, select_M_ratio

__all__ = [
    "ExperimentConfig",
    "ResultTable",
    "CellFailure",
    "DataError",
    "ConfigurationError",
    "CidrPanel",
    "load_configs",
    "default_basis_kind",
    "fit_scalar_methods",
    "run_experiment",
    "emit_table",
    "read_table",
    "worker_count",
    "cidr_transform",
    "load_minute_bars",
    "rolling_mspe",
]

logger = logging.getLogger(__name__)

WORKERS_ENV = "AGMM_WORKERS"
SPARSE_METHODS = ("SparseAGMM",)
ALL_METHODS = METHODS + SPARSE_METHODS
FAILURE_LIMIT = 0.05


class ConfigurationError(ValueError):
    pass


class DataError(ValueError):
    pass


class CellFailure(RuntimeError):
    pass


def _as_tuple(value, cast):
    if isinstance(value, str):
        value = [v for v in value.replace(",", " ").split() if v]
    elif np.isscalar(value):
        value = [value]
    return tuple(cast(v) for v in value)


@dataclass(frozen=True)
class ExperimentConfig:
    """One simulation experiment.

    Attributes
    ----------
    example_id : int
    n, d, m_t : tuple of int
        Cell grid. ``m_t`` is only used by sparse experiments (``example_id=3``
        with the ``SparseAGMM`` method); empty means fully observed curves.
    methods : tuple of str
    replicates : int
    L : int
    J_policy : {'cv', 'fixed'}
        Basis dimension for the smoothed methods. ``'fixed'`` uses ``J``.
    d_policy : {'oracle', 'bootstrap', 'ratio'}
        ``'oracle'`` uses the true ``d`` for every method. ``'bootstrap'``
        selects ``d`` from ``K-hat`` for the autocovariance-based methods and
        keeps ``M_threshold`` of the variation for the covariance-based ones.
        ``'ratio'`` applies ``M_threshold`` to each method's own operator.
    M_threshold : float
    basis : {'auto', 'fourier', 'cosine'}
    seed : int
    """

    name: str = "experiment"
    example_id: int = 1
    n: tuple = (800,)
    d: tuple = (2,)
    m_t: tuple = ()
    methods: tuple = ("BaseCLS", "CLS", "BaseCGMM", "BaseALS", "BaseAGMM", "AGMM")
    replicates: int = 100
    L: int = DEFAULT_L
    J_policy: str = "cv"
    J: int = 10
    J_grid: tuple = tuple(range(5, 26))
    d_policy: str = "oracle"
    M_threshold: float = 0.9
    basis: str = "auto"
    basis_setting: int = 1
    bootstrap_B: int = 200
    ridge_rho: float = 0.0
    ridge_extra: int = 5
    sparse_rank_rule: float = 0.95
    h_grid_C: tuple = (0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2, 0.3)
    h_grid_S: tuple = (0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2, 0.3)
    obs_noise_sd: float = 0.5
    grid_size: int = 100
    seed: int = 0

    def __post_init__(self):
        for name, cast in (("n", int), ("d", int), ("m_t", int), ("methods", str), ("J_grid", int), ("h_grid_C", float), ("h_grid_S", float)):
            object.__setattr__(self, name, _as_tuple(getattr(self, name), cast))
        if self.replicates < 2:
            raise ConfigurationError("replicates must be at least 2")
        for name in ("n", "d", "methods", "J_grid"):
            if not getattr(self, name):
                raise ConfigurationError(f"{name} must be nonempty")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ConfigurationError(f"unknown methods {sorted(unknown)}")
        if self.sparse and self.example_id != 3:
            raise ConfigurationError("sparse experiments use example 3")
        if self.sparse and not self.m_t:
            raise ConfigurationError("sparse experiments need an m_t list")
        if self.sparse and set(self.methods) - set(SPARSE_METHODS):
            raise ConfigurationError("sparse and fully observed methods cannot share an experiment")
        if self.J_policy not in ("cv", "fixed"):
            raise ConfigurationError("J_policy must be 'cv' or 'fixed'")
        if self.d_policy not in ("oracle", "bootstrap", "ratio"):
            raise ConfigurationError("d_policy must be 'oracle', 'bootstrap' or 'ratio'")
        if self.basis not in ("auto", "fourier", "cosine"):
            raise ConfigurationError("basis must be 'auto', 'fourier' or 'cosine'")
        if not 0 < self.M_threshold < 1:
            raise ConfigurationError("M_threshold must lie in (0, 1)")

    @property
    def sparse(self) -> bool:
        return any(m in SPARSE_METHODS for m in self.methods)

    def cells(self) -> list:
        """Cell tuples ``(n, d, m_t)`` in a fixed order; ``m_t`` is None when unused."""
        m_list = self.m_t if self.sparse else (None,)
        d_list = (25,) if self.example_id == 5 else self.d
        return [(n, d, m) for n, d, m in product(self.n, d_list, m_list)]

    @classmethod
    def from_mapping(cls, mapping, name="experiment") -> "ExperimentConfig":
        # INI readers lowercase keys, so field names match case-insensitively.
        known = {f.name.lower(): f for f in fields(cls)}
        kwargs = {"name": name}
        for key, raw in mapping.items():
            if key.lower() not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            field_ = known[key.lower()]
            key, default = field_.name, field_.default
            if isinstance(default, tuple):
                kwargs[key] = raw
            elif isinstance(default, bool):
                kwargs[key] = str(raw).lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(raw)
            elif isinstance(default, float):
                kwargs[key] = float(raw)
            else:
                kwargs[key] = str(raw).strip()
        return cls(**kwargs)


def load_configs(path) -> list:
    """Read an INI file; each section is one :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigurationError(f"cannot read config file {path}")
    return [ExperimentConfig.from_mapping(dict(parser[s]), name=s) for s in parser.sections()]


def default_basis_kind(example_id: int, basis_setting: int = 1) -> str:
    """Cosine basis for the cosine-signal designs, Fourier otherwise."""
    if example_id == 1 or (example_id == 5 and basis_setting == 1):
        return "cosine"
    return "fourier"


def worker_count(requested: int | None = None) -> int:
    """Explicit request, else the ``AGMM_WORKERS`` environment variable, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# Fitting


def fit_scalar_methods(
    panel: CurvePanel,
    methods,
    d: int | None,
    *,
    L: int = DEFAULT_L,
    kind: str = "fourier",
    J_policy: str = "cv",
    J: int = 10,
    J_grid=tuple(range(5, 26)),
    d_policy: str = "oracle",
    M_threshold: float = 0.9,
    bootstrap_B: int = 200,
    ridge_rho: float = 0.0,
    ridge_extra: int = 5,
    seed=None,
) -> dict:
    """Fit the requested scalar-response estimators to one panel.

    Shared pieces (moments, decompositions, tuned ``J`` and ``d``) are
    computed once. Returns ``{method: SlopeEstimate}``.
    """
    methods = tuple(methods)
    moments = compute_moments(panel, L)
    raw = eigen_raw(moments.K_hat)
    info = {}

    if d_policy == "oracle":
        if d is None:
            raise ConfigurationError("the oracle policy needs the true d")
        rank_K = rank_C = d
    elif d_policy == "bootstrap":
        sel = select_d_bootstrap(panel, raw, B=bootstrap_B, L=L, seed=seed)
        rank_K, rank_C = sel.d_hat, None
        info["d_hat"] = sel.d_hat
    else:
        rank_K = select_M_ratio(raw.theta, M_threshold)
        rank_C = None

    def basis_for(operator, rank):
        if J_policy == "fixed":
            size = J
        else:
            grid = [j for j in J_grid if j >= rank] or [max(J_grid)]
            size = select_J_cv(panel, rank, grid, L=L, kind=kind, operator=operator)
        return make_basis(kind, size, panel.grid)

    out = {}
    if "BaseAGMM" in methods:
        out["BaseAGMM"] = agmm_scalar(moments, raw, rank_K)
    if "BaseALS" in methods:
        out["BaseALS"] = als_scalar(panel, raw, rank_K)
    if "AGMM" in methods or "RidgeAGMM" in methods:
        dec = eigen_basis(moments.K_hat, basis_for("autocov", rank_K))
        if d_policy == "ratio":
            rank_B = select_M_ratio(dec.theta, M_threshold)
        else:
            rank_B = min(rank_K, dec.rank)
        if "AGMM" in methods:
            out["AGMM"] = agmm_scalar(moments, dec, rank_B)
        if "RidgeAGMM" in methods:
            out["RidgeAGMM"] = ridge_agmm(moments, dec, min(rank_B + ridge_extra, dec.rank), ridge_rho)
    if "BaseCLS" in methods:
        out["BaseCLS"] = cls_scalar(panel, rank_C, M_threshold)
    if "CLS" in methods:
        out["CLS"] = cls_scalar(panel, rank_C, M_threshold, basis=basis_for("cov", rank_C or 1))
    if "BaseCGMM" in methods:
        out["BaseCGMM"] = cgmm_scalar(panel, rank_C, M_threshold, L)
    for est in out.values():
        est.diagnostics.update(info)
    return out


# ---------------------------------------------------------------------------
# Experiments


@dataclass
class ResultTable:
    """MISE summaries per ``(cell, method)``.

    ``rows`` holds dicts with keys ``n, d, m_t, method, mise_mean, mise_se,
    count, failures, wall_time``. Equality ignores ``wall_time``.
    """

    rows: list = field(default_factory=list)
    sparse: bool = False
    failed_cells: list = field(default_factory=list)
    replicate_ise: dict = field(default_factory=dict, repr=False)

    COLUMNS = ("n", "d", "m_t", "method", "mise_mean", "mise_se", "count")

    def key_rows(self):
        return [tuple(r[c] for c in self.COLUMNS) for r in self.rows]

    def __eq__(self, other):
        if not isinstance(other, ResultTable):
            return NotImplemented
        return self.key_rows() == other.key_rows() and self.failed_cells == other.failed_cells

    def lookup(self, method, n=None, d=None, m_t=None) -> dict:
        for r in self.rows:
            if r["method"] == method and n in (None, r["n"]) and d in (None, r["d"]) and m_t in (None, r["m_t"]):
                return r
        raise KeyError((method, n, d, m_t))

    @property
    def ok(self) -> bool:
        return not self.failed_cells


def _replicate(config: ExperimentConfig, cell_index: int, r: int):
    """Run one replicate; returns ``(cell_index, r, {method: ise or error}, seconds)``."""
    n, d, m_t = config.cells()[cell_index]
    ss = np.random.SeedSequence([config.seed, cell_index, r])
    dgp_seed, sample_seed, boot_seed = ss.spawn(3)
    spec = DgpSpec(
        config.example_id,
        n,
        d,
        seed=np.random.default_rng(dgp_seed),
        grid_size=config.grid_size,
        basis_setting=config.basis_setting,
        max_lag=config.L,
    )
    kind = default_basis_kind(config.example_id, config.basis_setting) if config.basis == "auto" else config.basis
    start = time.perf_counter()
    out = {}
    try:
        if config.sparse:
            sparse, full = gen_sparse(
                SparseDgpSpec(spec, m_t=m_t, obs_noise_sd=config.obs_noise_sd),
                seed=np.random.default_rng(sample_seed),
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                smoother = select_bandwidths_cv(sparse, config.h_grid_C, config.h_grid_S, L=config.L, grid=full.grid)
                rank_rule = d if config.d_policy == "oracle" else config.sparse_rank_rule
                est = sparse_agmm(sparse, smoother, config.L, rank_rule, grid=full.grid)
            out["SparseAGMM"] = integrated_squared_error(est.beta_hat, full.beta_true)
        else:
            panel = gen_example(spec)
            fits = fit_scalar_methods(
                panel.W,
                config.methods,
                d,
                L=config.L,
                kind=kind,
                J_policy=config.J_policy,
                J=config.J,
                J_grid=config.J_grid,
                d_policy=config.d_policy,
                M_threshold=config.M_threshold,
                bootstrap_B=config.bootstrap_B,
                ridge_rho=config.ridge_rho,
                ridge_extra=config.ridge_extra,
                seed=np.random.default_rng(boot_seed),
            )
            for method in config.methods:
                out[method] = integrated_squared_error(fits[method].beta_hat, panel.beta_true)
    except (ValueError, np.linalg.LinAlgError, ArithmeticError) as exc:
        # Failures are per replicate: every requested method counts as failed.
        out = {method: f"{type(exc).__name__}: {exc}" for method in config.methods}
    return cell_index, r, out, time.perf_counter() - start


def _run_tasks(config, tasks, workers):
    if workers <= 1:
        return [_replicate(config, c, r) for c, r in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_replicate, config, c, r) for c, r in tasks]
        return [f.result() for f in futures]


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ResultTable:
    """Run every cell of ``config``; deterministic for a fixed seed.

    A replicate whose estimation raises is excluded and counted. A cell in
    which more than 5% of the replicates fail is reported in
    ``failed_cells``.
    """
    workers = worker_count(workers)
    cells = config.cells()
    tasks = [(c, r) for c in range(len(cells)) for r in range(config.replicates)]
    results = _run_tasks(config, tasks, workers)
    results.sort(key=lambda x: (x[0], x[1]))

    table = ResultTable(sparse=config.sparse)
    for c, (n, d, m_t) in enumerate(cells):
        chunk = [res for res in results if res[0] == c]
        seconds = float(sum(res[3] for res in chunk))
        for method in config.methods:
            values = [res[2][method] for res in chunk]
            ok = np.array([v for v in values if not isinstance(v, str)], dtype=float)
            failures = len(values) - ok.size
            if failures:
                first = next(v for v in values if isinstance(v, str))
                logger.warning("cell n=%d d=%d m_t=%s %s: %d failed replicate(s), e.g. %s", n, d, m_t, method, failures, first)
            if failures > FAILURE_LIMIT * len(values):
                table.failed_cells.append((n, d, m_t, method))
            mean = float(ok.mean()) if ok.size else float("nan")
            se = float(ok.std(ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else float("nan")
            table.rows.append(
                {
                    "n": n,
                    "d": d,
                    "m_t": m_t,
                    "method": method,
                    "mise_mean": mean,
                    "mise_se": se,
                    "count": int(ok.size),
                    "failures": failures,
                    "wall_time": seconds,
                }
            )
            table.replicate_ise[(n, d, m_t, method)] = ok
    return table


def emit_table(result: ResultTable, path, format: str = "csv") -> Path:
    """Write ``result`` as CSV or as a markdown table mirroring the printed layout.

    Columns are ``n, d, [m_t,] method, mise_mean, mise_se``; rows keep the
    experiment's cell order. An empty table gives a header-only file.
    """
    path = Path(path)
    cols = ["n", "d"] + (["m_t"] if result.sparse else []) + ["method", "mise_mean", "mise_se"]
    try:
        with path.open("w", newline="") as fh:
            if format == "csv":
                writer = csv.writer(fh)
                writer.writerow(cols)
                for r in result.rows:
                    writer.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])
            elif format == "markdown":
                _write_markdown(result, fh)
            else:
                raise ValueError(f"unknown format {format!r}")
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc
    return path


def _write_markdown(result, fh):
    """One line per cell with ``mean(se)`` per method, three decimals."""
    methods = list(dict.fromkeys(r["method"] for r in result.rows))
    keys = ["n", "d"] + (["m_t"] if result.sparse else [])
    fh.write("| " + " | ".join(keys + methods) + " |\n")
    fh.write("|" + "---|" * (len(keys) + len(methods)) + "\n")
    cells = list(dict.fromkeys(tuple(r[k] for k in keys) for r in result.rows))
    for cell in cells:
        entries = []
        for m in methods:
            match = [r for r in result.rows if r["method"] == m and tuple(r[k] for k in keys) == cell]
            entries.append(f"{match[0]['mise_mean']:.3f}({match[0]['mise_se']:.3f})" if match else "")
        fh.write("| " + " | ".join([str(c) for c in cell] + entries) + " |\n")


def read_table(path) -> ResultTable:
    """Parse a CSV written by :func:`emit_table`."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        sparse = "m_t" in (reader.fieldnames or [])
        rows = []
        for rec in reader:
            rows.append(
                {
                    "n": int(rec["n"]),
                    "d": int(rec["d"]),
                    "m_t": int(rec["m_t"]) if sparse else None,
                    "method": rec["method"],
                    "mise_mean": float(rec["mise_mean"]),
                    "mise_se": float(rec["mise_se"]),
                }
            )
    return ResultTable(rows=rows, sparse=sparse)


# ---------------------------------------------------------------------------
# Intraday returns


@dataclass(frozen=True, eq=False)
class CidrPanel:
    """Minute prices ``P_t(u_j)``: one row per trading day, one column per minute."""

    prices: np.ndarray
    dates: tuple = ()

    def __post_init__(self):
        P = np.array(self.prices, dtype=float)
        if P.ndim != 2 or P.shape[1] < 2:
            raise DataError("prices must be a (days, minutes) array with at least two minutes")
        bad = np.argwhere(~(P > 0))
        if bad.size:
            t, j = bad[0]
            raise DataError(f"nonpositive or missing price at day {t}, minute {j}")
        P.setflags(write=False)
        object.__setattr__(self, "prices", P)
        dates = tuple(self.dates) if self.dates else tuple(str(i) for i in range(P.shape[0]))
        if len(dates) != P.shape[0]:
            raise DataError("one date per row is required")
        object.__setattr__(self, "dates", dates)

    @property
    def n(self) -> int:
        return self.prices.shape[0]

    @property
    def minutes(self) -> int:
        return self.prices.shape[1]


def cidr_transform(prices: CidrPanel) -> CurvePanel:
    """Cumulative intraday return curves ``100 (log P_t(u_j) - log P_t(u_1))``.

    Minutes map to an equally spaced grid on ``[0, 1]``. The response of day
    ``t`` is its closing value ``r_t(u_last)``.
    """
    logp = np.log(prices.prices)
    r = 100.0 * (logp - logp[:, :1])
    r[:, 0] = 0.0
    return CurvePanel(Grid.uniform(prices.minutes), r, r[:, -1].copy())


def load_minute_bars(path, minutes: int | None = None) -> CidrPanel:
    """Read a ``date, minute_index, price`` CSV into a :class:`CidrPanel`.

    ``minute_index`` starts at 1. Days with missing minutes are rejected.
    """
    table = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            try:
                table.setdefault(rec["date"], {})[int(rec["minute_index"])] = float(rec["price"])
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}: malformed row {rec}") from exc
    if not table:
        raise DataError(f"{path}: no rows")
    dates = sorted(table)
    width = minutes or max(max(day) for day in table.values())
    prices = np.empty((len(dates), width))
    for t, date in enumerate(dates):
        day = table[date]
        missing = [j for j in range(1, width + 1) if j not in day]
        if missing:
            raise DataError(f"{path}: day {date} lacks minute {missing[0]}")
        prices[t] = [day[j] for j in range(1, width + 1)]
    return CidrPanel(prices, tuple(dates))


def _truncate(panel, T_cut):
    """Keep the first ``T_cut`` grid points and rescale them to ``[0, 1]``."""
    if not 8 <= T_cut <= panel.grid.size:
        raise ConfigurationError(f"T_cut must lie in 8..{panel.grid.size}")
    return CurvePanel(Grid.uniform(T_cut), panel.W[:, :T_cut], panel.Y)


def _predict(est: SlopeEstimate, train: CurvePanel, x_new):
    w = train.grid.weights
    return float(train.Y.mean() + np.dot(w * (x_new - train.W.mean(axis=0)), est.beta_hat.values))


def rolling_mspe(
    panel: CurvePanel,
    methods=("AGMM", "CLS", "Mean"),
    H: int = 30,
    T_cut: int | None = None,
    d_grid=range(1, 7),
    J_grid=(5, 10, 15, 20, 25),
    L: int = DEFAULT_L,
    kind: str = "fourier",
    min_train: int = 20,
) -> dict:
    """Rolling one-step mean squared prediction errors.

    For ``h = H, ..., 1`` each method is fitted on days ``t <= n - h`` and
    predicts the response of day ``n - h + 1`` from that day's curve on the
    first ``T_cut`` grid points. ``'Mean'`` predicts the training mean.
    Every ``(d, J)`` pair of the grids is evaluated and the lowest MSPE is
    reported.

    Returns
    -------
    dict
        ``{method: {'mspe': float, 'd': int or None, 'J': int or None}}``.
    """
    if panel.Y is None:
        raise ConfigurationError("panel needs responses")
    if T_cut is not None:
        panel = _truncate(panel, T_cut)
    n = panel.n
    if H < 1 or n - H < max(min_train, 2 * L + 2):
        raise ConfigurationError(f"n - H = {n - H} is below the minimum training size")
    methods = tuple(methods)
    pairs = [(d, J) for d in d_grid for J in J_grid if J >= d]
    errs = {m: {p: [] for p in pairs} for m in methods if m != "Mean"}
    mean_errs = []
    for h in range(H, 0, -1):
        train = panel.take(np.arange(n - h))
        x_new, y_new = panel.W[n - h], panel.Y[n - h]
        mean_errs.append((y_new - train.Y.mean()) ** 2)
        fitted = [m for m in methods if m != "Mean"]
        if not fitted:
            continue
        for d, J in pairs:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fits = fit_scalar_methods(train, fitted, d, L=L, kind=kind, J_policy="fixed", J=J)
            for m in fitted:
                errs[m][(d, J)].append((y_new - _predict(fits[m], train, x_new)) ** 2)
    out = {}
    for m in methods:
        if m == "Mean":
            out[m] = {"mspe": float(np.mean(mean_errs)), "d": None, "J": None}
            continue
        scores = {p: float(np.mean(v)) for p, v in errs[m].items()}
        best = min(scores, key=scores.get)
        out[m] = {"mspe": scores[best], "d": best[0], "J": best[1] if m not in ("BaseAGMM", "BaseALS", "BaseCLS", "BaseCGMM") else None}
    return out
