"""Command line entry point: ``python -m agmm <command>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, selftest


def _run_configs(configs, out_dir, workers, seed):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = False
    for config in configs:
        if seed is not None:
            config = replace(config, seed=seed)
        table = harness.run_experiment(config, workers)
        harness.emit_table(table, out_dir / f"{config.name}.csv", "csv")
        harness.emit_table(table, out_dir / f"{config.name}.md", "markdown")
        for cell in table.failed_cells:
            print(f"{config.name}: cell {cell} failed", file=sys.stderr)
        failed |= not table.ok
        print(f"{config.name}: wrote {out_dir / config.name}.csv")
    return 1 if failed else 0


def cmd_simulate(args):
    configs = harness.load_configs(args.config)
    sparse = [c.name for c in configs if c.sparse]
    if sparse:
        raise harness.ConfigurationError(f"sections {sparse} are sparse; use sparse-simulate")
    return _run_configs(configs, args.out, args.workers, args.seed)


def cmd_sparse_simulate(args):
    import configparser

    parser = configparser.ConfigParser()
    if not parser.read(args.config):
        raise harness.ConfigurationError(f"cannot read config file {args.config}")
    configs = []
    for section in parser.sections():
        mapping = dict(parser[section])
        mapping.setdefault("example_id", "3")
        mapping.setdefault("methods", "SparseAGMM")
        mapping.setdefault("d_policy", "ratio")
        configs.append(harness.ExperimentConfig.from_mapping(mapping, name=section))
    return _run_configs(configs, args.out, args.workers, args.seed)


def cmd_cidr(args):
    prices = harness.load_minute_bars(args.input)
    panel = harness.cidr_transform(prices)
    methods = [m for m in args.methods.split(",") if m]
    result = harness.rolling_mspe(panel, methods, H=args.horizon, T_cut=args.t_cut, kind=args.basis)
    text = json.dumps(result, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_selftest(args):
    failed = 0
    for name, ok, detail in selftest.run():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += not ok
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="agmm", description="Autocovariance-based GMM for curve time series.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("simulate", cmd_simulate, "run fully observed Monte Carlo experiments"),
        ("sparse-simulate", cmd_sparse_simulate, "run sparsely observed Monte Carlo experiments"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="INI file, one section per experiment")
        s.add_argument("-o", "--out", default="results", help="output directory")
        s.add_argument("-w", "--workers", type=int, default=None, help=f"worker processes (default ${harness.WORKERS_ENV} or 1)")
        s.add_argument("--seed", type=int, default=None, help="override every section's seed")
        s.set_defaults(func=fn)

    c = sub.add_parser("cidr", help="rolling prediction errors from minute-bar prices")
    c.add_argument("input", help="CSV with columns date, minute_index, price")
    c.add_argument("--t-cut", type=int, default=375, help="last minute of the predictor curve")
    c.add_argument("--horizon", type=int, default=30, help="number of rolling test days H")
    c.add_argument("--methods", default="AGMM,CLS,Mean")
    c.add_argument("--basis", default="fourier", choices=("fourier", "cosine"))
    c.add_argument("-o", "--out", default=None, help="write the JSON result here")
    c.set_defaults(func=cmd_cidr)

    t = sub.add_parser("selftest", help="run the built-in oracle checks")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (harness.ConfigurationError, harness.DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
