"""Command line driver.

Subcommands:

* ``simulate``         run the synthetic benchmark and write result tables
* ``fit``              ingest a CSV, fit one estimator, export a grid
* ``select-bandwidth`` cross-validate kernel bandwidths on a CSV
* ``inspect``          parse a CSV and print dataset and gap summaries

All deliberate failures exit with status 1 and a single stderr line of
the form ``error: <Category>: <message>`` where the category is the
exception class name; argparse usage problems keep argparse's exit
status.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import pandas as pd

from ._version import __version__
from .core import QueryGrid
from .errors import CondcovError, ParseError
from .forest import ForestConfig
from .ingest import IngestSpec, MissingPolicy, ingest
from .kernel import (
    DEFAULT_FOLDS,
    DEFAULT_GRID_POINTS,
    DEFAULT_GRID_SPAN,
    DEFAULT_PINV_TOL,
    BandwidthSearch,
    CombineRule,
    select_bandwidth,
)
from .pipeline import DEFAULT_GRID_SIZE, FitParams, replay, run_from_spec
from .simulate import (
    SimConfig,
    run_benchmark,
    write_benchmark_meta,
    write_results_csv,
    write_summary_csv,
)

RESULTS_CSV_NAME = "results.csv"
SUMMARY_CSV_NAME = "summary.csv"
BENCHMARK_META_NAME = "benchmark_meta.json"


def _default_jobs() -> int:
    raw = os.environ.get("CONDCOV_JOBS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _add_ingest_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="input CSV path")
    parser.add_argument(
        "--covariates",
        required=True,
        help="comma-separated covariate column names",
    )
    parser.add_argument(
        "--outputs", required=True, help="comma-separated output column names"
    )
    parser.add_argument("--timestamp-column", default="timestamp")
    parser.add_argument(
        "--timestamp-format",
        default="%Y-%m-%d %H:%M:%S",
        help="strptime format of the timestamp column",
    )
    parser.add_argument("--start", default=None, help="inclusive window start")
    parser.add_argument("--end", default=None, help="inclusive window end")
    parser.add_argument(
        "--missing",
        choices=[p.value for p in MissingPolicy],
        default=MissingPolicy.INTERPOLATE.value,
    )
    parser.add_argument("--delimiter", default=",")


def _ingest_spec(args) -> IngestSpec:
    return IngestSpec(
        path=args.input,
        covariate_columns=tuple(s.strip() for s in args.covariates.split(",")),
        output_columns=tuple(s.strip() for s in args.outputs.split(",")),
        timestamp_column=args.timestamp_column,
        timestamp_format=args.timestamp_format,
        start=args.start,
        end=args.end,
        missing=MissingPolicy(args.missing),
        delimiter=args.delimiter,
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condcov",
        description=(
            "Conditional covariance and correlation estimation under "
            "environmental confounders."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the synthetic benchmark")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--config", default=None, help="TOML configuration file")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")
    sim.add_argument(
        "--replications", type=int, default=None, help="override replication count"
    )
    sim.add_argument("--jobs", type=int, default=_default_jobs())
    sim.add_argument(
        "--record-timing",
        action="store_true",
        help="record wall times (makes outputs machine-dependent)",
    )

    fit_p = sub.add_parser("fit", help="fit one estimator and export a grid")
    fit_p.add_argument("--replay", default=None, help="re-run a manifest.json")
    fit_p.add_argument("--out", required=True, help="output directory")
    fit_p.add_argument("--jobs", type=int, default=_default_jobs())
    group = fit_p.add_argument_group("ingest (ignored with --replay)")
    group.add_argument("--input", help="input CSV path")
    group.add_argument("--covariates", help="comma-separated covariate columns")
    group.add_argument("--outputs", help="comma-separated output columns")
    group.add_argument("--timestamp-column", default="timestamp")
    group.add_argument("--timestamp-format", default="%Y-%m-%d %H:%M:%S")
    group.add_argument("--start", default=None)
    group.add_argument("--end", default=None)
    group.add_argument(
        "--missing",
        choices=[p.value for p in MissingPolicy],
        default=MissingPolicy.INTERPOLATE.value,
    )
    group.add_argument("--delimiter", default=",")
    est = fit_p.add_argument_group("estimator")
    est.add_argument("--method", choices=["nw", "forest"])
    est.add_argument(
        "--bandwidth",
        default=None,
        help='kernel covariance bandwidth, or "cv" to cross-validate',
    )
    est.add_argument(
        "--mean-bandwidth",
        default=None,
        help="bandwidth of the standardizing conditional mean "
        "(defaults to --bandwidth)",
    )
    est.add_argument("--standardize-covariates", action="store_true")
    est.add_argument("--trees", type=int, default=500)
    est.add_argument("--min-node-size", type=int, default=None)
    est.add_argument("--mtry", type=int, default=None)
    est.add_argument(
        "--max-cutpoints",
        default="256",
        help='candidate cutpoints per covariate per node, or "all"',
    )
    est.add_argument(
        "--exclude-diagonal",
        action="store_true",
        help="exclude variances from the split distance",
    )
    est.add_argument("--seed", type=int, default=0, help="forest seed")
    grid = fit_p.add_argument_group("evaluation grid")
    grid.add_argument(
        "--grid",
        default="auto",
        help='"auto" (rectangular over observed ranges, 2 covariates only) '
        "or a CSV of explicit points with covariate-named columns",
    )
    grid.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    fit_p.add_argument(
        "--save-model", action="store_true", help="save a fitted forest"
    )

    sel = sub.add_parser(
        "select-bandwidth", help="cross-validate kernel bandwidths"
    )
    _add_ingest_args(sel)
    sel.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS)
    sel.add_argument(
        "--span",
        nargs=2,
        type=float,
        default=list(DEFAULT_GRID_SPAN),
        metavar=("LOW", "HIGH"),
        help="grid span as multiples of the median pairwise distance",
    )
    sel.add_argument("--folds", type=int, default=DEFAULT_FOLDS)
    sel.add_argument(
        "--combine",
        choices=[r.value for r in CombineRule],
        default=CombineRule.GEOMEAN_OF_MINIMIZERS.value,
    )
    sel.add_argument("--pinv-tol", type=float, default=DEFAULT_PINV_TOL)
    sel.add_argument(
        "--mean-bandwidth",
        type=float,
        default=None,
        help="fix the standardizing mean bandwidth (default: tie to candidate)",
    )
    sel.add_argument("--standardize-covariates", action="store_true")
    sel.add_argument("--out", default=None, help="also write the table as CSV")

    ins = sub.add_parser("inspect", help="parse a CSV and print summaries")
    _add_ingest_args(ins)
    return parser


def _cmd_simulate(args) -> int:
    config = SimConfig.from_toml(args.config) if args.config else SimConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    result = run_benchmark(
        config, n_jobs=args.jobs, record_timing=args.record_timing
    )
    os.makedirs(args.out, exist_ok=True)
    write_results_csv(result, os.path.join(args.out, RESULTS_CSV_NAME))
    write_summary_csv(result, os.path.join(args.out, SUMMARY_CSV_NAME))
    write_benchmark_meta(result, os.path.join(args.out, BENCHMARK_META_NAME))
    for row in result.summary_rows():
        print(
            f"{row.method:>7} q={row.q}  median_rmse={row.median_rmse:.6g}  "
            f"iqr=[{row.iqr_low:.6g}, {row.iqr_high:.6g}]  "
            f"ok={row.n_ok} failed={row.n_failed}"
        )
    print(f"wrote {RESULTS_CSV_NAME}, {SUMMARY_CSV_NAME}, "
          f"{BENCHMARK_META_NAME} to {args.out}")
    return 0


def _load_grid_points(path, spec: IngestSpec) -> QueryGrid:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, OSError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    missing = [c for c in spec.covariate_columns if c not in frame.columns]
    if missing:
        raise ParseError(f"{path}: grid file is missing column(s) {missing}")
    return QueryGrid(frame[list(spec.covariate_columns)].to_numpy(dtype=float))


def _cmd_fit(args) -> int:
    if args.replay:
        result = replay(args.replay, args.out, n_jobs=args.jobs)
        print(f"replayed {args.replay} into {result.out_dir}")
        return 0
    required = ["input", "covariates", "outputs", "method"]
    missing = [f"--{name}" for name in required if getattr(args, name) is None]
    if missing:
        raise CondcovError(f"fit requires {', '.join(missing)} (or --replay)")
    spec = _ingest_spec(args)
    if args.max_cutpoints == "all":
        max_cutpoints = None
    else:
        max_cutpoints = int(args.max_cutpoints)
    forest_cfg = ForestConfig(
        n_trees=args.trees,
        min_node_size=args.min_node_size,
        mtry=args.mtry,
        max_cutpoints=max_cutpoints,
        include_diagonal=not args.exclude_diagonal,
        seed=args.seed,
    )
    bandwidth = args.bandwidth
    if bandwidth is not None and bandwidth != "cv":
        bandwidth = float(bandwidth)
    mean_bandwidth = args.mean_bandwidth
    if mean_bandwidth is not None and mean_bandwidth != "cv":
        mean_bandwidth = float(mean_bandwidth)
    params = FitParams(
        method=args.method,
        bandwidth=bandwidth,
        mean_bandwidth=mean_bandwidth,
        standardize_covariates=args.standardize_covariates,
        forest=forest_cfg if args.method == "forest" else None,
    )
    grid = None
    if args.grid != "auto":
        grid = _load_grid_points(args.grid, spec)
    result = run_from_spec(
        spec,
        params,
        args.out,
        grid=grid,
        grid_size=args.grid_size,
        save_model=args.save_model,
        n_jobs=args.jobs,
    )
    print(f"wrote {os.path.basename(result.grid_csv)}, "
          f"{os.path.basename(result.grid_meta)}, "
          f"{os.path.basename(result.manifest_path)} to {result.out_dir}")
    if result.model_path:
        print(f"saved model to {result.model_path}")
    return 0


def _cmd_select_bandwidth(args) -> int:
    spec = _ingest_spec(args)
    data = ingest(spec).dataset
    search = BandwidthSearch.for_dataset(
        data,
        n_points=args.grid_points,
        span=tuple(args.span),
        standardize_covariates=args.standardize_covariates,
        folds=args.folds,
        combine=CombineRule(args.combine),
        pseudoinverse_tol=args.pinv_tol,
        mean_bandwidth=args.mean_bandwidth,
    )
    selection = select_bandwidth(data, search)
    print(selection.format_table())
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bandwidth", "frobenius_loss", "trace_loss"])
            for c in selection.candidates:
                writer.writerow(
                    [
                        repr(c.bandwidth),
                        repr(c.frobenius_loss),
                        repr(c.trace_loss),
                    ]
                )
        print(f"wrote candidate table to {args.out}")
    return 0


def _cmd_inspect(args) -> int:
    spec = _ingest_spec(args)
    result = ingest(spec)
    data = result.dataset
    print(f"file: {spec.path}")
    print(f"rows: {data.n}")
    if data.timestamps is not None:
        from datetime import datetime, timezone

        lo = datetime.fromtimestamp(data.timestamps[0], tz=timezone.utc)
        hi = datetime.fromtimestamp(data.timestamps[-1], tz=timezone.utc)
        print(f"window: {lo:%Y-%m-%d %H:%M:%S} .. {hi:%Y-%m-%d %H:%M:%S}")
    print(f"covariates ({data.q}):")
    for j, name in enumerate(data.covariate_names):
        col = data.Z[:, j]
        print(
            f"  {name}: min={col.min():.6g} mean={col.mean():.6g} "
            f"max={col.max():.6g}"
        )
    print(f"outputs ({data.p}):")
    for j, name in enumerate(data.output_names):
        col = data.X[:, j]
        print(
            f"  {name}: min={col.min():.6g} mean={col.mean():.6g} "
            f"max={col.max():.6g}"
        )
    print("gap report:")
    for line in result.report.summary_lines():
        print(f"  {line}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select-bandwidth": _cmd_select_bandwidth,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except CondcovError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
