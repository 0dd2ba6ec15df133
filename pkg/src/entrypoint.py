import argparse
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime
from typing import List, Optional

from src.dimred_pca import reduce_pca
from src.harness import emit_report, parse_report_csv, run_experiment, select_best_models, EvalReport
from src.helpers.config_parser import parse_config
from src.helpers.constants import (
    CONFIGURATION_FILE_PATH,
    DATE_FORMAT,
    DEFAULT_END,
    DEFAULT_SEED,
    DEFAULT_START,
    DEFAULT_SYMBOLS,
    DEFAULT_TEST_FRACTION,
    ENDPOINT_ENV_VAR,
    INPUT_FOLDER,
    RESULTS_FOLDER,
)
from src.helpers.errors import ConfigError, QstockError
from src.helpers.selection_enum import QuboSolverSelection, ReductionSelection, ScalerKind, parse_selection
from src.indicators import apply_scaler, build_feature_matrix, dataset_to_csv, fit_scaler, select_columns
from src.market_data import (
    chronological_split,
    fetch_ohlc,
    generate_gbm_series,
    parse_ohlc_csv,
    serialize_ohlc_csv,
)
from src.qubo_select import select_features, serialize_qubo

logger = logging.getLogger(__name__)


def _date(text: str):
    try:
        return datetime.strptime(text, DATE_FORMAT).date()
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a YYYY-MM-DD date") from None


def _reduction(text: str) -> ReductionSelection:
    try:
        return parse_selection(ReductionSelection, text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _solver(text: str) -> QuboSolverSelection:
    try:
        return parse_selection(QuboSolverSelection, text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _write(path: Optional[str], text: str, what: str):
    if path is None:
        sys.stdout.write(text)
        return
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    print(f"{what} written to {path}")


def _read(path: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"input file {path} does not exist")
    with open(path, mode="r", encoding="utf-8") as f:
        return f.read()


def _load_series(path: str):
    return parse_ohlc_csv(_read(path), symbol=os.path.splitext(os.path.basename(path))[0])


def _cmd_fetch(args) -> int:
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV_VAR)
    if not endpoint:
        raise ConfigError(f"no endpoint given: pass --endpoint or set {ENDPOINT_ENV_VAR}")
    for symbol in args.symbols:
        series = fetch_ohlc(symbol.upper(), args.start, args.end, endpoint)
        _write(os.path.join(args.out_dir, f"{series.symbol}.csv"), serialize_ohlc_csv(series), "Data")
    return 0


def _cmd_synth(args) -> int:
    series = generate_gbm_series(args.days, s0=args.s0, drift=args.drift, volatility=args.volatility,
                                 seed=args.seed, symbol=args.symbol, momentum=args.momentum)
    _write(args.out, serialize_ohlc_csv(series), "Data")
    return 0


def _cmd_features(args) -> int:
    dataset = build_feature_matrix(_load_series(args.input))
    _write(args.out, dataset_to_csv(dataset), "Features")
    return 0


def _cmd_reduce(args) -> int:
    """Reducers and scalers are fitted on the training partition; every row is written reduced."""
    reduction = args.method
    if reduction is ReductionSelection.none:
        raise ConfigError("reduce needs a PCA-k or QA-k method")
    dataset = build_feature_matrix(_load_series(args.input))
    train, _ = chronological_split(dataset, args.test_fraction)
    scaler = fit_scaler(train, ScalerKind.standardize)
    train_s, full_s = apply_scaler(scaler, train), apply_scaler(scaler, dataset)

    if reduction.method == "pca":
        _, reduced, _ = reduce_pca(train_s, full_s, reduction.k)
    else:
        selected, _, qubo = select_features(train_s, reduction.k, args.solver, seed=args.seed)
        reduced = select_columns(full_s, selected)
        qubo_path = args.qubo or os.path.splitext(args.out)[0] + ".qubo"
        _write(qubo_path, serialize_qubo(qubo), "QUBO")
    _write(args.out, dataset_to_csv(reduced), "Reduced dataset")
    return 0


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    logger.debug("Running %d datasets from %s", len(config.sources), args.config)
    if args.endpoint:
        config = replace(config, endpoint=args.endpoint)
    if args.jobs:
        config = replace(config, jobs=args.jobs)

    report = run_experiment(config, dump_kernel_dir=args.dump_kernel)
    _write(args.out, emit_report(report, "csv"), "Results")
    if args.markdown:
        _write(args.markdown, emit_report(report, "markdown"), "Markdown report")
    return 0


def _cmd_report(args) -> int:
    report = parse_report_csv(_read(args.input))
    if args.best:
        report = EvalReport(tuple(select_best_models(report)))
    _write(args.out, emit_report(report, args.format, include_averages=not args.best), "Report")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qstock", description="Quantum-assisted stock direction laboratory.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at DEBUG level")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    fetch = commands.add_parser("fetch", help="download daily OHLC CSVs from a chart endpoint")
    fetch.add_argument("symbols", nargs="*", default=list(DEFAULT_SYMBOLS), help="ticker symbols")
    fetch.add_argument("--start", type=_date, default=DEFAULT_START)
    fetch.add_argument("--end", type=_date, default=DEFAULT_END)
    fetch.add_argument("--endpoint", help=f"base URL, defaults to ${ENDPOINT_ENV_VAR}")
    fetch.add_argument("--out-dir", default=INPUT_FOLDER)
    fetch.set_defaults(handler=_cmd_fetch)

    synth = commands.add_parser("synth", help="write a synthetic GBM OHLC series")
    synth.add_argument("--days", type=int, default=504)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--s0", type=float, default=100.0)
    synth.add_argument("--drift", type=float, default=0.0)
    synth.add_argument("--volatility", type=float, default=0.01)
    synth.add_argument("--momentum", type=float, default=0.0, help="AR(1) persistence of daily returns")
    synth.add_argument("--symbol", default="SYNTH")
    synth.add_argument("--out", required=True)
    synth.set_defaults(handler=_cmd_synth)

    features = commands.add_parser("features", help="indicator feature matrix of an OHLC CSV")
    features.add_argument("--in", dest="input", required=True)
    features.add_argument("--out", help="defaults to stdout")
    features.set_defaults(handler=_cmd_features)

    reduce = commands.add_parser("reduce", help="PCA-k or QA-k reduced feature matrix of an OHLC CSV")
    reduce.add_argument("--in", dest="input", required=True)
    reduce.add_argument("--method", type=_reduction, required=True, help="pca3, pca5, pca8, qa3, qa5 or qa8")
    reduce.add_argument("--out", required=True)
    reduce.add_argument("--qubo", help="QUBO file for QA methods, defaults to <out>.qubo")
    reduce.add_argument("--solver", type=_solver, default=QuboSolverSelection.annealer)
    reduce.add_argument("--seed", type=int, default=DEFAULT_SEED)
    reduce.add_argument("--test-fraction", type=float, default=DEFAULT_TEST_FRACTION)
    reduce.set_defaults(handler=_cmd_reduce)

    run = commands.add_parser("run", help="run an experiment grid config")
    run.add_argument("--config", default=CONFIGURATION_FILE_PATH)
    run.add_argument("--out", default=os.path.join(RESULTS_FOLDER, "report.csv"))
    run.add_argument("--markdown", help="also write the markdown tables here")
    run.add_argument("--dump-kernel", metavar="DIR", help="write every QSVM training Gram matrix as CSV")
    run.add_argument("--jobs", type=int, help="worker threads for kernel rows")
    run.add_argument("--endpoint", help=f"fetch endpoint, overrides the config and ${ENDPOINT_ENV_VAR}")
    run.set_defaults(handler=_cmd_run)

    report = commands.add_parser("report", help="render a report CSV")
    report.add_argument("--in", dest="input", required=True)
    report.add_argument("--out", help="defaults to stdout")
    report.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    report.add_argument("--best", action="store_true", help="best classical and QSVM row per dataset and reduction")
    report.set_defaults(handler=_cmd_report)
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (QstockError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    """
    Entry point of the qstock_lab package.
    """
    sys.exit(cli_main(sys.argv[1:]))
