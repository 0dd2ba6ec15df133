"""
Experiment grid of the quantum-assisted direction pipeline and its reports.

Per dataset: OHLC -> canonical indicator features -> chronological split -> for every
reduction (None, PCA-k, Quantum Annealing-k) a train-only fitted chain of
    standardize -> reduce -> standardize (classical models) | minmax_to_angle (QSVM)
-> train each model -> metrics on the test partition.

OUTPUT:
-------
CSV (one row per grid cell):
dataset,model,entanglement,reduction,accuracy,f_score
HON,KNN,-,PCA-3,0.5368,0.5604
HON,Quantum SVM,Linear,Quantum Annealing-5,0.6105,0.6452

Failed cells keep their row with `failed` in both score columns.
"""

import io
import logging
import math
import os
import zlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.classifiers import KernelDescriptor, predict_baseline, predict_svm, train_baseline, train_svm
from src.dimred_pca import explained_variance_ratio, reduce_pca
from src.helpers.config_parser import ExperimentConfig, SourceSpec
from src.helpers.constants import (
    AVERAGE_HEADER,
    CLASSICAL_FAMILY,
    MARKDOWN_HEADER,
    QSVM_FAMILY,
    REPORT_CSV_HEADER,
)
from src.helpers.errors import ConfigError, DatasetError, QstockError
from src.helpers.selection_enum import (
    EntanglementScheme,
    ModelSelection,
    ReductionSelection,
    ScalerKind,
)
from src.indicators import Dataset, apply_scaler, build_feature_matrix, fit_scaler, select_columns
from src.market_data import OhlcSeries, chronological_split, fetch_ohlc, generate_gbm_series, parse_ohlc_csv
from src.quantum_kernel import KernelSpec, kernel_matrix
from src.qubo_select import select_features

logger = logging.getLogger(__name__)

FAILED = "failed"
NO_SCHEME = "-"
CELL_ERRORS = (QstockError, ValueError, ArithmeticError)
SIMULATION_FOOTNOTE = "8-qubit QSVM, computed by exact statevector simulation"
AVERAGE_NOTE = ("Averages are taken over datasets; the Classical Machine Learning rows also average "
                "over the classical models, the QSVM rows over the entanglement schemes.")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    confusion: Optional[Tuple[int, int, int, int]] = None  # (tp, fp, tn, fn)


def compute_metrics(y_true, y_pred) -> Metrics:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise DatasetError(f"label length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise DatasetError("cannot score empty label vectors")
    for labels in (y_true, y_pred):
        if not np.all((labels == 0) | (labels == 1)):
            raise DatasetError("labels must be 0 or 1")

    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f_score = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics((tp + tn) / y_true.size, precision, recall, f_score, (tp, fp, tn, fn))


@dataclass(frozen=True)
class Provenance:
    """Row ranges [start, stop) of the dataset each fitted stage of a cell saw."""
    train_rows: Tuple[int, int]
    test_rows: Tuple[int, int]
    stages: Tuple[Tuple[str, Tuple[int, int]], ...]

    @property
    def train_only(self) -> bool:
        return all(rows == self.train_rows for _, rows in self.stages)


@dataclass(frozen=True)
class EvalRow:
    dataset: str
    model: ModelSelection
    scheme: Optional[EntanglementScheme]
    reduction: ReductionSelection
    metrics: Optional[Metrics] = None
    error: Optional[str] = None
    provenance: Optional[Provenance] = None

    @property
    def failed(self) -> bool:
        return self.metrics is None

    @property
    def simulated_only(self) -> bool:
        return self.model.is_quantum and self.reduction.k == 8


@dataclass(frozen=True)
class EvalReport:
    rows: Tuple[EvalRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def datasets(self) -> List[str]:
        return list(dict.fromkeys(row.dataset for row in self.rows))

    @property
    def failed(self) -> List[EvalRow]:
        return [row for row in self.rows if row.failed]


@dataclass(frozen=True)
class AverageRow:
    family: str
    reduction: ReductionSelection
    accuracy: float
    f_score: float
    count: int


def derive_seed(seed: int, *parts) -> int:
    """Stable per-cell seed: crc32 of the cell coordinates mixed with the config seed."""
    key = "|".join([str(seed)] + [str(part) for part in parts]).encode("utf-8")
    return zlib.crc32(key)


def load_source(source: SourceSpec, endpoint: Optional[str] = None) -> OhlcSeries:
    if source.kind == "csv":
        if not os.path.exists(source.path):
            raise ConfigError(f"data file {source.path} does not exist")
        with open(source.path, mode="r", encoding="utf-8") as buffer:
            return parse_ohlc_csv(buffer.read(), symbol=source.name)
    if source.kind == "synth":
        return generate_gbm_series(source.days, seed=source.seed, symbol=source.name, momentum=source.momentum)
    if not endpoint:
        raise ConfigError(f"source {source.name} needs an endpoint (config key 'endpoint' or QSTOCK_ENDPOINT)")
    return fetch_ohlc(source.name, source.start, source.end, endpoint)


def _row_range(part: Dataset, full: Dataset) -> Tuple[int, int]:
    start = full.dates.index(part.dates[0])
    return start, start + len(part)


@dataclass(frozen=True)
class _ReducedSplit:
    train: Dataset
    test: Dataset
    stages: Tuple[Tuple[str, Tuple[int, int]], ...]


def _reduce(config: ExperimentConfig, name: str, full: Dataset, train: Dataset, test: Dataset,
            reduction: ReductionSelection) -> _ReducedSplit:
    scaler = fit_scaler(train, ScalerKind.standardize)
    stages = [("standardize", _row_range(train, full))]
    train_s, test_s = apply_scaler(scaler, train), apply_scaler(scaler, test)

    if reduction.method == "pca":
        train_r, test_r, model = reduce_pca(train_s, test_s, reduction.k)
        stages.append(("pca", _row_range(train_s, full)))
        logger.debug("%s %s keeps %.1f%% of the variance", name, reduction.value,
                     100.0 * explained_variance_ratio(model).sum())
    elif reduction.method == "qa":
        selected, _, _ = select_features(
            train_s, reduction.k, config.qubo_solver, alpha=config.qubo_alpha, sweeps=config.anneal_sweeps,
            restarts=config.anneal_restarts, seed=derive_seed(config.seed, name, reduction.name))
        stages.append(("qubo", _row_range(train_s, full)))
        train_r, test_r = select_columns(train_s, selected), select_columns(test_s, selected)
    else:
        train_r, test_r = train_s, test_s
    return _ReducedSplit(train_r, test_r, tuple(stages))


def _final_scaling(reduced: _ReducedSplit, kind: ScalerKind, full: Dataset):
    scaler = fit_scaler(reduced.train, kind)
    stages = reduced.stages + ((kind.name, _row_range(reduced.train, full)),)
    return apply_scaler(scaler, reduced.train), apply_scaler(scaler, reduced.test), stages


def _dump_kernel(directory: str, name: str, reduction: ReductionSelection, scheme: EntanglementScheme,
                 entries: np.ndarray):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{name}_{reduction.name}_{scheme.name}.csv")
    pd.DataFrame(entries).to_csv(path, index=False, header=False, float_format="%.17g")
    logger.info("Kernel matrix written to %s", path)


def _run_dataset(config: ExperimentConfig, name: str, dataset: Dataset,
                 dump_kernel_dir: Optional[str]) -> List[EvalRow]:
    train, test = chronological_split(dataset, config.test_fraction)
    train_rows, test_rows = _row_range(train, dataset), _row_range(test, dataset)
    classical = [m for m in config.models if not m.is_quantum]
    wants_qsvm = ModelSelection.qsvm in config.models

    needed = [r for r in ReductionSelection
              if (classical and r in config.reductions) or (wants_qsvm and r in config.quantum_reductions)]
    rows: List[EvalRow] = []

    for reduction in needed:
        cells = [(model, None) for model in classical if reduction in config.reductions]
        if wants_qsvm and reduction in config.quantum_reductions:
            cells += [(ModelSelection.qsvm, scheme) for scheme in config.schemes]
        try:
            reduced = _reduce(config, name, dataset, train, test, reduction)
        except CELL_ERRORS as exc:
            logger.warning("%s %s reduction failed: %s", name, reduction.value, exc)
            rows += [EvalRow(name, model, scheme, reduction, error=str(exc)) for model, scheme in cells]
            continue

        for model, scheme in cells:
            try:
                if model.is_quantum:
                    train_a, test_a, stages = _final_scaling(reduced, ScalerKind.minmax_to_angle, dataset)
                    spec = KernelSpec(train_a.n_features, config.reps, scheme)
                    gram = kernel_matrix(train_a.X, spec=spec, n_jobs=config.jobs)
                    cross = kernel_matrix(test_a.X, train_a.X, spec=spec, n_jobs=config.jobs)
                    if dump_kernel_dir:
                        _dump_kernel(dump_kernel_dir, name, reduction, scheme, gram.entries)
                    svm = train_svm(gram.entries, train_a.y, KernelDescriptor("precomputed"), C=config.svm_c)
                    predictions = predict_svm(svm, cross.entries)
                    y_test, fitted_rows = test_a.y, _row_range(train_a, dataset)
                else:
                    train_c, test_c, stages = _final_scaling(reduced, ScalerKind.standardize, dataset)
                    if model is ModelSelection.svm:
                        svm = train_svm(train_c.X, train_c.y, KernelDescriptor("rbf"), C=config.svm_c)
                        predictions = predict_svm(svm, test_c.X)
                    else:
                        params = ({"seed": derive_seed(config.seed, name, model.name, reduction.name)}
                                  if model is ModelSelection.random_forest else None)
                        fitted = train_baseline(model, train_c.X, train_c.y, params)
                        predictions = predict_baseline(fitted, test_c.X)
                    y_test, fitted_rows = test_c.y, _row_range(train_c, dataset)
                stages = stages + (("model", fitted_rows),)
                metrics = compute_metrics(y_test, predictions)
                rows.append(EvalRow(name, model, scheme, reduction, metrics,
                                    provenance=Provenance(train_rows, test_rows, stages)))
                logger.info("%s | %s | %s | %s: accuracy %.4f f-score %.4f", name, model.value,
                            scheme.value if scheme else NO_SCHEME, reduction.value,
                            metrics.accuracy, metrics.f_score)
            except CELL_ERRORS as exc:
                logger.warning("%s | %s | %s failed: %s", name, model.value, reduction.value, exc)
                rows.append(EvalRow(name, model, scheme, reduction, error=str(exc)))
    return rows


def _row_order(datasets: Sequence[str]):
    models, reductions, schemes = list(ModelSelection), list(ReductionSelection), list(EntanglementScheme)

    def key(row: EvalRow):
        return (datasets.index(row.dataset), models.index(row.model), reductions.index(row.reduction),
                schemes.index(row.scheme) if row.scheme else -1)
    return key


def run_experiment(config: ExperimentConfig, dump_kernel_dir: Optional[str] = None) -> EvalReport:
    """
    Runs the whole grid. Data and feature-extraction errors abort the run; anything
    that goes wrong inside a grid cell is recorded as a failed row instead.
    """
    rows: List[EvalRow] = []
    names = [source.name for source in config.sources]
    for source in config.sources:
        series = load_source(source, config.endpoint)
        logger.info("Loaded %d rows for %s", len(series), source.name)
        dataset = build_feature_matrix(series)
        rows += _run_dataset(config, source.name, dataset, dump_kernel_dir)

    rows.sort(key=_row_order(names))
    report = EvalReport(tuple(rows))
    if report.failed:
        logger.warning("%d of %d grid cells failed", len(report.failed), len(report))
    return report


def summarize_average(report: EvalReport) -> List[AverageRow]:
    scored = [row for row in report.rows if not row.failed]
    if not scored:
        return []
    frame = pd.DataFrame({
        "family": [QSVM_FAMILY if row.model.is_quantum else CLASSICAL_FAMILY for row in scored],
        "reduction": [list(ReductionSelection).index(row.reduction) for row in scored],
        "accuracy": [row.metrics.accuracy for row in scored],
        "f_score": [row.metrics.f_score for row in scored],
    })
    frame["family_order"] = (frame["family"] == QSVM_FAMILY).astype(int)
    grouped = frame.groupby(["family_order", "family", "reduction"], sort=True).agg(
        accuracy=("accuracy", "mean"), f_score=("f_score", "mean"), count=("accuracy", "size"))
    reductions = list(ReductionSelection)
    return [
        AverageRow(family, reductions[reduction], float(values.accuracy), float(values.f_score), int(values["count"]))
        for (_, family, reduction), values in grouped.iterrows()
    ]


def select_best_models(report: EvalReport) -> List[EvalRow]:
    """Per dataset and reduction, the best classical row and the best QSVM row by (accuracy, f_score)."""
    best: Dict[Tuple[str, ReductionSelection, bool], EvalRow] = {}
    for row in report.rows:
        if row.failed:
            continue
        key = (row.dataset, row.reduction, row.model.is_quantum)
        current = best.get(key)
        if current is None or (row.metrics.accuracy, row.metrics.f_score) > \
                (current.metrics.accuracy, current.metrics.f_score):
            best[key] = row
    datasets = report.datasets
    return sorted(best.values(), key=_row_order(datasets))


def _percent(value: float) -> str:
    return f"{100.0 * value:.2f}%"


def _markdown_table(header: Sequence[str], body: List[List[str]]) -> List[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    lines += ["| " + " | ".join(cells) + " |" for cells in body]
    return lines


def _csv_text(report: EvalReport) -> str:
    buffer = io.StringIO()
    frame = pd.DataFrame(
        [[row.dataset, row.model.value, row.scheme.value if row.scheme else NO_SCHEME, row.reduction.value,
          FAILED if row.failed else f"{row.metrics.accuracy:.4f}",
          FAILED if row.failed else f"{row.metrics.f_score:.4f}"]
         for row in report.rows],
        columns=REPORT_CSV_HEADER,
    )
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def _markdown_text(report: EvalReport, include_averages: bool) -> str:
    lines: List[str] = []
    footnote = False
    for dataset in report.datasets:
        body = []
        for row in report.rows:
            if row.dataset != dataset:
                continue
            model = row.model.value + (" *" if row.simulated_only else "")
            footnote = footnote or row.simulated_only
            scores = [FAILED, FAILED] if row.failed else [_percent(row.metrics.accuracy), _percent(row.metrics.f_score)]
            body.append([model, row.scheme.value if row.scheme else NO_SCHEME, row.reduction.value] + scores)
        lines += [f"### {dataset}", ""] + _markdown_table(MARKDOWN_HEADER, body) + [""]
    if footnote:
        lines += [f"\\* {SIMULATION_FOOTNOTE}", ""]

    averages = summarize_average(report) if include_averages else []
    if averages:
        body = [[row.family, row.reduction.value, _percent(row.accuracy), _percent(row.f_score)] for row in averages]
        lines += ["### Averages", ""] + _markdown_table(AVERAGE_HEADER, body) + ["", AVERAGE_NOTE, ""]
    return "\n".join(lines)


def emit_report(report: EvalReport, fmt: str = "csv", include_averages: bool = True) -> str:
    if not report.rows:
        raise DatasetError("cannot emit an empty report")
    if fmt == "csv":
        return _csv_text(report)
    if fmt == "markdown":
        return _markdown_text(report, include_averages)
    raise ValueError(f"unknown report format '{fmt}', expected csv or markdown")


def _lookup(enum_cls, value: str, number: int):
    try:
        return enum_cls(value)
    except ValueError:
        raise DatasetError(f"row {number}: unknown {enum_cls.__name__} '{value}'") from None


def _score(text: str, number: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"row {number}: '{text}' is not a score") from None
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise DatasetError(f"row {number}: score {value} outside [0, 1]")
    return value


def parse_report_csv(text: str) -> EvalReport:
    """
    Inverse of the csv rendering. Only accuracy and f_score survive the round trip;
    precision and recall of parsed rows are NaN and the confusion counts are unknown.
    """
    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise DatasetError(f"unreadable report: {exc}") from None
    if list(frame.columns) != REPORT_CSV_HEADER:
        raise DatasetError(f"report header must be {','.join(REPORT_CSV_HEADER)}")

    rows = []
    for number, record in enumerate(frame.itertuples(index=False), start=1):
        model = _lookup(ModelSelection, record.model, number)
        scheme = None if record.entanglement == NO_SCHEME else _lookup(EntanglementScheme, record.entanglement, number)
        reduction = _lookup(ReductionSelection, record.reduction, number)
        if record.accuracy == FAILED or record.f_score == FAILED:
            rows.append(EvalRow(record.dataset, model, scheme, reduction, error=FAILED))
            continue
        metrics = Metrics(_score(record.accuracy, number), math.nan, math.nan, _score(record.f_score, number))
        rows.append(EvalRow(record.dataset, model, scheme, reduction, metrics))
    return EvalReport(tuple(rows))
