from dataclasses import replace
from pathlib import Path
import sys
import zlib

import numpy as np
import pandas as pd
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

import src.harness as harness
from src.classifiers import KnnModel
from src.harness import (
    AVERAGE_NOTE,
    SIMULATION_FOOTNOTE,
    EvalReport,
    EvalRow,
    Metrics,
    compute_metrics,
    derive_seed,
    emit_report,
    load_source,
    parse_report_csv,
    run_experiment,
    select_best_models,
    summarize_average,
)
from src.helpers.config_parser import ExperimentConfig, SourceSpec
from src.helpers.constants import AVERAGE_HEADER, CLASSICAL_FAMILY, MARKDOWN_HEADER, QSVM_FAMILY
from src.helpers.errors import CardinalityError, ConfigError, DatasetError, TrainingError
from src.helpers.selection_enum import EntanglementScheme, ModelSelection, QuboSolverSelection, ReductionSelection

WALK = SourceSpec("synth", "walk", days=300, seed=7)


def _config(**overrides):
    settings = dict(sources=(WALK,), reductions=(ReductionSelection.none,), models=(ModelSelection.knn,),
                    schemes=(EntanglementScheme.linear,), qubo_solver=QuboSolverSelection.exhaustive)
    settings.update(overrides)
    return ExperimentConfig(**settings)


def _row(dataset, model, reduction, accuracy, f_score, scheme=None):
    metrics = Metrics(accuracy, np.nan, np.nan, f_score)
    return EvalRow(dataset, model, scheme, reduction, metrics)


@pytest.fixture(scope="module")
def small_report():
    config = _config(
        reductions=(ReductionSelection.none, ReductionSelection.pca3, ReductionSelection.qa3),
        models=(ModelSelection.svm, ModelSelection.logistic_regression, ModelSelection.knn, ModelSelection.qsvm),
        qsvm_reductions=(ReductionSelection.pca3, ReductionSelection.qa3),
        schemes=(EntanglementScheme.linear, EntanglementScheme.full, EntanglementScheme.pairwise),
    )
    return config, run_experiment(config)


def test_metrics_perfect_prediction():
    metrics = compute_metrics([0, 1, 1, 0], [0, 1, 1, 0])

    assert metrics.accuracy == 1.0
    assert metrics.f_score == 1.0
    assert metrics.confusion == (2, 0, 2, 0)


def test_metrics_f_score_arithmetic():
    # tp=3 fp=2 fn=1: precision 0.6, recall 0.75
    metrics = compute_metrics([1, 1, 1, 1, 0, 0, 0], [1, 1, 1, 0, 1, 1, 0])

    assert metrics.precision == pytest.approx(0.6)
    assert metrics.recall == pytest.approx(0.75)
    assert round(metrics.f_score, 4) == 0.6667


def test_metrics_accuracy_granularity():
    y_true = np.array([1] * 50 + [0] * 45)
    y_pred = y_true.copy()
    y_pred[:36] = 1 - y_pred[:36]

    metrics = compute_metrics(y_true, y_pred)

    assert metrics.accuracy == 59 / 95
    report = EvalReport((EvalRow("HON", ModelSelection.knn, None, ReductionSelection.qa5, metrics),))
    assert "| 62.11% |" in emit_report(report, "markdown")


def test_metrics_without_positive_predictions():
    metrics = compute_metrics([1, 0, 1], [0, 0, 0])

    assert metrics.precision == 0.0
    assert metrics.f_score == 0.0


def test_metrics_match_confusion_counts():
    rng = np.random.default_rng(0)
    for _ in range(50):
        y_true, y_pred = rng.integers(0, 2, 40), rng.integers(0, 2, 40)
        metrics = compute_metrics(y_true, y_pred)
        tp, fp, tn, fn = metrics.confusion
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0

        assert abs(metrics.accuracy - (tp + tn) / 40) < 1e-12
        expected = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        assert abs(metrics.f_score - expected) < 1e-12


@pytest.mark.parametrize("y_true, y_pred", [([0, 1], [0]), ([], []), ([0, 2], [0, 1])])
def test_metrics_reject_bad_labels(y_true, y_pred):
    with pytest.raises(DatasetError):
        compute_metrics(y_true, y_pred)


def test_derive_seed_is_crc32_of_cell_coordinates():
    assert derive_seed(42, "HON", "qa5") == zlib.crc32(b"42|HON|qa5")
    assert derive_seed(42, "HON", "qa5") != derive_seed(43, "HON", "qa5")


def test_load_source_errors(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_source(SourceSpec("csv", "gone", path=str(tmp_path / "gone.csv")))
    with pytest.raises(ConfigError, match="endpoint"):
        load_source(SourceSpec("fetch", "HON"))


def test_single_cell_grid():
    config = _config(reductions=(ReductionSelection.qa5,), anneal_sweeps=200, anneal_restarts=4,
                     qubo_solver=QuboSolverSelection.annealer)

    report = run_experiment(config)

    assert len(report) == 1
    row = report.rows[0]
    assert (row.dataset, row.model, row.scheme, row.reduction) == ("walk", ModelSelection.knn, None,
                                                                   ReductionSelection.qa5)
    assert len(emit_report(report, "csv").splitlines()) == 2


def test_full_grid_row_count(monkeypatch):
    monkeypatch.setattr(harness, "train_baseline", lambda kind, X, y, params=None: KnnModel(k=1).fit(X, y))
    sources = tuple(SourceSpec("synth", name, days=260, seed=seed) for seed, name in enumerate(["A", "B", "C", "D"]))
    config = ExperimentConfig(
        sources=sources,
        models=tuple(m for m in ModelSelection),
        qsvm_reductions=(ReductionSelection.pca3, ReductionSelection.pca5, ReductionSelection.qa3,
                         ReductionSelection.qa5),
        qubo_solver=QuboSolverSelection.exhaustive,
    )

    report = run_experiment(config)

    assert len(report) == 4 * (7 * 8 + 4 * 4) == 288
    keys = [(r.dataset, r.model, r.scheme, r.reduction) for r in report.rows]
    assert len(set(keys)) == len(keys)
    assert report.datasets == ["A", "B", "C", "D"]
    first = report.rows[0]
    assert (first.model, first.reduction) == (ModelSelection.svm, ReductionSelection.none)


def test_rows_follow_the_fixed_order(small_report):
    _, report = small_report
    models, reductions, schemes = list(ModelSelection), list(ReductionSelection), list(EntanglementScheme)

    keys = [(models.index(r.model), reductions.index(r.reduction), schemes.index(r.scheme) if r.scheme else -1)
            for r in report.rows]

    assert keys == sorted(keys)
    assert len(report) == 3 * 3 + 2 * 3


def test_classical_rows_have_no_scheme(small_report):
    _, report = small_report

    for row in report.rows:
        assert (row.scheme is None) == (not row.model.is_quantum)


def test_every_fit_saw_train_rows_only(small_report):
    _, report = small_report

    for row in report.rows:
        assert row.provenance.train_only
        assert row.provenance.train_rows[0] == 0
        assert row.provenance.train_rows[1] == row.provenance.test_rows[0]
        assert [name for name, _ in row.provenance.stages][-1] == "model"


def test_linear_and_pairwise_rows_agree(small_report):
    _, report = small_report
    quantum = {(r.reduction, r.scheme): r.metrics for r in report.rows if r.model.is_quantum}

    for reduction in (ReductionSelection.pca3, ReductionSelection.qa3):
        assert quantum[(reduction, EntanglementScheme.linear)] == quantum[(reduction, EntanglementScheme.pairwise)]


def test_rerun_is_byte_identical(small_report):
    config, report = small_report

    again = run_experiment(config)

    assert emit_report(again, "csv") == emit_report(report, "csv")
    assert emit_report(again, "markdown") == emit_report(report, "markdown")


def test_accuracies_on_a_random_walk_stay_near_chance(small_report):
    _, report = small_report
    accuracies = np.array([row.metrics.accuracy for row in report.rows])

    assert 0.38 <= accuracies.mean() <= 0.62
    assert np.all((accuracies >= 0.25) & (accuracies <= 0.75))


def _qa5_grid(source):
    return ExperimentConfig(sources=(source,), reductions=(ReductionSelection.qa5,),
                            qsvm_reductions=(ReductionSelection.qa5,),
                            schemes=(EntanglementScheme.linear, EntanglementScheme.full))


def test_every_model_stays_in_the_chance_band_on_a_random_walk():
    # 94 test rows; [0.38, 0.62] is the 95% binomial interval around 0.5
    in_band = []
    for seed in (1, 2, 4, 5, 8):
        report = run_experiment(_qa5_grid(SourceSpec("synth", "walk", days=504, seed=seed)))
        start, end = report.rows[0].provenance.test_rows
        assert end - start == 94
        assert len(report.failed) == 0
        accuracies = np.array([row.metrics.accuracy for row in report.rows])
        assert 0.38 <= accuracies.mean() <= 0.62
        if np.all((accuracies >= 0.38) & (accuracies <= 0.62)):
            in_band.append(seed)
            break

    assert in_band


def test_planted_momentum_lifts_a_quantum_annealing_model_above_sixty_percent():
    report = run_experiment(_qa5_grid(SourceSpec("synth", "momentum", days=504, seed=3, momentum=0.4)))

    assert len(report.failed) == 0
    assert max(row.metrics.accuracy for row in report.rows) > 0.60


def test_failed_cells_are_recorded(monkeypatch):
    real = harness.train_baseline

    def flaky(kind, X, y, params=None):
        if kind is ModelSelection.knn:
            raise TrainingError("knn needs both classes in the training labels")
        return real(kind, X, y, params)

    monkeypatch.setattr(harness, "train_baseline", flaky)
    config = _config(models=(ModelSelection.logistic_regression, ModelSelection.knn))

    report = run_experiment(config)

    assert [row.failed for row in report.rows] == [False, True]
    assert "both classes" in report.rows[1].error
    assert emit_report(report, "csv").splitlines()[2] == "walk,KNN,-,None,failed,failed"
    assert "| KNN | - | None | failed | failed |" in emit_report(report, "markdown")


def test_failed_reduction_fails_its_cells(monkeypatch):
    def refuse(*args, **kwargs):
        raise CardinalityError("could not select exactly 3 features after 3 escalations")

    monkeypatch.setattr(harness, "select_features", refuse)
    config = _config(reductions=(ReductionSelection.none, ReductionSelection.qa3),
                     models=(ModelSelection.knn, ModelSelection.qsvm), qsvm_reductions=(ReductionSelection.qa3,))

    report = run_experiment(config)

    failed = [(row.model, row.reduction) for row in report.failed]
    assert failed == [(ModelSelection.knn, ReductionSelection.qa3), (ModelSelection.qsvm, ReductionSelection.qa3)]
    assert len(report) == 3


def test_kernel_dump(tmp_path):
    config = _config(reductions=(ReductionSelection.pca3,), models=(ModelSelection.qsvm,),
                     schemes=(EntanglementScheme.full,))

    report = run_experiment(config, dump_kernel_dir=str(tmp_path))

    gram = pd.read_csv(tmp_path / "walk_pca3_full.csv", header=None).to_numpy()
    n_train = report.rows[0].provenance.train_rows[1]
    assert gram.shape == (n_train, n_train)
    np.testing.assert_allclose(np.diag(gram), 1.0, atol=1e-10)


def test_average_of_a_single_row():
    report = EvalReport((_row("HON", ModelSelection.knn, ReductionSelection.qa5, 0.61, 0.6),))

    [average] = summarize_average(report)

    assert (average.family, average.reduction) == (CLASSICAL_FAMILY, ReductionSelection.qa5)
    assert (average.accuracy, average.f_score, average.count) == (0.61, 0.6, 1)


def test_average_pools_datasets_models_and_schemes():
    report = EvalReport((
        _row("HON", ModelSelection.knn, ReductionSelection.qa5, 0.5, 0.4),
        _row("JNJ", ModelSelection.svm, ReductionSelection.qa5, 0.7, 0.6),
        _row("HON", ModelSelection.qsvm, ReductionSelection.pca3, 0.55, 0.5, EntanglementScheme.linear),
        _row("HON", ModelSelection.qsvm, ReductionSelection.pca3, 0.65, 0.7, EntanglementScheme.full),
        _row("HON", ModelSelection.knn, ReductionSelection.none, 0.52, 0.52),
        EvalRow("JNJ", ModelSelection.knn, None, ReductionSelection.none, error="boom"),
    ))

    averages = summarize_average(report)

    assert [(a.family, a.reduction) for a in averages] == [
        (CLASSICAL_FAMILY, ReductionSelection.none),
        (CLASSICAL_FAMILY, ReductionSelection.qa5),
        (QSVM_FAMILY, ReductionSelection.pca3),
    ]
    assert averages[0].count == 1
    assert averages[1].accuracy == pytest.approx(0.6)
    assert averages[1].f_score == pytest.approx(0.5)
    assert averages[2].accuracy == pytest.approx(0.6)
    assert averages[2].count == 2


def test_csv_rendering():
    report = EvalReport((
        _row("HON", ModelSelection.knn, ReductionSelection.pca3, 0.536842, 0.56044),
        _row("HON", ModelSelection.qsvm, ReductionSelection.qa5, 0.610526, 0.645161, EntanglementScheme.linear),
    ))

    lines = emit_report(report, "csv").splitlines()

    assert lines == [
        "dataset,model,entanglement,reduction,accuracy,f_score",
        "HON,KNN,-,PCA-3,0.5368,0.5604",
        "HON,Quantum SVM,Linear,Quantum Annealing-5,0.6105,0.6452",
    ]


def test_markdown_rendering():
    report = EvalReport((
        _row("HON", ModelSelection.knn, ReductionSelection.qa5, 0.6026, 0.6224),
        _row("HON", ModelSelection.qsvm, ReductionSelection.pca8, 0.58, 0.6, EntanglementScheme.circular),
        _row("V", ModelSelection.svm, ReductionSelection.none, 0.5, 0.5),
    ))

    text = emit_report(report, "markdown")

    assert "| " + " | ".join(MARKDOWN_HEADER) + " |" in text
    assert "| Model | Entanglement Scheme | Dimensionality Reduction | Accuracy | F-Score |" in text
    assert text.index("### HON") < text.index("### V") < text.index("### Averages")
    assert "| KNN | - | Quantum Annealing-5 | 60.26% | 62.24% |" in text
    assert "| Quantum SVM * | Circular | PCA-8 | 58.00% | 60.00% |" in text
    assert SIMULATION_FOOTNOTE in text
    assert "| " + " | ".join(AVERAGE_HEADER) + " |" in text
    assert "| Classical Machine Learning | Quantum Annealing-5 | 60.26% | 62.24% |" in text
    assert AVERAGE_NOTE in text


def test_markdown_without_eight_qubit_rows_has_no_footnote():
    report = EvalReport((_row("HON", ModelSelection.qsvm, ReductionSelection.qa5, 0.5, 0.5,
                              EntanglementScheme.full),))

    text = emit_report(report, "markdown", include_averages=False)

    assert SIMULATION_FOOTNOTE not in text
    assert "### Averages" not in text


def test_emit_report_errors():
    with pytest.raises(DatasetError):
        emit_report(EvalReport(()))
    with pytest.raises(ValueError):
        emit_report(EvalReport((_row("HON", ModelSelection.knn, ReductionSelection.none, 0.5, 0.5),)), "html")


def test_csv_round_trip(small_report):
    _, report = small_report
    text = emit_report(report, "csv")

    parsed = parse_report_csv(text)

    assert len(parsed) == len(report)
    for original, again in zip(report.rows, parsed.rows):
        assert (again.dataset, again.model, again.scheme, again.reduction) == \
               (original.dataset, original.model, original.scheme, original.reduction)
        assert again.metrics.accuracy == round(original.metrics.accuracy, 4)
        assert again.metrics.f_score == round(original.metrics.f_score, 4)
        assert np.isnan(again.metrics.precision)
    assert emit_report(parsed, "csv") == text


def test_parse_keeps_failed_rows():
    text = "dataset,model,entanglement,reduction,accuracy,f_score\nHON,KNN,-,None,failed,failed\n"

    report = parse_report_csv(text)

    assert report.rows[0].failed
    assert emit_report(report, "csv") == text


@pytest.mark.parametrize("text, message", [
    ("a,b\n1,2\n", "header"),
    ("dataset,model,entanglement,reduction,accuracy,f_score\nHON,Perceptron,-,None,0.5,0.5\n", "row 1"),
    ("dataset,model,entanglement,reduction,accuracy,f_score\nHON,KNN,-,None,1.5,0.5\n", "outside"),
    ("dataset,model,entanglement,reduction,accuracy,f_score\nHON,KNN,-,None,abc,0.5\n", "not a score"),
])
def test_parse_rejects_bad_reports(text, message):
    with pytest.raises(DatasetError, match=message):
        parse_report_csv(text)


def test_select_best_models():
    report = EvalReport((
        _row("HON", ModelSelection.knn, ReductionSelection.qa5, 0.55, 0.5),
        _row("HON", ModelSelection.svm, ReductionSelection.qa5, 0.60, 0.4),
        _row("HON", ModelSelection.random_forest, ReductionSelection.qa5, 0.60, 0.45),
        _row("HON", ModelSelection.qsvm, ReductionSelection.qa5, 0.58, 0.6, EntanglementScheme.linear),
        _row("HON", ModelSelection.qsvm, ReductionSelection.qa5, 0.59, 0.6, EntanglementScheme.full),
        EvalRow("HON", ModelSelection.qsvm, EntanglementScheme.circular, ReductionSelection.qa5, error="boom"),
    ))

    best = select_best_models(report)

    assert [(row.model, row.scheme) for row in best] == [
        (ModelSelection.random_forest, None),
        (ModelSelection.qsvm, EntanglementScheme.full),
    ]


def test_unseeded_models_ignore_the_config_seed():
    base = _config(models=(ModelSelection.logistic_regression,))

    first = emit_report(run_experiment(base), "csv")
    second = emit_report(run_experiment(replace(base, seed=7)), "csv")

    assert first == second
