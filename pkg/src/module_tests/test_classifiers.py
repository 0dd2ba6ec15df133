from itertools import product
from pathlib import Path
import sys

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src.classifiers import (
    DecisionTreeModel,
    GaussianNbModel,
    GradientBoostingModel,
    KernelDescriptor,
    KnnModel,
    LogisticRegressionModel,
    RandomForestModel,
    SvmModel,
    XgBoostModel,
    decision_function,
    default_gamma,
    dual_objective,
    dual_value,
    predict_baseline,
    predict_svm,
    train_baseline,
    train_svm,
)
from src.helpers.errors import DatasetError, TrainingError
from src.helpers.selection_enum import EntanglementScheme, ModelSelection
from src.quantum_kernel import KernelSpec, kernel_matrix


@pytest.fixture
def blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2.0, 0.5, size=(20, 2)), rng.normal(2.0, 0.5, size=(20, 2))])
    y = np.array([0] * 20 + [1] * 20)
    return X, y


@pytest.fixture
def noisy():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 3))
    y = (X[:, 0] + 0.8 * X[:, 1] + 0.7 * rng.normal(size=60) > 0).astype(int)
    return X, y


def _brute_force_dual(K, y_signed, C):
    """Maximizes the SVM dual by enumerating which points sit at 0, at C or strictly inside."""
    n = y_signed.size
    Q = np.outer(y_signed, y_signed) * K
    best = -np.inf
    for status in product((0, 1, 2), repeat=n):
        status = np.array(status)
        free = np.flatnonzero(status == 2)
        alphas = np.where(status == 1, C, 0.0)
        if free.size:
            bound = np.flatnonzero(status != 2)
            system = np.zeros((free.size + 1, free.size + 1))
            system[:-1, :-1] = Q[np.ix_(free, free)]
            system[:-1, -1] = y_signed[free]
            system[-1, :-1] = y_signed[free]
            rhs = np.append(1.0 - Q[np.ix_(free, bound)] @ alphas[bound], -y_signed[bound] @ alphas[bound])
            try:
                solution = np.linalg.solve(system, rhs)
            except np.linalg.LinAlgError:
                continue
            alphas[free] = solution[:-1]
            if np.any(alphas[free] < -1e-12) or np.any(alphas[free] > C + 1e-12):
                continue
        elif abs(y_signed @ alphas) > 1e-12:
            continue
        best = max(best, dual_value(alphas, y_signed, K))
    return best


def test_svm_one_dimensional_separable():
    X = np.array([[-1.0], [-2.0], [1.0], [2.0]])
    y = np.array([0, 0, 1, 1])

    model = train_svm(X, y, KernelDescriptor("linear"), C=1.0)

    assert predict_svm(model, X).tolist() == [0, 0, 1, 1]
    assert decision_function(model, [[-1.0]])[0] < 0 < decision_function(model, [[1.0]])[0]


def test_svm_xor():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])

    linear = train_svm(X, y, KernelDescriptor("linear"))
    rbf = train_svm(X, y, KernelDescriptor("rbf", gamma=1.0))

    assert np.mean(predict_svm(linear, X) == y) <= 0.75
    assert predict_svm(rbf, X).tolist() == y.tolist()


def test_svm_reproduces_separable_training_labels(blobs):
    X, y = blobs

    model = train_svm(X, y, KernelDescriptor("rbf"))

    assert predict_svm(model, X).tolist() == y.tolist()
    assert model.kernel.gamma == default_gamma(X)


def test_svm_dual_beats_random_feasible_points():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(12, 2))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    y_signed = np.where(y == 1, 1.0, -1.0)
    K = KernelDescriptor("rbf", gamma=0.5).gram(X, X)
    C = 1.0

    model = train_svm(K, y, C=C)

    value = dual_objective(model, K)
    for _ in range(10_000):
        alphas = rng.uniform(0.0, C, size=12)
        positive, negative = alphas[y_signed > 0].sum(), alphas[y_signed < 0].sum()
        if positive > negative:
            alphas[y_signed > 0] *= negative / positive
        else:
            alphas[y_signed < 0] *= positive / negative
        assert value >= dual_value(alphas, y_signed, K) - 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_svm_dual_matches_brute_force(seed):
    rng = np.random.default_rng(10 + seed)
    X = rng.normal(size=(7, 2))
    y = np.array([0, 1, 0, 1, 1, 0, 1])
    y_signed = np.where(y == 1, 1.0, -1.0)
    K = KernelDescriptor("rbf", gamma=0.7).gram(X, X)

    model = train_svm(K, y, C=1.0, tol=1e-9)

    assert abs(dual_objective(model, K) - _brute_force_dual(K, y_signed, 1.0)) < 1e-6


def test_svm_dual_constraints_hold(noisy):
    X, y = noisy
    C = 0.5

    model = train_svm(X, y, KernelDescriptor("rbf"), C=C)

    assert np.all(model.alphas >= 0.0) and np.all(model.alphas <= C)
    assert abs(model.alphas @ model.y_signed) < 1e-6
    assert model.support.size > 0


def test_precomputed_linear_gram_matches_linear_kernel(noisy):
    X, y = noisy
    X_train, X_test = X[:45], X[45:]

    precomputed = train_svm(X_train @ X_train.T, y[:45])
    linear = train_svm(X_train, y[:45], KernelDescriptor("linear"))

    assert predict_svm(precomputed, X_test @ X_train.T).tolist() == predict_svm(linear, X_test).tolist()


def test_quantum_gram_labels_do_not_depend_on_parallelism():
    rng = np.random.default_rng(3)
    train = rng.uniform(0.0, np.pi, size=(20, 3))
    test = rng.uniform(0.0, np.pi, size=(10, 3))
    y = (train[:, 0] > np.pi / 2).astype(int)
    spec = KernelSpec(3, 2, EntanglementScheme.full)

    labels = []
    for jobs in (1, 4):
        model = train_svm(kernel_matrix(train, spec=spec, n_jobs=jobs).entries, y)
        labels.append(predict_svm(model, kernel_matrix(test, train, spec=spec, n_jobs=jobs).entries).tolist())

    assert labels[0] == labels[1]


def test_zero_kernel_row_follows_bias_sign():
    model = SvmModel(np.array([0.5, 0.5]), -0.2, np.array([1.0, -1.0]), KernelDescriptor(), 1.0)
    tied = SvmModel(np.array([0.5, 0.5]), 0.0, np.array([1.0, -1.0]), KernelDescriptor(), 1.0)

    assert predict_svm(model, np.zeros((1, 2))).tolist() == [0]
    assert predict_svm(tied, np.zeros((1, 2))).tolist() == [0]


def test_svm_rejects_bad_inputs():
    with pytest.raises(TrainingError):
        train_svm(np.array([[1.0, 0.5], [0.2, 1.0]]), [0, 1])
    with pytest.raises(TrainingError):
        train_svm(np.ones((2, 3)), [0, 1])
    with pytest.raises(TrainingError):
        train_svm(np.eye(3), [1, 1, 1])
    with pytest.raises(ValueError):
        train_svm(np.eye(2), [0, 1], C=0.0)


def test_svm_prediction_shape_mismatch():
    model = train_svm(np.eye(4), [0, 1, 0, 1])

    with pytest.raises(DatasetError):
        predict_svm(model, np.zeros((2, 3)))


def test_logistic_regression_separable(blobs):
    X, y = blobs

    model = train_baseline(ModelSelection.logistic_regression, X, y)

    assert predict_baseline(model, X).tolist() == y.tolist()
    losses = np.array(model.loss_history)
    assert len(losses) == model.epochs + 1
    assert np.all(np.diff(losses) <= 1e-12)


def test_knn_majority():
    X = np.array([[0.0], [0.1], [0.2], [0.3], [0.4], [5.0], [6.0]])
    y = np.array([1, 1, 1, 1, 1, 0, 0])

    model = train_baseline(ModelSelection.knn, X, y, {"k": 5})

    assert predict_baseline(model, [[0.25]]).tolist() == [1]


def test_knn_equidistant_neighbours_prefer_lower_index():
    X = np.array([[1.0], [-1.0], [2.0]])

    model = KnnModel(k=1).fit(X, [1, 0, 0])

    assert model.predict([[0.0]]).tolist() == [1]


def test_knn_tie_on_fractional_coordinates_prefers_lower_index():
    model = KnnModel(k=1).fit(np.array([[0.77, -0.03], [-0.51, -0.23]]), [0, 1])

    assert model.predict([[0.13, -0.13]]).tolist() == [0]


def test_knn_even_vote_goes_to_zero():
    model = KnnModel(k=2).fit(np.array([[1.0], [-1.0], [4.0]]), [1, 0, 1])

    assert model.predict([[0.0]]).tolist() == [0]


def test_knn_rejects_too_few_rows():
    with pytest.raises(ValueError):
        KnnModel(k=5).fit(np.zeros((3, 1)), [0, 1, 0])


def test_unlimited_tree_fits_training_data(noisy):
    X, y = noisy
    assert np.unique(X, axis=0).shape[0] == X.shape[0]

    model = train_baseline(ModelSelection.decision_tree, X, y, {"max_depth": None})

    assert predict_baseline(model, X).tolist() == y.tolist()


def test_gaussian_nb_midpoint_tie_goes_to_zero():
    X = np.array([[-1.0], [-3.0], [1.0], [3.0]])
    model = GaussianNbModel().fit(X, [0, 0, 1, 1])

    assert model.predict([[0.0], [0.1], [-0.1]]).tolist() == [0, 1, 0]


def test_single_tree_forest_equals_decision_tree(noisy):
    X, y = noisy

    forest = RandomForestModel(n_trees=1, max_depth=4, bootstrap=False, max_features=None, seed=3).fit(X, y)
    tree = DecisionTreeModel(max_depth=4).fit(X, y)

    grid = np.random.default_rng(4).normal(size=(50, 3))
    assert forest.predict(grid).tolist() == tree.predict(grid).tolist()


def test_forest_is_deterministic_given_seed(noisy):
    X, y = noisy

    first = RandomForestModel(n_trees=15, seed=9).fit(X, y).predict(X)
    second = RandomForestModel(n_trees=15, seed=9).fit(X, y).predict(X)

    assert first.tolist() == second.tolist()


@pytest.mark.parametrize("labels, expected", [([1, 1, 1, 0, 0], 1), ([1, 0, 1, 0, 0], 0)])
def test_zero_round_boosting_predicts_majority(labels, expected):
    X = np.arange(5, dtype=float)[:, None]

    model = GradientBoostingModel(rounds=0).fit(X, labels)

    assert model.predict(X).tolist() == [expected] * 5


def test_boosting_improves_training_fit(noisy):
    X, y = noisy

    model = GradientBoostingModel(rounds=50).fit(X, y)

    assert np.mean(model.predict(X) == y) > 0.9


def test_xgboost_rows_match_gradient_boosting(noisy):
    X, y = noisy

    boosted = train_baseline(ModelSelection.gradient_boosting, X, y)
    xgb = train_baseline(ModelSelection.xgboost, X, y)

    assert isinstance(xgb, XgBoostModel)
    assert xgb.predict(X).tolist() == boosted.predict(X).tolist()


@pytest.mark.parametrize("kind", [ModelSelection.logistic_regression, ModelSelection.knn,
                                  ModelSelection.gaussian_nb, ModelSelection.decision_tree])
def test_row_order_does_not_matter(noisy, kind):
    X, y = noisy
    order = np.random.default_rng(5).permutation(len(y))
    grid = np.random.default_rng(6).normal(size=(40, 3))

    original = train_baseline(kind, X, y)
    permuted = train_baseline(kind, X[order], y[order])

    assert original.predict(grid).tolist() == permuted.predict(grid).tolist()


@pytest.mark.parametrize("kind", [ModelSelection.logistic_regression, ModelSelection.gaussian_nb,
                                  ModelSelection.gradient_boosting])
def test_single_class_rejected(kind):
    with pytest.raises(TrainingError):
        train_baseline(kind, np.zeros((4, 2)), [1, 1, 1, 1])


@pytest.mark.parametrize("kind", list(ModelSelection))
def test_baseline_predictions_are_binary(noisy, kind):
    if kind in (ModelSelection.svm, ModelSelection.qsvm):
        with pytest.raises(ValueError):
            train_baseline(kind, *noisy)
        return
    X, y = noisy

    predictions = train_baseline(kind, X, y).predict(X)

    assert set(predictions.tolist()) <= {0, 1}


def test_baseline_errors():
    with pytest.raises(TrainingError):
        LogisticRegressionModel().predict([[0.0]])
    with pytest.raises(ValueError):
        RandomForestModel(n_trees=0)
    model = KnnModel(k=1).fit(np.zeros((2, 2)), [0, 1])
    with pytest.raises(DatasetError):
        model.predict(np.zeros((1, 3)))
