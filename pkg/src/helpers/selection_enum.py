from enum import Enum
from typing import Optional


class ReductionSelection(str, Enum):
    none = "None"
    pca3 = "PCA-3"
    pca5 = "PCA-5"
    pca8 = "PCA-8"
    qa3 = "Quantum Annealing-3"
    qa5 = "Quantum Annealing-5"
    qa8 = "Quantum Annealing-8"

    @property
    def method(self) -> Optional[str]:
        if self is ReductionSelection.none:
            return None
        return self.name[:-1]

    @property
    def k(self) -> Optional[int]:
        if self is ReductionSelection.none:
            return None
        return int(self.name[-1])


class ModelSelection(str, Enum):
    svm = "SVM"
    logistic_regression = "Logistic Regression"
    knn = "KNN"
    gaussian_nb = "Naive Bayes"
    decision_tree = "Decision Tree"
    random_forest = "Random Forest"
    gradient_boosting = "Gradient Boosting"
    xgboost = "XG Boost"
    qsvm = "Quantum SVM"

    @property
    def is_quantum(self) -> bool:
        return self is ModelSelection.qsvm


CLASSICAL_MODELS = tuple(m for m in ModelSelection if not m.is_quantum)


class EntanglementScheme(str, Enum):
    linear = "Linear"
    circular = "Circular"
    full = "Full"
    pairwise = "Pairwise"


class QuboSolverSelection(str, Enum):
    exhaustive = "Exhaustive"
    annealer = "Annealer"


class ScalerKind(str, Enum):
    standardize = "Standardize"
    minmax_to_angle = "MinMax to angle"


def parse_selection(enum_cls, token: str):
    """Looks an enum member up by its machine name, case-insensitively."""
    key = token.strip().lower()
    for member in enum_cls:
        if member.name == key:
            return member
    choices = ", ".join(member.name for member in enum_cls)
    raise ValueError(f"Unknown {enum_cls.__name__} '{token}', expected one of: {choices}")
