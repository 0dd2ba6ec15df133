"""
QUBO feature selection
----------------------

Minimize Q(x) = sum_{i <= j} q_ij x_i x_j over binary x, with q upper triangular
(q_ii are linear terms since x_i^2 = x_i).

Feature-selection QUBO for k features out of n:
    q_ii = -alpha * |pearson(feature_i, y)|                      relevance
    q_ij = (1 - alpha) * |pearson(feature_i, feature_j)|, i < j   redundancy
    + lambda * (sum_i x_i - k)^2 expanded into linear/quadratic terms, with
      lambda = 2 * (sum |q_ii| + sum |q_ij|) + 1

QUBO TEXT FORMAT:
-----------------
n
i j weight        one line per nonzero term, i <= j, sorted by (i, j), 17 significant digits
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.helpers.constants import (
    ANNEAL_RESTARTS,
    ANNEAL_SWEEPS,
    ANNEAL_T_COLD,
    ANNEAL_T_HOT_FACTOR,
    EXHAUSTIVE_MAX_VARIABLES,
    PENALTY_ESCALATIONS,
    QUBO_ALPHA,
)
from src.helpers.errors import CardinalityError, QuboError
from src.helpers.selection_enum import QuboSolverSelection
from src.indicators import Dataset

logger = logging.getLogger(__name__)

EXHAUSTIVE_CHUNK = 1 << 16


@dataclass(frozen=True)
class QuboProblem:
    n: int
    coefficients: Dict[Tuple[int, int], float]
    feature_names: Tuple[str, ...] = ()
    cardinality: Optional[int] = None
    penalty: Optional[float] = None
    offset: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise QuboError(f"a QUBO needs at least one variable, got n={self.n}")
        clean = {}
        for (i, j), weight in self.coefficients.items():
            if not (0 <= i <= j < self.n):
                raise QuboError(f"term ({i}, {j}) is not upper triangular within n={self.n}")
            if not np.isfinite(weight):
                raise QuboError(f"term ({i}, {j}) has non-finite weight {weight}")
            clean[(int(i), int(j))] = float(weight)
        object.__setattr__(self, "coefficients", clean)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def upper_matrix(self) -> np.ndarray:
        U = np.zeros((self.n, self.n))
        for (i, j), weight in self.coefficients.items():
            U[i, j] = weight
        return U

    def max_abs_weight(self) -> float:
        return max((abs(w) for w in self.coefficients.values()), default=0.0)


@dataclass(frozen=True)
class QuboSolution:
    assignment: np.ndarray
    objective: float
    solver: QuboSolverSelection
    feasible: bool = True
    restarts_objectives: List[float] = field(default_factory=list)

    @property
    def selected(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(self.assignment)]


def _as_binary(qubo: QuboProblem, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != qubo.n:
        raise QuboError(f"assignment length {x.shape[0] if x.ndim == 1 else x.shape} does not match n={qubo.n}")
    if not np.all((x == 0) | (x == 1)):
        raise QuboError("assignment entries must be 0 or 1")
    return x.astype(np.int8)


def evaluate(qubo: QuboProblem, x) -> float:
    x = _as_binary(qubo, x)
    return float(sum(weight * x[i] * x[j] for (i, j), weight in qubo.coefficients.items()))


def _is_feasible(qubo: QuboProblem, x: np.ndarray) -> bool:
    return qubo.cardinality is None or int(x.sum()) == qubo.cardinality


def _abs_correlations(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """|Pearson| of each column with y and between columns; zero-variance columns correlate 0."""
    columns = np.column_stack([X, y.astype(float)])
    centred = columns - columns.mean(axis=0)
    norms = np.sqrt(np.sum(centred ** 2, axis=0))
    flat = norms == 0.0
    unit = np.where(flat, 0.0, centred / np.where(flat, 1.0, norms))
    corr = np.clip(np.abs(unit.T @ unit), 0.0, 1.0)
    n = X.shape[1]
    return corr[:n, n], corr[:n, :n]


def build_feature_qubo(train: Dataset, k: int, alpha: float = QUBO_ALPHA,
                       penalty_scale: float = 1.0) -> QuboProblem:
    n = train.n_features
    if not 1 <= k <= n:
        raise QuboError(f"k must lie in [1, {n}], got {k}")
    if not 0.0 <= alpha <= 1.0:
        raise QuboError(f"alpha must lie in [0, 1], got {alpha}")
    if len(train) < 3:
        raise QuboError(f"need at least 3 training rows, got {len(train)}")

    relevance, redundancy = _abs_correlations(train.X, train.y)
    linear = -alpha * relevance
    quadratic = {(i, j): (1.0 - alpha) * redundancy[i, j] for i in range(n) for j in range(i + 1, n)}

    spread = float(np.sum(np.abs(linear)) + sum(abs(w) for w in quadratic.values()))
    penalty = (2.0 * spread + 1.0) * penalty_scale

    coefficients = {}
    for i in range(n):
        coefficients[(i, i)] = linear[i] + penalty * (1 - 2 * k)
    for (i, j), weight in quadratic.items():
        coefficients[(i, j)] = weight + 2.0 * penalty
    return QuboProblem(n, coefficients, train.feature_names, cardinality=k,
                       penalty=penalty, offset=penalty * k * k)


def _assignment_bits(indices: np.ndarray, n: int) -> np.ndarray:
    # x_0 is the most significant bit, so increasing index == lexicographic order
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts) & 1).astype(np.int8)


def solve_exhaustive(qubo: QuboProblem) -> QuboSolution:
    n = qubo.n
    if n > EXHAUSTIVE_MAX_VARIABLES:
        raise QuboError(f"exhaustive search supports n <= {EXHAUSTIVE_MAX_VARIABLES}, got n={n}")
    U = qubo.upper_matrix()
    total = 1 << n

    def energies(start: int):
        bits = _assignment_bits(np.arange(start, min(start + EXHAUSTIVE_CHUNK, total), dtype=np.int64), n)
        return bits, np.einsum("ri,ij,rj->r", bits, U, bits, optimize=True)

    best = np.inf
    for start in range(0, total, EXHAUSTIVE_CHUNK):
        best = min(best, float(energies(start)[1].min()))

    # ties within rounding noise go to the lexicographically smallest assignment
    tie = 1e-12 * max(1.0, abs(best), qubo.max_abs_weight())
    for start in range(0, total, EXHAUSTIVE_CHUNK):
        bits, values = energies(start)
        hits = np.flatnonzero(values <= best + tie)
        if hits.size:
            x = bits[hits[0]]
            break

    solution = QuboSolution(x, evaluate(qubo, x), QuboSolverSelection.exhaustive, _is_feasible(qubo, x))
    logger.debug("Exhaustive search over %d assignments: objective %.6g", total, solution.objective)
    return solution


def _temperatures(t_hot: float, t_cold: float, sweeps: int) -> np.ndarray:
    if sweeps == 1:
        return np.array([t_cold])
    return t_hot * (t_cold / t_hot) ** (np.arange(sweeps) / (sweeps - 1))


def solve_annealer(qubo: QuboProblem, sweeps: int = ANNEAL_SWEEPS, restarts: int = ANNEAL_RESTARTS,
                   t_hot: Optional[float] = None, t_cold: float = ANNEAL_T_COLD,
                   seed: int = 0) -> QuboSolution:
    """
    Simulated annealing with Metropolis single-bit flips and a geometric schedule.

    Restart r draws every random number from its own generator seeded by (seed, r), so its
    trajectory does not depend on how many restarts run. Restarts advance together as rows
    of one matrix. QUBOs carrying a cardinality constraint also get one pair-swap proposal
    per bit and sweep, which keeps k-subsets connected below the penalty temperature.
    """
    if t_hot is None:
        t_hot = ANNEAL_T_HOT_FACTOR * max(qubo.max_abs_weight(), 1e-12)
    if not (t_hot > t_cold > 0):
        raise QuboError(f"invalid schedule: need t_hot > t_cold > 0, got t_hot={t_hot}, t_cold={t_cold}")
    if sweeps < 1 or restarts < 1:
        raise QuboError(f"sweeps and restarts must be >= 1, got sweeps={sweeps}, restarts={restarts}")

    n = qubo.n
    U = qubo.upper_matrix()
    linear = np.diag(U).copy()
    couplings = U + U.T
    np.fill_diagonal(couplings, 0.0)
    with_swaps = qubo.cardinality is not None and n > 1

    x = np.empty((restarts, n), dtype=np.int8)
    flip_draws = np.empty((restarts, sweeps, n))
    swap_pairs = np.zeros((restarts, sweeps, n, 2), dtype=np.int64)
    swap_draws = np.zeros((restarts, sweeps, n))
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x[r] = rng.integers(0, 2, size=n)
        flip_draws[r] = rng.random((sweeps, n))
        if with_swaps:
            swap_pairs[r] = rng.integers(0, n, size=(sweeps, n, 2))
            swap_draws[r] = rng.random((sweeps, n))

    rows = np.arange(restarts)
    field_ = x @ couplings
    energy = x @ linear + 0.5 * np.einsum("ri,ri->r", x, field_)
    best_energy = energy.copy()
    best_x = x.copy()

    def keep_best():
        improved = energy < best_energy
        if improved.any():
            best_energy[improved] = energy[improved]
            best_x[improved] = x[improved]

    for sweep, temperature in enumerate(_temperatures(t_hot, t_cold, sweeps)):
        for i in range(n):
            step = 1 - 2 * x[:, i]
            delta = step * (linear[i] + field_[:, i])
            accept = (delta <= 0) | (flip_draws[:, sweep, i] < np.exp(np.minimum(-delta / temperature, 0.0)))
            if accept.any():
                moved = np.where(accept, step, 0)
                x[:, i] += moved.astype(np.int8)
                field_ += np.outer(moved, couplings[i])
                energy += np.where(accept, delta, 0.0)
                keep_best()

            if with_swaps:
                a, b = swap_pairs[:, sweep, i, 0], swap_pairs[:, sweep, i, 1]
                x_a, x_b = x[rows, a], x[rows, b]
                step_a, step_b = 1 - 2 * x_a, 1 - 2 * x_b
                delta = (step_a * (linear[a] + field_[rows, a]) + step_b * (linear[b] + field_[rows, b])
                         + couplings[a, b] * step_a * step_b)
                accept = (x_a != x_b) & (
                    (delta <= 0) | (swap_draws[:, sweep, i] < np.exp(np.minimum(-delta / temperature, 0.0))))
                if accept.any():
                    move_a = np.where(accept, step_a, 0)
                    move_b = np.where(accept, step_b, 0)
                    x[rows, a] += move_a.astype(np.int8)
                    x[rows, b] += move_b.astype(np.int8)
                    field_ += move_a[:, None] * couplings[a] + move_b[:, None] * couplings[b]
                    energy += np.where(accept, delta, 0.0)
                    keep_best()

    candidates = [(evaluate(qubo, best_x[r]), tuple(int(v) for v in best_x[r])) for r in range(restarts)]
    objective, assignment = min(candidates)
    x_best = np.array(assignment, dtype=np.int8)
    logger.debug("Annealer best objective %.6g over %d restarts", objective, restarts)
    return QuboSolution(x_best, objective, QuboSolverSelection.annealer, _is_feasible(qubo, x_best),
                        [c[0] for c in candidates])


def solve(qubo: QuboProblem, solver: QuboSolverSelection, sweeps: int = ANNEAL_SWEEPS,
          restarts: int = ANNEAL_RESTARTS, seed: int = 0) -> QuboSolution:
    if solver is QuboSolverSelection.exhaustive:
        return solve_exhaustive(qubo)
    return solve_annealer(qubo, sweeps=sweeps, restarts=restarts, seed=seed)


def select_features(train: Dataset, k: int, solver: QuboSolverSelection = QuboSolverSelection.annealer,
                    alpha: float = QUBO_ALPHA, sweeps: int = ANNEAL_SWEEPS, restarts: int = ANNEAL_RESTARTS,
                    seed: int = 0) -> Tuple[List[int], QuboSolution, QuboProblem]:
    """
    Builds and solves the feature-selection QUBO. A solution with the wrong number of
    features doubles the penalty and re-solves, at most PENALTY_ESCALATIONS times.
    """
    scale = 1.0
    for attempt in range(PENALTY_ESCALATIONS + 1):
        qubo = build_feature_qubo(train, k, alpha, penalty_scale=scale)
        solution = solve(qubo, solver, sweeps=sweeps, restarts=restarts, seed=seed)
        if solution.feasible:
            selected = solution.selected
            logger.info("Selected features %s with objective %.6g",
                        [train.feature_names[i] for i in selected], solution.objective)
            return selected, solution, qubo
        logger.warning("Solver returned %d features instead of %d, doubling the penalty (attempt %d)",
                       int(solution.assignment.sum()), k, attempt + 1)
        scale *= 2.0
    raise CardinalityError(f"could not select exactly {k} features after {PENALTY_ESCALATIONS} escalations")


def serialize_qubo(qubo: QuboProblem) -> str:
    lines = [str(qubo.n)]
    for (i, j) in sorted(qubo.coefficients):
        weight = qubo.coefficients[(i, j)]
        if weight != 0.0:
            lines.append(f"{i} {j} {format(weight, '.17g')}")
    return "\n".join(lines) + "\n"


def parse_qubo(text: str) -> QuboProblem:
    """
    Inverse of serialize_qubo on the variable count and the nonzero coefficients. The text
    format has no room for feature names, cardinality or penalty, so those come back empty.
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise QuboError("empty QUBO text")
    try:
        n = int(lines[0])
    except ValueError:
        raise QuboError(f"first line must be the variable count, got '{lines[0]}'") from None
    coefficients = {}
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 3:
            raise QuboError(f"expected 'i j weight' at line {number}, got '{line}'")
        try:
            i, j, weight = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise QuboError(f"malformed term at line {number}: '{line}'") from None
        coefficients[(i, j)] = weight
    return QuboProblem(n, coefficients)
