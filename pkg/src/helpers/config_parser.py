"""
Experiment config files: flat `key = value` lines, `#` starts a comment, list values are
comma-separated.

Example:
    # two synthetic datasets, QA-5 and PCA-3 only
    sources = synth:walk:504:7, synth:trend:504:11:0.3
    reductions = pca3, qa5
    models = knn, logistic_regression, qsvm
    schemes = linear, full
    seed = 42

Sources:
    csv:<path>                                  dataset name = file stem
    synth:<name>:<days>:<seed>[:<momentum>]
    fetch:<symbol>:<start YYYY-MM-DD>:<end YYYY-MM-DD>
"""

import os
from dataclasses import dataclass
from datetime import date, datetime
from typing import Optional, Tuple

from src.helpers.constants import (
    ANNEAL_RESTARTS,
    ANNEAL_SWEEPS,
    DATE_FORMAT,
    DEFAULT_REPS,
    DEFAULT_SEED,
    DEFAULT_TEST_FRACTION,
    ENDPOINT_ENV_VAR,
    QUBO_ALPHA,
    SVM_C,
)
from src.helpers.errors import ConfigError
from src.helpers.selection_enum import (
    EntanglementScheme,
    ModelSelection,
    QuboSolverSelection,
    ReductionSelection,
    parse_selection,
)


@dataclass(frozen=True)
class SourceSpec:
    kind: str  # "csv", "synth" or "fetch"
    name: str
    path: Optional[str] = None
    days: int = 0
    seed: int = 0
    momentum: float = 0.0
    start: Optional[date] = None
    end: Optional[date] = None


@dataclass(frozen=True)
class ExperimentConfig:
    sources: Tuple[SourceSpec, ...]
    reductions: Tuple[ReductionSelection, ...] = tuple(ReductionSelection)
    models: Tuple[ModelSelection, ...] = tuple(ModelSelection)
    qsvm_reductions: Optional[Tuple[ReductionSelection, ...]] = None
    schemes: Tuple[EntanglementScheme, ...] = tuple(EntanglementScheme)
    reps: int = DEFAULT_REPS
    test_fraction: float = DEFAULT_TEST_FRACTION
    seed: int = DEFAULT_SEED
    qubo_solver: QuboSolverSelection = QuboSolverSelection.annealer
    qubo_alpha: float = QUBO_ALPHA
    anneal_sweeps: int = ANNEAL_SWEEPS
    anneal_restarts: int = ANNEAL_RESTARTS
    svm_c: float = SVM_C
    endpoint: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if not self.sources:
            raise ConfigError("config needs at least one source")
        names = [source.name for source in self.sources]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ConfigError(f"duplicate dataset names: {', '.join(duplicates)}")
        if not self.reductions or not self.models:
            raise ConfigError("config needs at least one reduction and one model")
        if ModelSelection.qsvm in self.models and not self.schemes:
            raise ConfigError("qsvm needs at least one entanglement scheme")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        if not 0 <= self.qubo_alpha <= 1:
            raise ConfigError(f"qubo_alpha must lie in [0, 1], got {self.qubo_alpha}")
        if self.anneal_sweeps < 1 or self.anneal_restarts < 1:
            raise ConfigError("anneal_sweeps and anneal_restarts must be >= 1")
        if self.svm_c <= 0:
            raise ConfigError(f"svm_c must be positive, got {self.svm_c}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")

    @property
    def quantum_reductions(self) -> Tuple[ReductionSelection, ...]:
        return self.reductions if self.qsvm_reductions is None else self.qsvm_reductions


def _parse_date(text: str, key: str) -> date:
    try:
        return datetime.strptime(text, DATE_FORMAT).date()
    except ValueError:
        raise ConfigError(f"{key}: '{text}' is not a YYYY-MM-DD date") from None


def _parse_int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: '{text}' is not an integer") from None


def _parse_float(text: str, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: '{text}' is not a number") from None


def parse_source(token: str, base_dir: str = "") -> SourceSpec:
    kind, _, rest = token.strip().partition(":")
    kind = kind.lower()
    if kind == "csv":
        if not rest:
            raise ConfigError(f"source '{token}' has no path")
        path = rest if os.path.isabs(rest) else os.path.join(base_dir, rest)
        return SourceSpec("csv", os.path.splitext(os.path.basename(rest))[0], path=path)

    parts = rest.split(":")
    if kind == "synth":
        if len(parts) not in (3, 4) or not parts[0]:
            raise ConfigError(f"source '{token}' must look like synth:<name>:<days>:<seed>[:<momentum>]")
        momentum = _parse_float(parts[3], "sources") if len(parts) == 4 else 0.0
        return SourceSpec("synth", parts[0], days=_parse_int(parts[1], "sources"),
                          seed=_parse_int(parts[2], "sources"), momentum=momentum)
    if kind == "fetch":
        if len(parts) != 3 or not parts[0]:
            raise ConfigError(f"source '{token}' must look like fetch:<symbol>:<start>:<end>")
        return SourceSpec("fetch", parts[0].upper(), start=_parse_date(parts[1], "sources"),
                          end=_parse_date(parts[2], "sources"))
    raise ConfigError(f"source '{token}' has unknown kind '{kind}', expected csv, synth or fetch")


def _selections(enum_cls, value: str, key: str) -> tuple:
    try:
        return tuple(parse_selection(enum_cls, token) for token in value.split(",") if token.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config_text(text: str, base_dir: str = "") -> ExperimentConfig:
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {number}: expected 'key = value', got '{raw.strip()}'")
        if key in values:
            raise ConfigError(f"line {number}: key '{key}' given twice")
        values[key] = value

    unknown = sorted(set(values) - _KEYS)
    if unknown:
        raise ConfigError(f"unknown config key '{unknown[0]}'")
    if "sources" not in values:
        raise ConfigError("config needs a 'sources' key")

    kwargs = {"sources": tuple(parse_source(token, base_dir) for token in values["sources"].split(",")
                               if token.strip())}
    for key, enum_cls in (("reductions", ReductionSelection), ("models", ModelSelection),
                          ("qsvm_reductions", ReductionSelection), ("schemes", EntanglementScheme)):
        if key in values:
            kwargs[key] = _selections(enum_cls, values[key], key)
    for key in ("reps", "seed", "anneal_sweeps", "anneal_restarts", "jobs"):
        if key in values:
            kwargs[key] = _parse_int(values[key], key)
    for key in ("test_fraction", "qubo_alpha", "svm_c"):
        if key in values:
            kwargs[key] = _parse_float(values[key], key)
    if "qubo_solver" in values:
        solvers = _selections(QuboSolverSelection, values["qubo_solver"], "qubo_solver")
        if len(solvers) != 1:
            raise ConfigError("qubo_solver takes exactly one of: exhaustive, annealer")
        kwargs["qubo_solver"] = solvers[0]
    kwargs["endpoint"] = values.get("endpoint") or os.environ.get(ENDPOINT_ENV_VAR) or None
    return ExperimentConfig(**kwargs)


_KEYS = {
    "sources", "reductions", "models", "qsvm_reductions", "schemes", "reps", "test_fraction", "seed",
    "qubo_solver", "qubo_alpha", "anneal_sweeps", "anneal_restarts", "svm_c", "endpoint", "jobs",
}


def parse_config(config_path: str) -> ExperimentConfig:
    if not os.path.exists(config_path):
        raise ConfigError(f"config file {config_path} does not exist")
    with open(config_path, mode="r", encoding="utf-8") as conf_buffer:
        text = conf_buffer.read()
    return parse_config_text(text, os.path.dirname(os.path.abspath(config_path)))
