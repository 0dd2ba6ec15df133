"""
ZZ feature map statevector simulation and quantum kernel Gram matrices.

Amplitude ordering: qubit 0 is the least-significant bit of the basis-state index.

One repetition of the feature map applies
    H on every qubit,
    P(2 x_i) on every qubit i,
    CX(i, j) P(2 (pi - x_i)(pi - x_j)) on j CX(i, j) for every entangling pair (i, j).
Every gate after the Hadamard layer is diagonal in the computational basis, so a repetition
is H^n followed by one diagonal phase: basis state b picks up
    sum_i 2 x_i b_i + sum_(i,j) 2 (pi - x_i)(pi - x_j) (b_i XOR b_j).
Pair phases are accumulated over the sorted pair set, which makes the state depend only
on which pairs are entangled, never on their layer order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.helpers.constants import DEFAULT_REPS, MAX_QUBITS
from src.helpers.errors import KernelError
from src.helpers.selection_enum import EntanglementScheme

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KernelSpec:
    n_qubits: int
    reps: int = DEFAULT_REPS
    scheme: EntanglementScheme = EntanglementScheme.linear

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise KernelError(f"n_qubits must lie in [1, {MAX_QUBITS}], got {self.n_qubits}")
        if self.reps < 1:
            raise KernelError(f"reps must be >= 1, got {self.reps}")


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    row_points: np.ndarray
    col_points: np.ndarray

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape


def entanglement_pairs(n: int, scheme: EntanglementScheme) -> List[List[Tuple[int, int]]]:
    if n < 1:
        raise KernelError(f"n must be >= 1, got {n}")
    if n == 1:
        return []
    linear = [(i, i + 1) for i in range(n - 1)]
    if scheme is EntanglementScheme.linear:
        return [linear]
    if scheme is EntanglementScheme.circular:
        return [linear + [(n - 1, 0)]] if n >= 3 else [linear]
    if scheme is EntanglementScheme.full:
        return [[(i, j) for i in range(n) for j in range(i + 1, n)]]
    even = [(i, i + 1) for i in range(0, n - 1, 2)]
    odd = [(i, i + 1) for i in range(1, n - 1, 2)]
    return [layer for layer in (even, odd) if layer]


def _pair_set(n: int, scheme: EntanglementScheme) -> List[Tuple[int, int]]:
    return sorted({(min(i, j), max(i, j)) for layer in entanglement_pairs(n, scheme) for (i, j) in layer})


def _basis_bits(n: int) -> np.ndarray:
    return ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)


def _hadamard_all(states: np.ndarray, n: int) -> np.ndarray:
    """Applies H to every qubit of a batch of statevectors, shape (m, 2**n)."""
    m = states.shape[0]
    out = states
    for q in range(n):
        view = out.reshape(m, 1 << (n - q - 1), 2, 1 << q)
        zero, one = view[:, :, 0, :], view[:, :, 1, :]
        out = np.stack(((zero + one), (zero - one)), axis=2).reshape(m, 1 << n) / math.sqrt(2.0)
    return out


def _phases(points: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Diagonal phase of one repetition for every point, shape (m, 2**n)."""
    n = spec.n_qubits
    bits = _basis_bits(n)
    phase = np.zeros((points.shape[0], 1 << n))
    for i in range(n):
        phase += np.outer(2.0 * points[:, i], bits[:, i])
    for i, j in _pair_set(n, spec.scheme):
        parity = np.logical_xor(bits[:, i], bits[:, j]).astype(float)
        phase += np.outer(2.0 * (np.pi - points[:, i]) * (np.pi - points[:, j]), parity)
    return phase


def _as_points(points, spec: KernelSpec) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != spec.n_qubits:
        raise KernelError(f"points have {points.shape[1]} features, feature map expects {spec.n_qubits}")
    return points


def feature_map_states(points, spec: KernelSpec) -> np.ndarray:
    """Statevectors of a batch of points; row r is the state of points[r]."""
    points = _as_points(points, spec)
    n = spec.n_qubits
    states = np.zeros((points.shape[0], 1 << n), dtype=complex)
    states[:, 0] = 1.0
    diagonal = np.exp(1j * _phases(points, spec))
    for _ in range(spec.reps):
        states = _hadamard_all(states, n) * diagonal
    return states / np.linalg.norm(states, axis=1, keepdims=True)


def feature_map_state(x, spec: KernelSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != spec.n_qubits:
        raise KernelError(f"expected a vector of {spec.n_qubits} angles, got shape {x.shape}")
    return feature_map_states(x[None, :], spec)[0]


def kernel_entry(x, z, spec: KernelSpec) -> float:
    state_x = feature_map_state(x, spec)
    state_z = feature_map_state(z, spec)
    return float(abs(np.vdot(state_z, state_x)) ** 2)


def _overlap_rows(row_states: np.ndarray, col_states: np.ndarray, rows: range, symmetric: bool) -> List[np.ndarray]:
    out = []
    conjugated = col_states.conj()
    for r in rows:
        start = r if symmetric else 0
        out.append(np.abs(conjugated[start:] @ row_states[r]) ** 2)
    return out


def kernel_matrix(A, B=None, spec: Optional[KernelSpec] = None, n_jobs: int = 1) -> KernelMatrix:
    """
    Gram matrix K[r, c] = |<state(B[c]) | state(A[r])>|^2. With B omitted (A = B) every
    state is built once and only the upper triangle is computed, then mirrored.
    Each row is an independent matrix-vector product, so the result does not depend on n_jobs.
    """
    if spec is None:
        raise KernelError("a KernelSpec is required")
    symmetric = B is None
    row_points = _as_points(A, spec)
    col_points = row_points if symmetric else _as_points(B, spec)

    row_states = feature_map_states(row_points, spec)
    col_states = row_states if symmetric else feature_map_states(col_points, spec)

    m = row_points.shape[0]
    if n_jobs > 1 and m > 1:
        chunks = [range(start, m, n_jobs) for start in range(n_jobs)]
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda rows: (rows, _overlap_rows(row_states, col_states, rows, symmetric)), chunks))
    else:
        parts = [(range(m), _overlap_rows(row_states, col_states, range(m), symmetric))]

    entries = np.zeros((m, col_points.shape[0]))
    for rows, values in parts:
        for r, row in zip(rows, values):
            if symmetric:
                entries[r, r:] = row
            else:
                entries[r] = row
    if symmetric:
        upper = np.triu(entries)
        entries = upper + np.triu(entries, 1).T
    logger.debug("Kernel matrix %s for %s reps=%d", entries.shape, spec.scheme.name, spec.reps)
    return KernelMatrix(entries, row_points, col_points)
