from typing import Tuple

import numpy as np

from src.helpers.constants import JACOBI_MAX_SWEEPS, JACOBI_TOLERANCE


def off_diagonal_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(A: np.ndarray, tol: float = JACOBI_TOLERANCE,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted non-increasing and
    eigenvectors as columns, so that A = V diag(w) V^T.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=1e-8, atol=1e-10):
        raise ValueError("matrix is not symmetric")
    A = (A + A.T) / 2.0
    n = A.shape[0]
    V = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(A)))

    for _ in range(max_sweeps):
        if off_diagonal_norm(A) < threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                sign = 1.0 if tau >= 0.0 else -1.0
                t = sign / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0

                vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q

    eigenvalues = np.diag(A).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], V[:, order]


def min_eigenvalue(A: np.ndarray) -> float:
    return float(jacobi_eigh(A)[0][-1])
