"""Dense matrix inversion by Gauss-Jordan elimination with partial pivoting.

A near-singular weight matrix silently wrecks decoding, so the pivot check
fails loudly instead: any pivot below PIVOT_TOL raises SingularMatrixError
and the caller is expected to re-initialize or retrain.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, SingularMatrixError

PIVOT_TOL = 1e-12


def invert_matrix(w: np.ndarray, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Inverse of a square matrix, or SingularMatrixError."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {w.shape}")
    n = w.shape[0]
    aug = np.hstack([w.copy(), np.eye(n)])
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(aug[col:, col])))
        pivot = aug[pivot_row, col]
        if abs(pivot) < pivot_tol:
            raise SingularMatrixError(
                f"pivot {abs(pivot):.3e} below {pivot_tol:.0e} at column {col}"
            )
        if pivot_row != col:
            aug[[col, pivot_row]] = aug[[pivot_row, col]]
        aug[col] = aug[col] / aug[col, col]
        others = np.arange(n) != col
        aug[others] -= np.outer(aug[others, col], aug[col])
    return aug[:, n:]


def max_residual(w: np.ndarray, w_inv: np.ndarray) -> float:
    """Max-norm of W @ W_inv - I, the multiply-back quality check."""
    n = w.shape[0]
    return float(np.abs(w @ w_inv - np.eye(n)).max())
