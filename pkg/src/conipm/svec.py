"""Scaled symmetric vectorization.

A symmetric ``d x d`` matrix is stored as a length ``d(d+1)/2`` vector,
walking the rows of the lower triangle and scaling off-diagonal entries by
``sqrt(2)`` so that ``svec(X) . svec(Y) == <X, Y>`` exactly.
"""

import numpy as np

_SQRT2 = np.sqrt(2.0)


def svec_dim(d: int) -> int:
    """Length of the vectorization of a symmetric d x d matrix."""
    return d * (d + 1) // 2


def side_of(length: int) -> int:
    """Matrix side length recovered from a vector length."""
    d = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if d * (d + 1) // 2 != length:
        raise ValueError(f"{length} is not a triangular number")
    return d


def svec(mat: np.ndarray) -> np.ndarray:
    d = mat.shape[0]
    rows, cols = np.tril_indices(d)
    out = mat[rows, cols].astype(float).copy()
    out[rows != cols] *= _SQRT2
    return out


def smat(vec: np.ndarray) -> np.ndarray:
    d = side_of(len(vec))
    rows, cols = np.tril_indices(d)
    vals = np.asarray(vec, dtype=float).copy()
    vals[rows != cols] /= _SQRT2
    out = np.zeros((d, d))
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out


def svec_weights(d: int) -> np.ndarray:
    """Per-entry scaling applied by svec (1 on diagonal, sqrt(2) off)."""
    rows, cols = np.tril_indices(d)
    return np.where(rows == cols, 1.0, _SQRT2)
