"""Sparse matrix helpers on top of scipy's CSR container and SuperLU."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

RESIDUAL_TOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def assemble(n: int, rows, cols, values, n_cols: int | None = None) -> sp.csr_matrix:
    """Compress triplets into CSR, summing duplicates.

    Triplets are sorted by (row, col, value) before summation, so the
    result is bitwise independent of the order in which they are given.
    """
    n_cols = n if n_cols is None else n_cols
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (rows.shape == cols.shape == values.shape):
        raise ValueError("triplet arrays must have equal length")
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n_cols):
        raise IndexError("triplet index out of range")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite matrix entry")
    if rows.size == 0:
        return sp.csr_matrix((n, n_cols))
    order = np.lexsort((values, cols, rows))
    rows, cols, values = rows[order], cols[order], values[order]
    key = rows * n_cols + cols
    start = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    data = np.add.reduceat(values, start)
    r, c = rows[start], cols[start]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    indptr = np.cumsum(indptr)
    return sp.csr_matrix((data, c, indptr), shape=(n, n_cols))


def assemble_triplets(n: int, triplets) -> sp.csr_matrix:
    """Convenience wrapper taking an iterable of (row, col, value)."""
    trip = list(triplets)
    if not trip:
        return assemble(n, [], [], [])
    r, c, v = zip(*trip)
    return assemble(n, r, c, v)


def solve(A, b) -> np.ndarray:
    """Direct sparse LU solve with a relative residual check."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if A.shape[0] == 0:
        return np.zeros(0)
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution")
    res = np.abs(A @ x - b).max()
    scale = abs(A).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max()
    if scale > 0 and res / scale > RESIDUAL_TOL:
        raise SingularMatrixError(f"ill-conditioned factorization (relative residual {res / scale:.3e})")
    return x


def dense_inverse_oracle(A) -> np.ndarray:
    """Dense inverse for small test-scale matrices."""
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    if dense.shape[0] > 500:
        raise ValueError("dense oracle limited to n <= 500")
    try:
        return np.linalg.inv(dense)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
