"""Nonnegative sparse matrices stored in compressed row form with a column view.

Both matvec directions occur in every solver iteration, so assembly builds
the CSR layout (fast ``A @ x``) together with a CSC copy (fast ``A.T @ y``).
Matrices small enough to keep dense also cache a C-contiguous dense array and
its transpose; the solver kernels use those when present.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError

# Above this many cells the dense cache is skipped.
_DENSE_CELL_CAP = 200_000


class SparseMatrix:
    """Immutable m x n matrix with nonnegative entries."""

    def __init__(self, rows: int, cols: int, row_idx, col_idx, values):
        row_idx = np.asarray(row_idx, dtype=np.int64)
        col_idx = np.asarray(col_idx, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (row_idx.shape == col_idx.shape == values.shape):
            raise DimensionError("coordinate arrays must have equal length")
        if rows <= 0 or cols <= 0:
            raise DimensionError("matrix dimensions must be positive")
        if row_idx.size:
            if row_idx.min() < 0 or row_idx.max() >= rows:
                raise DimensionError("row index out of bounds")
            if col_idx.min() < 0 or col_idx.max() >= cols:
                raise DimensionError("col index out of bounds")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise DimensionError("entries must be finite and nonnegative")
        keys = row_idx * cols + col_idx
        if np.unique(keys).size != keys.size:
            raise DimensionError("duplicate (row, col) entry")

        self.rows = int(rows)
        self.cols = int(cols)
        self.csr = sp.csr_matrix(
            (values, (row_idx, col_idx)), shape=(rows, cols), dtype=np.float64
        )
        self.csr.sort_indices()
        self.csc = self.csr.tocsc()
        if rows * cols <= _DENSE_CELL_CAP:
            self.dense = np.ascontiguousarray(self.csr.toarray())
            self.dense_t = np.ascontiguousarray(self.dense.T)
        else:
            self.dense = None
            self.dense_t = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_coo(cls, rows: int, cols: int, entries) -> "SparseMatrix":
        """Build from an iterable of (i, j, value) triples."""
        entries = list(entries)
        if entries:
            i, j, v = zip(*entries)
        else:
            i, j, v = [], [], []
        return cls(rows, cols, i, j, v)

    @classmethod
    def from_dense(cls, array) -> "SparseMatrix":
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2:
            raise DimensionError("expected a 2-D array")
        i, j = np.nonzero(array)
        return cls(array.shape[0], array.shape[1], i, j, array[i, j])

    # -- products ----------------------------------------------------------

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ x
        return self.csr @ x

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        if self.dense_t is not None:
            return self.dense_t @ y
        return self.csc.T @ y

    # -- structure ---------------------------------------------------------

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def column_norms(self, col_start: int = 0, col_stop: int | None = None) -> np.ndarray:
        """Euclidean norm of each column in [col_start, col_stop)."""
        if col_stop is None:
            col_stop = self.cols
        sub = self.csc[:, col_start:col_stop]
        return np.sqrt(np.asarray(sub.multiply(sub).sum(axis=0)).ravel())

    def row_block(self, start: int, stop: int) -> "SparseMatrix":
        """The submatrix of rows [start, stop) as a new SparseMatrix."""
        block = self.csr[start:stop].tocoo()
        return SparseMatrix(stop - start, self.cols, block.row, block.col, block.data)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.csr.sum(axis=1)).ravel()

    def col_sums(self) -> np.ndarray:
        return np.asarray(self.csr.sum(axis=0)).ravel()

    def toarray(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense.copy()
        return self.csr.toarray()

    def __repr__(self) -> str:  # pragma: no cover
        return f"SparseMatrix({self.rows}x{self.cols}, nnz={self.nnz})"
