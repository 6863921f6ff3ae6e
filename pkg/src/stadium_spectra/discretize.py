"""Masked 5-point Dirichlet Laplacian in CSR form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import Grid

__all__ = ["SparseSymMatrix", "DimensionMismatch", "assemble_laplacian", "matvec", "write_matrix_market"]


class DimensionMismatch(ValueError):
    pass


@dataclass(eq=False)
class SparseSymMatrix:
    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    h: float

    def __post_init__(self):
        self._csr = sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=(self.n, self.n))

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def __matmul__(self, x):
        return matvec(self, x)


# diagonal contribution (units of 1/h²) of a ghost neighbour mirrored onto the node itself
EVEN_FOLD = -1.0
ODD_FOLD = 1.0


def assemble_laplacian(grid: Grid) -> SparseSymMatrix:
    """Assemble -Δ_h on the grid's interior nodes.

    Neighbours outside the domain are dropped (u = 0 there).  On a quadrant
    grid the neighbour across a symmetry axis is the node itself, so its
    coupling folds onto the diagonal with the sign of the class parity.
    """
    h = grid.h
    n = grid.n
    i, j = grid.i, grid.j
    cls = grid.spec.symmetry_class

    diag_coef = np.full(n, 4.0)
    cols = []
    for di, dj in ((0, -1), (-1, 0), (1, 0), (0, 1)):
        nb = grid.index_of(i + di, j + dj)
        if cls is not None:
            if di == -1:
                ghost = i == 0
                diag_coef[ghost] += EVEN_FOLD if cls[0] == "E" else ODD_FOLD
            if dj == -1:
                ghost = j == 0
                diag_coef[ghost] += EVEN_FOLD if cls[1] == "E" else ODD_FOLD
        cols.append(nb)
    nbrs = np.column_stack(cols)  # (n, 4), -1 where masked

    # row-major ordering means down < left < self < right < up in index
    entries = np.column_stack([nbrs[:, 0], nbrs[:, 1], np.arange(n), nbrs[:, 2], nbrs[:, 3]])
    coefs = np.column_stack([
        np.full(n, -1.0), np.full(n, -1.0), diag_coef, np.full(n, -1.0), np.full(n, -1.0)
    ])
    keep = entries >= 0
    row_ptr = np.concatenate([[0], np.cumsum(keep.sum(axis=1))]).astype(np.int64)
    col_idx = entries[keep].astype(np.int64)
    # c / h² rather than c * (1/h²): keeps 4/h² and -1/h² bit-exact for any h
    values = coefs[keep] / (h * h)
    return SparseSymMatrix(n=n, row_ptr=row_ptr, col_idx=col_idx, values=values, h=h)


def matvec(m: SparseSymMatrix, x) -> np.ndarray:
    """y = M x for a vector or an (n, k) block."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != m.n:
        raise DimensionMismatch(f"matrix is {m.n}x{m.n}, vector has length {x.shape[0]}")
    return m.csr @ x


def write_matrix_market(m: SparseSymMatrix, path, comment: str = "") -> None:
    """Lower triangle in MatrixMarket coordinate real symmetric format."""
    coo = sp.tril(m.csr).tocoo()
    order = np.lexsort((coo.row, coo.col))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        for line in comment.splitlines():
            fh.write(f"% {line}\n")
        fh.write(f"{m.n} {m.n} {coo.nnz}\n")
        for k in order:
            fh.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {float(coo.data[k])!r}\n")
