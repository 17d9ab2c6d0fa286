"""Block composition of saddle-point systems and a residual-checked solver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgumentError, SolverError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10


@dataclass
class _Block:
    matrix: sp.spmatrix
    sign: float = 1.0
    transpose: bool = False

    def value(self):
        m = self.matrix.T if self.transpose else self.matrix
        return self.sign * sp.csr_matrix(m)


@dataclass
class BlockSystem:
    """Grid of optional sparse blocks with labelled unknown segments.

    Segments are indexed by position in ``labels``; ``sizes`` holds the
    length of each segment and ``rhs`` one vector per segment.
    """

    labels: list[str]
    sizes: list[int]
    rhs: list[np.ndarray] = field(default_factory=list)
    blocks: dict[tuple[int, int], _Block] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels) != len(self.sizes):
            raise InvalidArgumentError("labels and sizes differ in length")
        if not self.rhs:
            self.rhs = [np.zeros(n) for n in self.sizes]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def set_block(self, row: str, col: str, matrix, sign: float = 1.0, transpose: bool = False):
        i, j = self.index(row), self.index(col)
        shape = matrix.shape[::-1] if transpose else matrix.shape
        if shape != (self.sizes[i], self.sizes[j]):
            raise InvalidArgumentError(
                f"block ({row},{col}) has shape {shape}, expected {(self.sizes[i], self.sizes[j])}"
            )
        self.blocks[(i, j)] = _Block(matrix, sign, transpose)

    def set_rhs(self, row: str, vector):
        i = self.index(row)
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (self.sizes[i],):
            raise InvalidArgumentError(f"rhs segment {row} has shape {vector.shape}, expected ({self.sizes[i]},)")
        self.rhs[i] = vector

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        off = self.offsets()
        return {lab: x[off[k]:off[k + 1]] for k, lab in enumerate(self.labels)}

    def assemble(self) -> tuple[sp.csr_matrix, np.ndarray]:
        return assemble_monolithic(self)


def assemble_monolithic(system: BlockSystem) -> tuple[sp.csr_matrix, np.ndarray]:
    """Monolithic CSR matrix and concatenated right-hand side of ``system``."""
    n = len(system.sizes)
    grid = [[None] * n for _ in range(n)]
    for (i, j), blk in system.blocks.items():
        grid[i][j] = blk.value()
    for i in range(n):
        if grid[i][i] is None:
            grid[i][i] = sp.csr_matrix((system.sizes[i], system.sizes[i]))
    matrix = sp.bmat(grid, format="csr")
    matrix.sum_duplicates()
    return matrix, np.concatenate(system.rhs)


def relative_residual(matrix, x, rhs) -> float:
    r = np.linalg.norm(matrix @ x - rhs)
    b = np.linalg.norm(rhs)
    return float(r / b) if b > 0 else float(r)


def solve(matrix, rhs, tol: float = DEFAULT_TOL, max_refinements: int = 5) -> np.ndarray:
    """Sparse LU solve with iterative refinement.

    Raises :class:`SolverError` if the matrix is singular or the relative
    residual ``||A x - b|| / ||b||`` stays above ``tol``.
    """
    matrix = sp.csc_matrix(matrix)
    rhs = np.asarray(rhs, dtype=float)
    if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != rhs.shape[0]:
        raise InvalidArgumentError(f"incompatible system: matrix {matrix.shape}, rhs {rhs.shape}")
    if not np.all(np.isfinite(matrix.data)) or not np.all(np.isfinite(rhs)):
        raise InvalidArgumentError("non-finite entries in linear system")
    try:
        lu = spla.splu(matrix, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc

    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs)
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SolverError("factorization produced non-finite values")
    res = relative_residual(matrix, x, rhs)
    for _ in range(max_refinements):
        if res <= tol:
            break
        x = x + lu.solve(rhs - matrix @ x)
        res_new = relative_residual(matrix, x, rhs)
        if not np.isfinite(res_new) or res_new >= res:
            res = min(res, res_new) if np.isfinite(res_new) else res
            break
        res = res_new
    if not res <= tol:
        raise SolverError("residual above tolerance after iterative refinement", residual=res)
    logger.debug("solved %d unknowns, relative residual %.2e", len(rhs), res)
    return x


def dense_solve(matrix, rhs) -> np.ndarray:
    """Gaussian elimination with partial pivoting on a dense copy."""
    a = np.array(matrix.toarray() if sp.issparse(matrix) else matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if a[p, k] == 0.0:
            raise SolverError("dense elimination hit a zero pivot")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(f, a[k, k:])
        b[k + 1:] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x
