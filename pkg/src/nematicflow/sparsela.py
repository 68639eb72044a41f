"""Sparse linear algebra: CSR storage, direct solves, saddle-point solves.

Thin layer over scipy.sparse / SuperLU that fixes the semantics the rest of
the package relies on: triplet assembly with duplicate summation, a
deterministic direct solver with a residual contract, and a monolithic
solver for the mixed (velocity, pressure) saddle systems including the
scalar zero-mean pressure constraint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(RuntimeError):
    """Base class for singular-system failures."""


class StructurallySingularError(SingularMatrixError):
    pass


class NumericallySingularError(SingularMatrixError):
    pass


class SaddleRankError(RuntimeError):
    """Constraint block rank-deficient beyond the constant pressure mode."""


class SparseMatrix:
    """CSR matrix; immutable after construction, duplicates summed."""

    def __init__(self, csr: sp.csr_matrix):
        csr = csr.tocsr()
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        self._csr = csr

    @property
    def shape(self):
        return self._csr.shape

    @property
    def nrows(self):
        return self._csr.shape[0]

    @property
    def ncols(self):
        return self._csr.shape[1]

    @property
    def nnz(self):
        return self._csr.nnz

    @property
    def csr(self) -> sp.csr_matrix:
        return self._csr

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr.T @ x

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self._csr.T.tocsr())

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def scaled(self, alpha: float) -> "SparseMatrix":
        return SparseMatrix(self._csr * alpha)

    def __add__(self, other: "SparseMatrix") -> "SparseMatrix":
        return SparseMatrix(self._csr + other._csr)

    def __matmul__(self, x):
        return self._csr @ x


def from_triplets(nrows: int, ncols: int, rows, cols, vals) -> SparseMatrix:
    """Assemble from COO triplets; repeated entries are summed."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= nrows):
        raise IndexError("row index out of range")
    if cols.size and (cols.min() < 0 or cols.max() >= ncols):
        raise IndexError("column index out of range")
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    return SparseMatrix(coo.tocsr())


def identity(n: int) -> SparseMatrix:
    return SparseMatrix(sp.identity(n, format="csr"))


def _as_csr(a):
    return a.csr if isinstance(a, SparseMatrix) else sp.csr_matrix(a)


def _check_structural(csr):
    nnz_row = np.diff(csr.indptr)
    if np.any(nnz_row == 0):
        raise StructurallySingularError(
            f"empty row(s): {np.flatnonzero(nnz_row == 0)[:5]}"
        )
    col_hit = np.zeros(csr.shape[1], dtype=bool)
    col_hit[csr.indices] = True
    if not col_hit.all():
        raise StructurallySingularError(
            f"empty column(s): {np.flatnonzero(~col_hit)[:5]}"
        )


class DirectFactorization:
    """LU factorization reusable across right-hand sides."""

    def __init__(self, a):
        csr = _as_csr(a)
        if csr.shape[0] != csr.shape[1]:
            raise ValueError("matrix must be square")
        _check_structural(csr)
        self._csr = csr
        try:
            self._lu = spla.splu(csr.tocsc())
        except RuntimeError as exc:  # SuperLU signals an exact zero pivot
            raise NumericallySingularError(str(exc)) from exc

    def solve(self, b: np.ndarray, rtol: float = 1e-10, refine: int = 3) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise NumericallySingularError("non-finite solution from LU solve")
        scale = np.linalg.norm(b)
        if scale == 0.0:
            return np.zeros_like(b)
        for _ in range(refine):
            r = b - self._csr @ x
            if np.linalg.norm(r) <= rtol * scale:
                break
            x = x + self._lu.solve(r)
        return x


def solve_direct(a, b: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Solve a square system with sparse LU; residual <= rtol * ||b||."""
    fact = DirectFactorization(a)
    x = fact.solve(b, rtol=rtol)
    scale = np.linalg.norm(b)
    if scale > 0 and np.linalg.norm(_as_csr(a) @ x - b) > 10 * rtol * scale:
        raise NumericallySingularError("iterative refinement failed to converge")
    return x


@dataclass
class BlockSaddleSystem:
    """Mixed system  [A B^T; B 0] (v, p) = (f, g)  with optional mean row.

    `mean_weights`, when given, appends one scalar multiplier enforcing
    mean_weights . p = 0, which removes the constant pressure mode while
    keeping the system symmetric whenever A is.
    """

    a: SparseMatrix
    b: SparseMatrix | None
    rhs_primal: np.ndarray
    rhs_constraint: np.ndarray | None = None
    mean_weights: np.ndarray | None = None

    @property
    def num_primal(self):
        return self.a.nrows

    @property
    def num_multiplier(self):
        return 0 if self.b is None else self.b.nrows

    def assemble_kkt(self) -> sp.csr_matrix:
        a = self.a.csr
        if self.b is None:
            return a
        b = self.b.csr
        blocks = [[a, b.T], [b, None]]
        rows = [self.rhs_primal, self.rhs_constraint]
        if self.mean_weights is not None:
            e = sp.csr_matrix(
                (self.mean_weights, (np.arange(b.shape[0]), np.zeros(b.shape[0], int))),
                shape=(b.shape[0], 1),
            )
            z1 = sp.csr_matrix((a.shape[0], 1))
            blocks = [[a, b.T, z1], [b, None, e], [z1.T, e.T, None]]
        return sp.bmat(blocks, format="csr")

    def full_rhs(self) -> np.ndarray:
        parts = [self.rhs_primal]
        if self.b is not None:
            g = (
                self.rhs_constraint
                if self.rhs_constraint is not None
                else np.zeros(self.b.nrows)
            )
            parts.append(g)
            if self.mean_weights is not None:
                parts.append(np.zeros(1))
        return np.concatenate(parts)


class SaddleFactorization:
    """Monolithic LU of the KKT matrix, reusable across right-hand sides."""

    def __init__(self, system: BlockSaddleSystem):
        self.system = system
        kkt = system.assemble_kkt()
        try:
            self._fact = DirectFactorization(kkt)
        except SingularMatrixError as exc:
            raise SaddleRankError(
                f"saddle system singular beyond the constant mode: {exc}"
            ) from exc

    def solve(self, rhs_primal=None, rhs_constraint=None, rtol: float = 1e-10):
        sysm = self.system
        if rhs_primal is not None or rhs_constraint is not None:
            sysm = BlockSaddleSystem(
                a=sysm.a,
                b=sysm.b,
                rhs_primal=sysm.rhs_primal if rhs_primal is None else rhs_primal,
                rhs_constraint=(
                    sysm.rhs_constraint if rhs_constraint is None else rhs_constraint
                ),
                mean_weights=sysm.mean_weights,
            )
        rhs = sysm.full_rhs()
        x = self._fact.solve(rhs, rtol=rtol)
        nv = sysm.num_primal
        nm = sysm.num_multiplier
        primal = x[:nv]
        mult = x[nv : nv + nm]
        return primal, mult


def solve_saddle(system: BlockSaddleSystem, rtol: float = 1e-10):
    """Solve the saddle system; returns (primal, multiplier)."""
    if system.b is None or system.b.nrows == 0:
        return solve_direct(system.a, system.rhs_primal, rtol=rtol), np.zeros(0)
    return SaddleFactorization(system).solve(rtol=rtol)


def write_matrix_market(a, path) -> None:
    """Coordinate-format dump for external inspection."""
    from scipy.io import mmwrite

    mmwrite(str(path), _as_csr(a))
