"""Compressed-row matrices and a (preconditioned) conjugate gradient solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, MaxIterations, NotFinite


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """CSR matrix: ``indptr`` (N+1), ``indices`` and ``data`` (nnz).

    Column indices are sorted and unique within each row.  The product is
    delegated to scipy's compiled CSR kernel, which sums each row in
    storage order.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    symmetric: bool = False
    _csr: sp.csr_array = field(init=False, repr=False)

    def __post_init__(self):
        if self.indptr.shape != (self.n + 1,) or self.indices.shape != self.data.shape:
            raise DimensionMismatch("inconsistent CSR arrays")
        object.__setattr__(self, "_csr", sp.csr_array((self.data, self.indices, self.indptr), shape=(self.n, self.n)))

    @classmethod
    def from_coo(cls, n, rows, cols, vals, symmetric=False) -> "SparseMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if np.any(dup):
                raise ValueError("duplicate entries in COO input")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return cls(n, indptr, cols, vals, symmetric)

    @classmethod
    def from_dense(cls, a, symmetric=False) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_coo(a.shape[0], r, c, a[r, c], symmetric)

    @classmethod
    def identity(cls, n) -> "SparseMatrix":
        i = np.arange(n)
        return cls.from_coo(n, i, i, np.ones(n), symmetric=True)

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def to_scipy(self) -> sp.csr_array:
        return self._csr

    def shifted(self, scale: float, shift: float = 1.0) -> "SparseMatrix":
        """Return ``shift*I + scale*A`` with the same sparsity pattern."""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        data = scale * self.data + np.where(rows == self.indices, shift, 0.0)
        return SparseMatrix(self.n, self.indptr, self.indices, data, self.symmetric)

    def __matmul__(self, x):
        return matvec(self, x)


def matvec(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """``A @ x`` for a vector or an (N, k) block."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != a.n:
        raise DimensionMismatch(f"matrix is {a.n}x{a.n}, vector has length {x.shape[0]}")
    return a._csr @ x


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float

    def __iter__(self):
        return iter((self.x, self.iterations, self.residual))


def jacobi(a: SparseMatrix) -> Callable[[np.ndarray], np.ndarray]:
    inv = 1.0 / a.diagonal()
    return lambda r: inv * r


def amg(a: SparseMatrix) -> Callable[[np.ndarray], np.ndarray]:
    """Smoothed-aggregation V-cycle (pyamg) usable as an SPD preconditioner."""
    import pyamg

    # pyamg kernels take 32-bit index arrays
    csr = sp.csr_matrix((a.data, a.indices.astype(np.int32), a.indptr.astype(np.int32)), shape=(a.n, a.n))
    ml = pyamg.smoothed_aggregation_solver(csr, symmetry="symmetric")
    return ml.aspreconditioner(cycle="V").matvec


def _dot(u, v) -> float:
    return float(np.dot(u, v))


def cg_solve(
    a: SparseMatrix,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
    preconditioner: Callable | str | None = None,
) -> CGResult:
    """Solve ``A x = b`` for SPD ``A`` until ``|r| <= tol |b|``.

    ``r`` is the recursively updated residual; it tracks ``b - Ax`` until
    roundoff (about machine eps times the condition number) takes over.

    ``preconditioner`` is ``None``, ``"jacobi"``, ``"amg"`` or a callable
    applying an SPD approximation of ``A^{-1}``.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    b = np.asarray(b, dtype=float)
    if b.shape != (a.n,):
        raise DimensionMismatch(f"rhs has shape {b.shape}, expected ({a.n},)")
    if max_iter is None:
        max_iter = max(10 * a.n, 100)
    if preconditioner == "jacobi":
        preconditioner = jacobi(a)
    elif preconditioner == "amg":
        preconditioner = amg(a)

    bnorm = math.sqrt(_dot(b, b))
    if not math.isfinite(bnorm):
        raise NotFinite("right-hand side contains NaN or Inf")
    if bnorm == 0.0:
        return CGResult(np.zeros(a.n), 0, 0.0)
    x = np.zeros(a.n) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(a, x) if x0 is not None else b.copy()
    rnorm = math.sqrt(_dot(r, r))
    if rnorm <= tol * bnorm:
        return CGResult(x, 0, rnorm / bnorm)
    z = r if preconditioner is None else preconditioner(r)
    p = z.copy()
    rz = _dot(r, z)
    for it in range(1, max_iter + 1):
        ap = matvec(a, p)
        pap = _dot(p, ap)
        if not math.isfinite(pap) or pap <= 0.0:
            raise NotFinite(f"CG breakdown (p^T A p = {pap}); matrix not SPD?")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = math.sqrt(_dot(r, r))
        if not math.isfinite(rnorm):
            raise NotFinite("non-finite residual in CG")
        if rnorm <= tol * bnorm:
            return CGResult(x, it, rnorm / bnorm)
        z = r if preconditioner is None else preconditioner(r)
        rz_new = _dot(r, z)
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise MaxIterations(f"CG did not reach tol={tol:g} in {max_iter} iterations (residual {rnorm / bnorm:.3g})")
