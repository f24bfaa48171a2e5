"""Discrete Dirichlet Laplacian on a masked grid, L2 norms and energies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Grid
from .errors import DimensionMismatch
from .sparsekit import SparseMatrix


@dataclass(frozen=True, eq=False)
class DiscreteLaplacian:
    """Standard (2n+1)-point stencil for -Laplace with homogeneous Dirichlet data.

    Unknowns are the active nodes only; an exterior neighbour simply drops its
    off-diagonal entry, the diagonal stays ``2n/h^2``.
    """

    matrix: SparseMatrix
    h: float
    dimension: int
    grid: Grid

    @property
    def n(self) -> int:
        return self.matrix.n

    def __matmul__(self, u):
        return self.matrix @ u


def assemble(grid: Grid) -> DiscreteLaplacian:
    n = grid.n_active
    d = grid.dimension
    inv_h2 = 1.0 / grid.h**2
    nb = grid.neighbors
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, 2 * d * inv_h2)]
    for j in range(nb.shape[1]):
        sel = nb[:, j] >= 0
        rows.append(np.flatnonzero(sel))
        cols.append(nb[sel, j])
        vals.append(np.full(int(sel.sum()), -inv_h2))
    mat = SparseMatrix.from_coo(n, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), symmetric=True)
    return DiscreteLaplacian(mat, grid.h, d, grid)


def _check(grid: Grid, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != grid.n_active:
        raise DimensionMismatch(f"nodal vector has length {u.shape[-1]}, grid has {grid.n_active} active nodes")
    return u


def l2_norm_sq(grid: Grid, u) -> float | np.ndarray:
    """``h^n * sum(u_i^2)``; batched over leading axes."""
    u = _check(grid, u)
    return grid.h**grid.dimension * np.sum(u * u, axis=-1)


def dirichlet_energy(grid: Grid, u) -> float | np.ndarray:
    """Edge sum ``h^(n-2) * sum (u_i - u_j)^2`` with exterior values taken as 0.

    Each lattice edge touching an active node is counted once, so the result
    equals ``h^n u^T A u`` for the assembled Laplacian.
    """
    u = _check(grid, u)
    nb = grid.neighbors
    total = np.zeros(u.shape[:-1])
    for k in range(grid.dimension):
        lo, hi = nb[:, 2 * k], nb[:, 2 * k + 1]
        # edge (i, i+e_k): interior when the upper neighbour is active
        up = hi >= 0
        diff = u[..., up] - u[..., hi[up]]
        total = total + np.sum(diff * diff, axis=-1)
        # edges leading to the exterior on either side
        total = total + np.sum(u[..., ~up] ** 2, axis=-1)
        total = total + np.sum(u[..., lo < 0] ** 2, axis=-1)
    return grid.h ** (grid.dimension - 2) * total
