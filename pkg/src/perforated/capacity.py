"""Capacity of holes relative to the outer domain.

The capacity of a set A is the least Dirichlet energy over functions that
vanish on the outer boundary and are at least 1 on A.  The minimiser is the
harmonic function equal to 1 on A, so the discrete value is obtained by
clamping the lattice points of A to 1 and solving the Laplace equation for
the remaining points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import DomainSpec, build_grid
from .errors import InvalidEps, UnresolvedHole
from .operator import assemble, dirichlet_energy
from .sparsekit import SparseMatrix, amg, cg_solve

AMG_THRESHOLD = 4000


@dataclass
class CapacityResult:
    value: float
    potential: np.ndarray  # nodal values on the grid of the hole-free domain
    grid: object
    clamped: int
    iterations: int
    residual: float


def capacity(spec: DomainSpec, resolution: float, tol: float = 1e-10, min_hole_ratio: float = 4.0) -> CapacityResult:
    """Discrete capacity of the union of ``spec.holes`` relative to ``spec.outer``."""
    h = 1.0 / resolution
    for hole in spec.holes:
        if min_hole_ratio > 0 and h >= hole.eps / min_hole_ratio:
            raise UnresolvedHole(f"h = {h:.4g} does not resolve hole eps = {hole.eps:.4g}")
    grid = build_grid(spec.without_holes(), resolution, 0)
    pts = grid.coords()
    on_hole = np.zeros(grid.n_active, dtype=bool)
    for hole in spec.holes:
        on_hole |= hole.contains_closed(pts)
    del pts
    v = np.zeros(grid.n_active)
    v[on_hole] = 1.0
    if not on_hole.any():
        return CapacityResult(0.0, v, grid, 0, 0, 0.0)

    L = assemble(grid)
    free = np.flatnonzero(~on_hole)
    renum = np.full(grid.n_active, -1, dtype=np.int64)
    renum[free] = np.arange(free.size)
    # restrict the Laplacian to free nodes; clamped neighbours move to the rhs
    csr = L.matrix.to_scipy()
    sub = csr[free][:, free].tocsr()
    sub.sort_indices()
    rhs = -(csr[free][:, np.flatnonzero(on_hole)] @ np.ones(int(on_hole.sum())))
    A = SparseMatrix(free.size, sub.indptr.astype(np.int64), sub.indices.astype(np.int64), sub.data, symmetric=True)
    precond = amg(A) if A.n > AMG_THRESHOLD else None
    sol = cg_solve(A, rhs, tol=tol, preconditioner=precond)
    v[free] = sol.x
    value = float(dirichlet_energy(grid, v))
    return CapacityResult(value, v, grid, int(on_hole.sum()), sol.iterations, sol.residual)


def ball_capacity_asymptotic(eps: float, dimension: int) -> float:
    """Leading term of the small-ball capacity: 2 pi / (-log eps) in 2D, 4 pi eps in 3D."""
    if dimension == 2:
        if not 0 < eps < 1:
            raise InvalidEps(f"2D formula needs 0 < eps < 1, got {eps}")
        return 2 * math.pi / -math.log(eps)
    if dimension == 3:
        if eps < 0:
            raise InvalidEps(f"eps must be nonnegative, got {eps}")
        return 4 * math.pi * eps
    raise ValueError("dimension must be 2 or 3")


def concentric_capacity(eps: float, radius: float, dimension: int) -> float:
    """Exact capacity of the ball B(eps) inside the concentric ball B(radius)."""
    if dimension == 2:
        return 2 * math.pi / math.log(radius / eps)
    return 4 * math.pi / (1 / eps - 1 / radius)
