"""First Dirichlet eigenpair by inverse power iteration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import connected_components
from .errors import DegenerateStart, MaxIterations, NotConnected, ResolutionMismatch
from .operator import DiscreteLaplacian, l2_norm_sq
from .sparsekit import amg, cg_solve

# below this size plain CG is cheaper than building a multigrid hierarchy
AMG_THRESHOLD = 4000


@dataclass
class EigenResult:
    lambda1: float
    phi1: np.ndarray
    residual: float
    iterations: int

    def at(self, grid, point) -> float:
        """phi1 interpolated at ``point``."""
        return grid.interpolate(self.phi1, point)


def _preconditioner(L: DiscreteLaplacian, preconditioner):
    if preconditioner == "auto":
        preconditioner = "amg" if L.n > AMG_THRESHOLD else None
    if preconditioner == "amg":
        return amg(L.matrix)
    if preconditioner == "jacobi":
        d = L.matrix.diagonal()
        return lambda r: r / d
    return preconditioner


def _inverse_iteration(L, x, tol, max_iter, precond, deflate=None):
    A = L.matrix
    eps_floor = 64 * np.finfo(float).eps

    def project(v):
        if deflate is not None:
            v = v - deflate * (deflate @ v)
        return v / np.linalg.norm(v)

    x = project(x)
    ax = A @ x
    lam = float(x @ ax)
    res = np.linalg.norm(ax - lam * x) / lam
    for it in range(1, max_iter + 1):
        inner = min(max(tol**2, 0.01 * res), 0.1)
        y = cg_solve(A, x, tol=inner, x0=x / lam, preconditioner=precond).x
        x = project(y)
        ax = A @ x
        lam_new = float(x @ ax)
        res = float(np.linalg.norm(ax - lam_new * x) / lam_new)
        change = abs(lam_new - lam) / lam_new
        lam = lam_new
        if res < tol and change < max(tol**2, eps_floor):
            return lam, x, res, it
    raise MaxIterations(f"inverse iteration: residual {res:.3g} after {max_iter} steps")


def first_eigenpair(
    L: DiscreteLaplacian,
    tol: float = 1e-8,
    max_iter: int = 500,
    x0: np.ndarray | None = None,
    preconditioner="auto",
) -> EigenResult:
    """Smallest eigenpair of the discrete Dirichlet Laplacian.

    ``residual`` is the relative residual ``|A phi - lambda phi| / (lambda |phi|)``.
    ``phi1`` is positive and normalised to unit discrete L2 norm.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    if connected_components(L.grid) != 1:
        raise NotConnected("first eigenpair requires a connected active set")
    precond = _preconditioner(L, preconditioner)
    start = np.ones(L.n) if x0 is None else np.asarray(x0, dtype=float)
    lam, x, res, it = _inverse_iteration(L, start, tol, max_iter, precond)
    x = x if x[np.argmax(np.abs(x))] > 0 else -x
    if np.any(x <= 0):
        if x0 is None:
            raise DegenerateStart("inverse iteration did not converge to the positive eigenvector")
        # start vector was (nearly) orthogonal to the Perron vector
        lam, x, res, it2 = _inverse_iteration(L, np.ones(L.n), tol, max_iter, precond)
        it += it2
        x = np.abs(x)
    phi = x / math.sqrt(l2_norm_sq(L.grid, x))
    return EigenResult(lam, phi, res, it)


def second_eigenvalue(L: DiscreteLaplacian, phi1: np.ndarray, tol: float = 1e-6, max_iter: int = 500, preconditioner="auto") -> float:
    """Smallest eigenvalue on the complement of ``phi1`` (deflated inverse iteration)."""
    q = phi1 / np.linalg.norm(phi1)
    rng = np.random.default_rng(12345)
    start = rng.standard_normal(L.n)
    lam, _, _, _ = _inverse_iteration(L, start, tol, max_iter, _preconditioner(L, preconditioner), deflate=q)
    return lam


def richardson(coarse: float, fine: float, order: int = 1) -> float:
    """Extrapolate two values at spacings h and h/2 with error ~ h^order."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    f = 2**order
    return (f * fine - coarse) / (f - 1)


def richardson_lambda(L_coarse: DiscreteLaplacian, L_fine: DiscreteLaplacian, order: int = 1, **kw) -> float:
    if L_coarse.grid.spec != L_fine.grid.spec:
        raise ResolutionMismatch("Richardson extrapolation needs the same domain")
    if not math.isclose(L_coarse.h, 2 * L_fine.h, rel_tol=1e-12):
        raise ResolutionMismatch(f"spacings {L_coarse.h} and {L_fine.h} do not differ by a factor 2")
    coarse = first_eigenpair(L_coarse, **kw).lambda1
    fine = first_eigenpair(L_fine, **kw).lambda1
    return richardson(coarse, fine, order)
