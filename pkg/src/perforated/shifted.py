"""Batched solvers for ``(I + c A) x = b`` on a masked grid.

Box domains use the discrete sine basis of the hole-free box, in which the
shifted Laplacian is diagonal, plus a capacitance correction that enforces
``x = 0`` at the lattice points covered by holes.  Other domains fall back
to conjugate gradients, one path at a time.

Each solver works in its own vector layout: ``embed`` maps active-node
vectors (B, N) into it and ``extract`` maps back.  The spectral solver uses
the full interior of the box with zeros at hole points, so no gather or
scatter is needed inside a time loop.
"""

from __future__ import annotations

import math

import numpy as np

from .domain import Box, Grid
from .operator import DiscreteLaplacian
from .sparsekit import cg_solve

# largest number of hole lattice points handled by the dense capacitance matrix
MAX_CAPACITANCE = 3000

# two-stage, L-stable, second order SDIRK
SDIRK_GAMMA = 1.0 - 1.0 / math.sqrt(2.0)


def _sine_matrix(m: int) -> np.ndarray:
    j = np.arange(1, m + 1)
    return math.sqrt(2.0 / (m + 1)) * np.sin(math.pi * np.outer(j, j) / (m + 1))


def _sdirk_weights(gamma):
    return (2 * gamma - 1) / gamma, (1 - gamma) / gamma


class SpectralBoxSolver:
    def __init__(self, grid: Grid, c: float):
        if not isinstance(grid.spec.outer, Box):
            raise TypeError("spectral solver needs a box domain")
        self.grid = grid
        self.c = c
        self.inner = tuple(s - 2 for s in grid.shape)
        self.size = int(np.prod(self.inner))
        self.mats = [_sine_matrix(m) for m in self.inner]
        lam = np.zeros(self.inner)
        for ax, m in enumerate(self.inner):
            k = np.arange(1, m + 1)
            shape = [1] * len(self.inner)
            shape[ax] = m
            lam = lam + ((4.0 / grid.h**2) * np.sin(math.pi * k / (2 * (m + 1))) ** 2).reshape(shape)
        self.lam = lam.ravel()
        self.inv_den = 1.0 / (1.0 + c * self.lam)

        mi = np.stack(np.unravel_index(grid.nodes, grid.shape), axis=-1) - 1
        self.pos = np.ravel_multi_index(tuple(mi.T), self.inner)
        covered = np.ones(self.size, dtype=bool)
        covered[self.pos] = False
        self.holes = np.flatnonzero(covered)
        if self.holes.size > MAX_CAPACITANCE:
            raise ValueError("too many hole points for the capacitance correction")
        self.k = self.holes.size
        if self.k:
            self._setup_capacitance()

    def _setup_capacitance(self):
        # the sine coefficients of a hole unit vector factor into
        # (leading axes) x (last axis):  row s = R[s, j'] * S_last[c(s), k]
        hm = np.stack(np.unravel_index(self.holes, self.inner), axis=-1)
        lead = self.inner[:-1]
        R = np.ones((self.k,) + lead)
        for ax, m in enumerate(lead):
            shape = [self.k] + [1] * len(lead)
            shape[ax + 1] = m
            R = R * self.mats[ax][hm[:, ax]].reshape(shape)
        self.R = R.reshape(self.k, -1)
        self.cols, self.col_of = np.unique(hm[:, -1], return_inverse=True)
        self.S_cols = np.ascontiguousarray(self.mats[-1][self.cols])  # (nc, m_last)
        self.S_cols_T = np.ascontiguousarray(self.S_cols.T)
        onehot = np.zeros((self.k, self.cols.size))
        onehot[np.arange(self.k), self.col_of] = 1.0
        self.RC = (self.R[:, :, None] * onehot[:, None, :]).reshape(self.k, -1)  # (k, M' * nc)
        # capacitance matrix G = E_S^T (I + cA)^{-1} E_S, symmetric positive definite
        unit = np.zeros((self.k, self.size))
        unit[np.arange(self.k), self.holes] = 1.0
        P = self.transform(unit)
        self.g_inv = np.linalg.inv((P * self.inv_den) @ P.T)

    # -- layout ----------------------------------------------------------
    def embed(self, v: np.ndarray) -> np.ndarray:
        full = np.zeros((v.shape[0], self.size))
        full[:, self.pos] = v
        return full

    def extract(self, x: np.ndarray) -> np.ndarray:
        return x[:, self.pos]

    # -- transforms --------------------------------------------------------
    def transform(self, x: np.ndarray) -> np.ndarray:
        """Orthonormal multi-axis sine transform of rows of ``x`` (self-inverse)."""
        b = x.shape[0]
        dims = self.inner
        y = x
        for ax, S in enumerate(self.mats):
            before = int(np.prod(dims[:ax]))
            after = int(np.prod(dims[ax + 1:]))
            if after == 1:
                y = y.reshape(-1, dims[ax]) @ S
            else:
                y = np.matmul(S, y.reshape(b * before, dims[ax], after))
        return y.reshape(b, self.size)

    def _at_holes(self, y_hat):
        """Physical values at the hole points, from sine coefficients."""
        b = y_hat.shape[0]
        z = (y_hat.reshape(-1, self.inner[-1]) @ self.S_cols_T).reshape(b, -1, self.cols.size)
        return np.einsum("bjs,sj->bs", z[:, :, self.col_of], self.R)

    def _from_holes(self, mu):
        """Sine coefficients of sum_s mu_s e_s."""
        b = mu.shape[0]
        hc = mu @ self.RC
        return (hc.reshape(-1, self.cols.size) @ self.S_cols).reshape(b, self.size)

    def _apply_inverse_hat(self, r_hat):
        if not self.k:
            return r_hat * self.inv_den
        mu = self._at_holes(r_hat * self.inv_den) @ self.g_inv
        corr = self._from_holes(mu)
        np.subtract(r_hat, corr, out=corr)
        corr *= self.inv_den
        return corr

    def _clean(self, x):
        # hole entries are zero up to rounding; make them exact
        if self.k:
            x[:, self.holes] = 0.0
        return x

    # -- solves --------------------------------------------------------------
    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for each row of ``rhs`` (solver layout); hole entries of rhs are ignored."""
        rhs = self._clean(np.array(rhs, dtype=float))
        return self._clean(self.transform(self._apply_inverse_hat(self.transform(rhs))))

    def energy(self, v: np.ndarray) -> np.ndarray:
        """Row-wise ``v^T A v`` for v vanishing at the holes."""
        v_hat = self.transform(v)
        return (v_hat * v_hat) @ self.lam

    def sdirk2(self, v: np.ndarray, gamma: float = SDIRK_GAMMA, energy: bool = False):
        """One SDIRK2 step of ``v' = -A v``; built for ``c = gamma * dt``.

        ``v`` must vanish at the holes.  With ``energy`` also returns row-wise
        ``v^T A v`` of the input, read off its sine coefficients.
        """
        a, b = _sdirk_weights(gamma)
        v_hat = self.transform(v)
        y_hat = self._apply_inverse_hat(v_hat)
        y_hat *= b
        y_hat += a * v_hat
        out = self._clean(self.transform(self._apply_inverse_hat(y_hat)))
        if energy:
            return out, (v_hat * v_hat) @ self.lam
        return out


class SparseShiftedSolver:
    def __init__(self, L: DiscreteLaplacian, c: float, tol: float = 1e-13):
        self.matrix = L.matrix.shifted(c, 1.0)
        self.A = L.matrix.to_scipy()
        self.tol = tol

    def embed(self, v):
        return np.array(v, dtype=float)

    def extract(self, x):
        return x

    def energy(self, v: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ji->i", v, self.A @ v.T)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rhs)
        for i, b in enumerate(rhs):
            out[i] = cg_solve(self.matrix, b, tol=self.tol, x0=b).x
        return out

    def sdirk2(self, v: np.ndarray, gamma: float = SDIRK_GAMMA, energy: bool = False):
        a, b = _sdirk_weights(gamma)
        y1 = self.solve(v)
        out = self.solve(a * v + b * y1)
        return (out, self.energy(v)) if energy else out


def make_solver(L: DiscreteLaplacian, c: float, method: str = "auto"):
    grid = L.grid
    if method == "auto":
        method = "spectral" if isinstance(grid.spec.outer, Box) else "cg"
        if method == "spectral":
            inner = int(np.prod([s - 2 for s in grid.shape]))
            if inner - grid.n_active > MAX_CAPACITANCE:
                method = "cg"
    if method == "spectral":
        return SpectralBoxSolver(grid, c)
    if method == "cg":
        return SparseShiftedSolver(L, c)
    raise ValueError(f"unknown solver method {method!r}")
