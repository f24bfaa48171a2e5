"""Noise-stabilization threshold, decay-rate bound and critical hole size."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

from .domain import DomainSpec, build_grid
from .eigen import first_eigenpair, richardson
from .errors import ZeroShiftDivisor
from .noise import NoiseModel
from .operator import assemble


def margin(beta: float, gamma0: float, rho0: float, lambda1: float) -> float:
    """``lambda1 + rho0 - beta - gamma0/2``; positive means stabilized."""
    if not lambda1 > 0:
        raise ValueError("lambda1 must be positive")
    return lambda1 + rho0 - beta - gamma0 / 2


def decay_bound(beta: float, gamma0: float, rho0: float, lambda1_perforated: float) -> float:
    """Almost-sure upper bound on limsup (1/t) log |u(t)|^2."""
    if not lambda1_perforated > 0:
        raise ValueError("lambda1 must be positive")
    return 2 * beta + gamma0 - 2 * lambda1_perforated - 2 * rho0


def epsilon0(dimension: int, m: float, phi1_sq: Sequence[float]) -> float | None:
    """Hole size at which the leading-order eigenvalue shift equals the margin.

    Solves ``sum_i phi1(x_i)^2 * cap(eps0) = m`` with the small-ball
    capacity ``2 pi / -log eps`` (2D) or ``4 pi eps`` (3D).  Returns None for
    a nonpositive margin.
    """
    if m <= 0:
        return None
    weight = math.fsum(phi1_sq)
    if weight <= 0:
        raise ZeroShiftDivisor("phi1 vanishes at every hole center")
    if dimension == 2:
        return math.exp(-2 * math.pi * weight / m)
    if dimension == 3:
        return m / (4 * math.pi * weight)
    raise ValueError("dimension must be 2 or 3")


@dataclass
class StabilityReport:
    margin: float
    predicted_exponent: float
    epsilon0: float | None
    verdict: str
    lambda1: float
    decay_rate: float | None  # rate of |u| (half of -predicted_exponent) when decaying

    def to_dict(self) -> dict:
        return asdict(self)


def stability_report(beta: float, noise: NoiseModel, lambda1: float, dimension: int = 2, phi1_sq: Sequence[float] = ()) -> StabilityReport:
    m = margin(beta, noise.gamma0, noise.rho0, lambda1)
    exponent = decay_bound(beta, noise.gamma0, noise.rho0, lambda1)
    eps0 = epsilon0(dimension, m, phi1_sq) if phi1_sq else None
    return StabilityReport(
        margin=m,
        predicted_exponent=exponent,
        epsilon0=eps0,
        verdict="stabilized" if m > 0 else "not-stabilized",
        lambda1=lambda1,
        decay_rate=-exponent / 2 if exponent < 0 else None,
    )


def base_eigen(spec: DomainSpec, resolution: int, order: int = 2, tol: float = 1e-10):
    """Richardson-extrapolated lambda1 of the hole-free domain and phi1^2 at the hole centres."""
    base = spec.without_holes()
    coarse_grid = build_grid(base, resolution)
    fine_grid = build_grid(base, 2 * resolution)
    coarse = first_eigenpair(assemble(coarse_grid), tol=tol)
    fine = first_eigenpair(assemble(fine_grid), tol=tol)
    lam = richardson(coarse.lambda1, fine.lambda1, order)
    phi_sq = [fine.at(fine_grid, h.center) ** 2 for h in spec.holes]
    return lam, phi_sq


def threshold(spec: DomainSpec, beta: float, noise: NoiseModel, resolution: int = 64, lambda1: float | None = None,
              phi1_sq: Sequence[float] | None = None) -> StabilityReport:
    """Stability report for ``spec``; hole sizes are ignored, only centres matter.

    lambda1 and phi1^2 are computed on the hole-free domain unless given.
    Box domains use order-2 extrapolation, balls order 1 (staircase boundary).
    """
    if lambda1 is None or (phi1_sq is None and spec.holes):
        order = 2 if spec.outer.kind == "box" else 1
        lam, phi = base_eigen(spec, resolution, order)
        lambda1 = lam if lambda1 is None else lambda1
        phi1_sq = phi if phi1_sq is None else phi1_sq
    return stability_report(beta, noise, lambda1, spec.dimension, phi1_sq or ())
