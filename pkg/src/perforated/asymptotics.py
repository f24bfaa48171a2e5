"""First-eigenvalue shift caused by small holes.

Compares the directly computed eigenvalue of the perforated domain with the
capacity prediction ``lambda(base) + sum_i phi1(x_i)^2 cap(E_i)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

from .capacity import ball_capacity_asymptotic, capacity
from .domain import DomainSpec, build_grid
from .eigen import first_eigenpair, richardson
from .operator import assemble


@dataclass
class ExpansionReport:
    eps: float
    lambda_base: float
    lambda_perforated: float
    predicted_shift: float
    remainder: float
    remainder_ratio: float
    # leading-order form: (lambda_eps - lambda) / (2 pi / -log eps) or / (4 pi eps)
    order_ratio: float
    phi1_sq: list[float] = field(default_factory=list)
    capacities: list[float] = field(default_factory=list)
    resolutions: tuple[float, ...] = ()
    levels: dict = field(default_factory=dict)

    CSV_FIELDS = ("eps", "lambda_base", "lambda_perforated", "predicted_shift", "remainder", "remainder_ratio")

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.CSV_FIELDS}


def _base_eigen(spec: DomainSpec, resolution, cache, tol):
    key = (spec.without_holes(), resolution)
    if key not in cache:
        grid = build_grid(spec.without_holes(), resolution)
        cache[key] = (grid, first_eigenpair(assemble(grid), tol=tol))
    return cache[key]


def _level(spec, resolution, capacity_mode, cache, tol, min_hole_ratio):
    grid0, base = _base_eigen(spec, resolution, cache, tol)
    if spec.holes:
        grid = build_grid(spec, resolution, min_hole_ratio)
        lam = first_eigenpair(assemble(grid), tol=tol).lambda1
    else:
        lam = base.lambda1
    if capacity_mode == "computed":
        caps = [capacity(spec.with_holes([h]), resolution, min_hole_ratio=min_hole_ratio).value for h in spec.holes]
    elif capacity_mode == "lemma1":
        caps = [ball_capacity_asymptotic(h.eps, spec.dimension) for h in spec.holes]
    else:
        raise ValueError(f"capacity_mode must be 'computed' or 'lemma1', not {capacity_mode!r}")
    return grid0, base, lam, caps


def expansion_report(
    spec: DomainSpec,
    resolution: float,
    capacity_mode: str = "computed",
    extrapolate: bool = True,
    tol: float = 1e-8,
    min_hole_ratio: float = 4.0,
    cache: dict | None = None,
) -> ExpansionReport:
    """Direct eigenvalue of the perforated domain versus the capacity expansion.

    With ``extrapolate`` the eigenvalues (and computed capacities) are
    Richardson-extrapolated (order 1) from ``resolution`` and ``2*resolution``.
    phi1 is the unit-L2 base eigenfunction interpolated at the hole centres
    of the finest level.
    """
    cache = {} if cache is None else cache
    levels = (resolution, 2 * resolution) if extrapolate else (resolution,)
    raw = [_level(spec, r, capacity_mode, cache, tol, min_hole_ratio) for r in levels]
    grid0, base, _, _ = raw[-1]
    if extrapolate:
        lam_base = richardson(raw[0][1].lambda1, raw[1][1].lambda1, 1)
        lam_perf = richardson(raw[0][2], raw[1][2], 1)
        if capacity_mode == "computed":
            caps = [richardson(c0, c1, 1) for c0, c1 in zip(raw[0][3], raw[1][3])]
        else:
            caps = raw[1][3]
    else:
        lam_base, lam_perf, caps = raw[0][1].lambda1, raw[0][2], raw[0][3]

    phi_sq = [base.at(grid0, h.center) ** 2 for h in spec.holes]
    shift = sum(p * c for p, c in zip(phi_sq, caps))
    remainder = lam_perf - lam_base - shift if spec.holes else 0.0
    total_cap = sum(caps)
    eps = spec.min_eps if spec.holes else 0.0
    lead = ball_capacity_asymptotic(eps, spec.dimension) if spec.holes else math.nan
    return ExpansionReport(
        eps=eps,
        lambda_base=lam_base,
        lambda_perforated=lam_perf if spec.holes else lam_base,
        predicted_shift=shift,
        remainder=remainder,
        remainder_ratio=abs(remainder) / total_cap if total_cap > 0 else 0.0,
        order_ratio=(lam_perf - lam_base) / lead if spec.holes else 0.0,
        phi1_sq=phi_sq,
        capacities=caps,
        resolutions=tuple(levels),
        levels={
            "lambda_base": [r[1].lambda1 for r in raw],
            "lambda_perforated": [r[2] for r in raw],
            "capacities": [r[3] for r in raw],
        },
    )


def default_schedule(eps: float, floor: int = 64) -> int:
    """Coarse resolution for a hole of size ``eps``.

    The fine level (twice the coarse one) satisfies h <= eps/8 and the coarse
    level still resolves the hole (h < eps/4).
    """
    r = 4 * (math.floor(1.0 / eps) + 1)
    return max(floor, r)


def remainder_study(
    template: DomainSpec,
    eps_list: Sequence[float],
    schedule: Callable[[float], float] | dict | None = None,
    capacity_mode: str = "computed",
    **kw,
) -> list[ExpansionReport]:
    """One :class:`ExpansionReport` per hole size, holes of ``template`` rescaled to each eps."""
    eps_list = list(eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if schedule is None:
        schedule = default_schedule
    cache: dict = {}
    reports = []
    for eps in eps_list:
        res = schedule[eps] if isinstance(schedule, dict) else schedule(eps)
        reports.append(expansion_report(template.with_eps(eps), res, capacity_mode, cache=cache, **kw))
    return reports


def write_csv(reports: Sequence[ExpansionReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ExpansionReport.CSV_FIELDS)
        w.writeheader()
        for rep in reports:
            w.writerow({k: repr(v) for k, v in rep.row().items()})
