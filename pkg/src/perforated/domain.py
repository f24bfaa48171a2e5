"""Perforated domains and their masked lattice discretization.

A domain is an outer shape (box or ball) with finitely many closed holes
removed.  The grid is the set of lattice points ``origin + i*h`` that lie
strictly inside the outer shape and outside every hole closure; boundary
points and hole points are Dirichlet-exterior.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import (
    DomainError,
    EmptyDomain,
    HoleOutsideDomain,
    OverlappingHoles,
    UnresolvedHole,
)

# relative slack used when classifying lattice points that sit on a surface
_SURFACE_TOL = 1e-12


def _as_point(values, dimension=None) -> tuple[float, ...]:
    pt = tuple(float(v) for v in values)
    if dimension is not None and len(pt) != dimension:
        raise DomainError(f"expected a point of dimension {dimension}, got {pt}")
    return pt


@dataclass(frozen=True)
class Box:
    min: tuple[float, ...]
    max: tuple[float, ...]
    kind = "box"

    def __post_init__(self):
        object.__setattr__(self, "min", _as_point(self.min))
        object.__setattr__(self, "max", _as_point(self.max, len(self.min)))
        if any(lo >= hi for lo, hi in zip(self.min, self.max)):
            raise DomainError(f"degenerate box {self.min} .. {self.max}")

    @property
    def dimension(self) -> int:
        return len(self.min)

    def contains_open(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = np.asarray(self.min), np.asarray(self.max)
        tol = _SURFACE_TOL * float(np.max(hi - lo))
        return np.all((pts > lo + tol) & (pts < hi - tol), axis=-1)

    def to_dict(self) -> dict:
        return {"kind": "box", "min": list(self.min), "max": list(self.max)}


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float
    kind = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")

    @property
    def dimension(self) -> int:
        return len(self.center)

    @property
    def min(self):
        return tuple(c - self.radius for c in self.center)

    @property
    def max(self):
        return tuple(c + self.radius for c in self.center)

    def contains_open(self, pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
        return d < self.radius * (1 - _SURFACE_TOL)

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class HoleSpec:
    """A closed hole of size ``eps`` centred at ``center``.

    ``shape="cube"`` is the axis-aligned cube inscribed in the ball of radius
    ``eps``, so every hole is contained in its ``eps``-ball.
    """

    center: tuple[float, ...]
    eps: float
    shape: str = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if not self.eps > 0:
            raise DomainError(f"hole size must be positive, got {self.eps}")
        if self.shape not in ("ball", "cube"):
            raise DomainError(f"unknown hole shape {self.shape!r}")

    @property
    def half_side(self) -> float:
        """Half edge length of the cube shape (circumradius = eps)."""
        return self.eps / math.sqrt(len(self.center))

    def contains_closed(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.asarray(self.center)
        if self.shape == "ball":
            return np.linalg.norm(d, axis=-1) <= self.eps * (1 + _SURFACE_TOL)
        return np.max(np.abs(d), axis=-1) <= self.half_side * (1 + _SURFACE_TOL)

    def farthest_extent(self, direction_abs: np.ndarray) -> np.ndarray:
        # support function along |direction| for the two shapes
        if self.shape == "ball":
            return self.eps * np.linalg.norm(direction_abs, axis=-1)
        return self.half_side * np.sum(direction_abs, axis=-1)

    def with_eps(self, eps: float) -> "HoleSpec":
        return replace(self, eps=eps)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "eps": self.eps, "shape": self.shape}


def _closest_point(hole: HoleSpec, p: np.ndarray) -> np.ndarray:
    c = np.asarray(hole.center)
    if hole.shape == "ball":
        d = p - c
        r = np.linalg.norm(d)
        return p.copy() if r <= hole.eps else c + d * (hole.eps / r)
    a = hole.half_side
    return np.clip(p, c - a, c + a)


def holes_intersect(a: HoleSpec, b: HoleSpec) -> bool:
    """Exact closure-intersection test for ball/cube pairs."""
    ca, cb = np.asarray(a.center), np.asarray(b.center)
    if a.shape == "ball" and b.shape == "ball":
        return np.linalg.norm(ca - cb) <= a.eps + b.eps
    if a.shape == "cube" and b.shape == "cube":
        return bool(np.all(np.abs(ca - cb) <= a.half_side + b.half_side))
    ball, cube = (a, b) if a.shape == "ball" else (b, a)
    q = _closest_point(cube, np.asarray(ball.center))
    return np.linalg.norm(q - np.asarray(ball.center)) <= ball.eps


def _strictly_inside(outer, hole: HoleSpec) -> bool:
    c = np.asarray(hole.center)
    if isinstance(outer, Box):
        ext = hole.eps if hole.shape == "ball" else hole.half_side
        return bool(np.all(c - ext > np.asarray(outer.min)) and np.all(c + ext < np.asarray(outer.max)))
    d = np.abs(c - np.asarray(outer.center))
    if hole.shape == "ball":
        return np.linalg.norm(d) + hole.eps < outer.radius
    return np.linalg.norm(d + hole.half_side) < outer.radius


@dataclass(frozen=True)
class DomainSpec:
    """Outer domain plus a tuple of holes; validated on construction."""

    dimension: int
    outer: Box | Ball
    holes: tuple[HoleSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))
        if self.dimension not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.dimension}")
        if self.outer.dimension != self.dimension:
            raise DomainError("outer shape dimension does not match")
        for hole in self.holes:
            if len(hole.center) != self.dimension:
                raise DomainError(f"hole center {hole.center} has wrong dimension")
            if not _strictly_inside(self.outer, hole):
                raise HoleOutsideDomain(f"hole at {hole.center} (eps={hole.eps}) is not strictly inside the outer domain")
        for a, b in itertools.combinations(self.holes, 2):
            if holes_intersect(a, b):
                raise OverlappingHoles(f"holes at {a.center} and {b.center} intersect")

    # -- convenience -----------------------------------------------------
    def without_holes(self) -> "DomainSpec":
        return replace(self, holes=())

    def with_holes(self, holes: Sequence[HoleSpec]) -> "DomainSpec":
        return replace(self, holes=tuple(holes))

    def with_eps(self, eps: float) -> "DomainSpec":
        return replace(self, holes=tuple(h.with_eps(eps) for h in self.holes))

    @property
    def min_eps(self) -> float:
        return min((h.eps for h in self.holes), default=math.inf)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "outer": self.outer.to_dict(),
            "holes": [h.to_dict() for h in self.holes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        try:
            dim = int(d["dimension"])
            o = d["outer"]
            if o["kind"] == "box":
                outer = Box(o["min"], o["max"])
            elif o["kind"] == "ball":
                outer = Ball(o["center"], float(o["radius"]))
            else:
                raise DomainError(f"unknown outer kind {o['kind']!r}")
            holes = [HoleSpec(h["center"], float(h["eps"]), h.get("shape", "ball")) for h in d.get("holes", [])]
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed domain document: {exc}") from exc
        return cls(dim, outer, tuple(holes))

    @classmethod
    def from_json(cls, text: str) -> "DomainSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "DomainSpec":
        return cls.from_json(Path(path).read_text())


def unit_square(holes=()) -> DomainSpec:
    return DomainSpec(2, Box((0.0, 0.0), (1.0, 1.0)), tuple(holes))


def unit_cube(holes=()) -> DomainSpec:
    return DomainSpec(3, Box((0.0,) * 3, (1.0,) * 3), tuple(holes))


def unit_ball(dimension=2, holes=()) -> DomainSpec:
    return DomainSpec(dimension, Ball((0.0,) * dimension, 1.0), tuple(holes))


@dataclass(frozen=True, eq=False)
class Grid:
    """Masked lattice over the bounding box of a :class:`DomainSpec`.

    ``index`` maps every lattice point to its unknown number (or -1), and
    ``nodes`` holds the flat lattice positions of the active points in
    unknown order.  ``neighbors[i, 2*k]`` / ``neighbors[i, 2*k+1]`` are the
    unknowns at -h / +h along axis ``k`` (-1 when Dirichlet-exterior).
    """

    spec: DomainSpec
    resolution: float
    h: float
    origin: np.ndarray
    shape: tuple[int, ...]
    mask: np.ndarray
    index: np.ndarray
    nodes: np.ndarray
    neighbors: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @property
    def n_active(self) -> int:
        return int(self.nodes.size)

    def lattice_coords(self, multi_index) -> np.ndarray:
        return self.origin + np.asarray(multi_index, dtype=float) * self.h

    def coords(self, unknowns=None) -> np.ndarray:
        """Coordinates of active nodes, shape (N, dimension)."""
        flat = self.nodes if unknowns is None else self.nodes[np.asarray(unknowns)]
        mi = np.stack(np.unravel_index(flat, self.shape), axis=-1)
        return self.lattice_coords(mi)

    def unknown_at(self, points) -> np.ndarray:
        """Unknown index of the lattice point nearest to each point (-1 if inactive)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mi = np.rint((pts - self.origin) / self.h).astype(np.int64)
        inside = np.all((mi >= 0) & (mi < np.asarray(self.shape)), axis=1)
        out = np.full(len(pts), -1, dtype=np.int64)
        out[inside] = self.index[tuple(mi[inside].T)]
        return out

    def to_lattice(self, u: np.ndarray) -> np.ndarray:
        """Scatter a nodal vector (..., N) onto the lattice with zeros outside."""
        u = np.asarray(u)
        full = np.zeros(u.shape[:-1] + (int(np.prod(self.shape)),), dtype=u.dtype)
        full[..., self.nodes] = u
        return full.reshape(u.shape[:-1] + self.shape)

    def interpolate(self, u: np.ndarray, point) -> float:
        """Multilinear interpolation of nodal values (zero off the active set)."""
        p = (np.asarray(point, dtype=float) - self.origin) / self.h
        base = np.floor(p).astype(np.int64)
        frac = p - base
        total = 0.0
        for corner in itertools.product((0, 1), repeat=self.dimension):
            mi = base + np.asarray(corner)
            if np.any(mi < 0) or np.any(mi >= np.asarray(self.shape)):
                continue
            k = self.index[tuple(mi)]
            if k < 0:
                continue
            w = np.prod(np.where(np.asarray(corner) == 1, frac, 1 - frac))
            total += w * float(u[k])
        return total


def _lattice_frame(spec: DomainSpec, h: float):
    outer = spec.outer
    if isinstance(outer, Box):
        lo, hi = np.asarray(outer.min), np.asarray(outer.max)
        counts = (hi - lo) / h
        n = np.rint(counts).astype(np.int64)
        if np.any(np.abs(counts - n) > 1e-9 * np.maximum(counts, 1)):
            raise DomainError("box extents must be integer multiples of 1/resolution")
        return lo, tuple(int(k) + 1 for k in n)
    # anchored at the ball center so the center is a lattice point
    m = int(math.ceil(outer.radius / h)) + 1
    return np.asarray(outer.center) - m * h, (2 * m + 1,) * spec.dimension


def build_grid(spec: DomainSpec, resolution: float, min_hole_ratio: float = 4.0) -> Grid:
    """Staircase discretization of ``spec`` with spacing ``h = 1/resolution``.

    Holes must satisfy ``h < eps / min_hole_ratio``; pass ``min_hole_ratio=0``
    to skip the check (holes may then cover no lattice point at all).
    """
    if not resolution > 0:
        raise DomainError("resolution must be positive")
    h = 1.0 / resolution
    for hole in spec.holes:
        if min_hole_ratio > 0 and h >= hole.eps / min_hole_ratio:
            raise UnresolvedHole(
                f"h = {h:.4g} does not resolve hole eps = {hole.eps:.4g} (need h < eps/{min_hole_ratio:g})"
            )
    origin, shape = _lattice_frame(spec, h)
    axes = [origin[k] + h * np.arange(shape[k]) for k in range(spec.dimension)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = spec.outer.contains_open(pts)
    for hole in spec.holes:
        mask &= ~hole.contains_closed(pts)
    del pts
    nodes = np.flatnonzero(mask)
    if nodes.size == 0:
        raise EmptyDomain("no active lattice points; increase the resolution")
    index = np.full(shape, -1, dtype=np.int64)
    index.flat[nodes] = np.arange(nodes.size)

    padded = np.pad(index, 1, constant_values=-1)
    mi = np.unravel_index(nodes, shape)
    neighbors = np.empty((nodes.size, 2 * spec.dimension), dtype=np.int64)
    for k in range(spec.dimension):
        for j, step in enumerate((-1, 1)):
            shifted = [m + 1 for m in mi]
            shifted[k] = shifted[k] + step
            neighbors[:, 2 * k + j] = padded[tuple(shifted)]
    return Grid(spec, float(resolution), h, origin, shape, mask, index, nodes, neighbors)


def connected_components(grid: Grid) -> int:
    """Number of connected components of the active set (axis adjacency)."""
    _, count = ndimage.label(grid.mask)
    return int(count)
